"""Explicit 3-systems realising a target pair (lambda, lambda_under).

Two families are built, plus a balanced staircase for the generic point
(1/2, 1/2):

* case 1, for max(1 - lambda, 0) < lambda_under: peaks at q_k = beta_0 ... beta_k
  with vertex data a^(k) and a slope-1/2 staircase between s_k and t_k;
* case 2, for lambda_under <= 1/2: peaks from a three-term recurrence with
  a balanced staircase between s_k and t_k.

All arithmetic is exact (Fraction, or QuadSurd for quadratic targets).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import RegionError, SpectrumError
from .exponents import spectrum_check
from .numbers import QuadSurd, as_exact, format_exact, parse_exact, parse_real
from .three_system import ThreeSystem, change_points, eval_pl

MIN_CELLS = 8
MAX_CELLS = 1 << 20
HALF = Fraction(1, 2)
THIRD = Fraction(1, 3)


def _is_inf(v) -> bool:
    return isinstance(v, float) and math.isinf(v) and v > 0


def parse_exponent(text: str):
    """Parse 'inf', 'p/q', an integer, 'a+b*sqrt(c)' or a RealExpr quadratic surd."""
    t = text.strip()
    if t.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return parse_exact(t)
    except ValueError:
        pass
    v = parse_real(t).exact()
    if v is None:
        raise ValueError(f"{text!r} is not an exact quadratic number")
    return v


@dataclass(frozen=True)
class SpectrumTarget:
    lam: object
    lam_under: object

    def __post_init__(self):
        lam = self.lam if _is_inf(self.lam) else as_exact(self.lam)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "lam_under", as_exact(self.lam_under))
        if not spectrum_check(self.lam, self.lam_under):
            raise SpectrumError(
                f"({_fmt(self.lam)}, {_fmt(self.lam_under)}) violates "
                "lambda_under^2/(1 - lambda_under) <= lambda with 1/2 < lambda and 0 <= lambda_under <= 1"
            )

    @property
    def psi_target(self):
        """lambda/(1+lambda), the expected upper exponent of P3."""
        return Fraction(1) if _is_inf(self.lam) else self.lam / (1 + self.lam)

    @property
    def kappa_target(self):
        """lambda_under/(1+lambda_under), the expected kappa of P3."""
        return self.lam_under / (1 + self.lam_under)


def _fmt(v) -> str:
    return "inf" if _is_inf(v) else format_exact(v)


# ---------------------------------------------------------------------------
# case 1


@dataclass(frozen=True)
class Case1Params:
    target: SpectrumTarget
    nu: object
    beta: Callable[[int], object]
    N: int
    theta: object
    K: int

    def q(self, k: int):
        out = Fraction(1)
        for i in range(k + 1):
            out = out * self.beta(i)
        return out

    def a(self, k: int) -> tuple:
        q, b, bp = self.q(k), self.beta(k), self.beta(k - 1)
        return (q * self.nu / (b * bp), q * self.nu / b, q * (1 - self.nu / b - self.nu / (b * bp)))

    def s(self, k: int):
        b, bp = self.beta(k), self.beta(k - 1)
        return (2 - self.nu / b - 2 * self.nu / (b * bp)) * self.q(k)

    def t(self, k: int):
        return (2 * self.nu + self.nu / self.beta(k)) * self.q(k)

    def r(self, k: int):
        b, bp = self.beta(k), self.beta(k - 1)
        return (1 + self.nu - self.nu / (b * bp)) * self.q(k)

    def beta_label(self) -> str:
        return "k+1" if _is_inf(self.target.lam) else format_exact(self.beta(0))


def _chain(nu, b, bp) -> bool:
    lhs, mid = 1 / (b * bp), 1 / b
    right = 1 / nu - 1 / b - 1 / (b * bp)
    return lhs <= mid < right <= 1


def derive_case1(target: SpectrumTarget, K: int) -> Case1Params:
    lam, lu = target.lam, target.lam_under
    if lu <= 0 or (not _is_inf(lam) and not lam + lu > 1):
        raise RegionError("case 1 needs 1 < lambda + lambda_under and lambda_under > 0")
    if K < 1:
        raise ValueError("K must be at least 1")
    if _is_inf(lam):
        nu = 1 / lu
        beta = _beta_factorial
        theta = (HALF + 1) / 2
    else:
        nu = 1 / (lu * (1 + 1 / lam) * (1 + lu / lam))
        c = lam / lu
        beta = _ConstBeta(c)
        theta = (1 / (2 + lu / lam) + lam / (1 + lam)) / 2
    for N in range(1, 64):
        if all(_chain(nu, beta(k), beta(k - 1)) for k in range(N, N + K + 2)):
            return Case1Params(target, as_exact(nu), beta, N, as_exact(theta), K)
    raise RegionError("no starting index satisfies the inequality chain")


def _beta_factorial(k: int):
    return Fraction(k + 1)


@dataclass(frozen=True)
class _ConstBeta:
    c: object

    def __call__(self, k: int):
        return self.c


def _slope_half_staircase(s, c, t, d, theta):
    """Cells (P3 up h, then P2 up h) from (s; c, c) to (t; d, d) keeping P3/q < theta."""
    n = MIN_CELLS
    while True:
        h = (d - c) / n
        worst = max((c + h) / (s + h), (c + n * h) / (s + (2 * n - 1) * h))
        if worst < theta:
            break
        n *= 2
        if n > MAX_CELLS:
            raise RegionError("staircase cannot respect the theta bound")
    steps = []
    for j in range(n):
        q = s + 2 * j * h
        steps.append((q + h, c + j * h, c + (j + 1) * h))
        steps.append((q + 2 * h, c + (j + 1) * h, c + (j + 1) * h))
    return steps


def build_case1(p: Case1Params) -> ThreeSystem:
    knots = []
    for k in range(p.N, p.N + p.K):
        a1, a2, a3 = p.a(k)
        qk, s, t = p.q(k), p.s(k), p.t(k)
        knots.append((qk, (a1, a2, a3)))
        knots.append((qk + (a2 - a1), (a2, a2, a3)))
        knots.append((s, (a2, a3, a3)))
        a2n = p.a(k + 1)[1]
        if s != t:
            for q, v2, v3 in _slope_half_staircase(s, a3, t, a2n, p.theta):
                knots.append((q, (a2, v2, v3)))
        knots.append((t, (a2, a2n, a2n)))
    knots.append((p.q(p.N + p.K), p.a(p.N + p.K)))
    manifest = {
        "case": 1,
        "lambda": _fmt(p.target.lam),
        "lambda_under": _fmt(p.target.lam_under),
        "nu": p.nu,
        "beta": p.beta_label(),
        "N": p.N,
        "K": p.K,
        "theta": p.theta,
    }
    return ThreeSystem.from_knots(knots, (1, 0, 0), manifest)


# ---------------------------------------------------------------------------
# case 2


@dataclass(frozen=True)
class Case2Params:
    target: SpectrumTarget
    alpha: Callable[[int], object]
    psi: Callable[[int], object]
    theta: object
    q0: object
    K: int

    def qs(self) -> list:
        out = [self.q0]
        for k in range(self.K):
            out.append(self.psi(k) / (1 - self.psi(k + 1)) * (1 / self.alpha(k) - 1) * out[-1])
        return out

    def r(self, k: int, qs=None):
        qs = qs or self.qs()
        return self.psi(k) * qs[k] + (1 - self.psi(k + 1)) * qs[k + 1]


@dataclass(frozen=True)
class _Const:
    v: object

    def __call__(self, k: int):
        return self.v


def _alpha_to_zero(k: int):
    return min(THIRD, Fraction(1, k + 4))


def _psi_to_one(k: int):
    return 1 - Fraction(1, k + 4)


def derive_case2(target: SpectrumTarget, K: int) -> Case2Params:
    lam, lu = target.lam, target.lam_under
    if lu > HALF:
        raise RegionError("case 2 needs lambda_under <= 1/2")
    if K < 1:
        raise ValueError("K must be at least 1")
    if lu == 0:
        alpha = _alpha_to_zero
    else:
        alpha = _Const(lu / (1 + lu))
    if _is_inf(lam):
        psi, psi_inf = _psi_to_one, _psi_to_one(0)
    else:
        psi_inf = lam / (1 + lam)
        psi = _Const(psi_inf)
    theta = (THIRD + psi_inf) / 2
    return Case2Params(target, alpha, psi, as_exact(theta), Fraction(1), K)


def _balanced_staircase(s, c, t, d, theta):
    """Cells cycling P3, P2, P1 from (c, c, c) at s to (d, d, d) at t."""
    n = MIN_CELLS
    while True:
        h = (d - c) / n
        if (c + h) / (s + h) < theta:
            break
        n *= 2
        if n > MAX_CELLS:
            raise RegionError("staircase cannot respect the theta bound")
    steps = []
    for j in range(n):
        v, q = c + j * h, s + 3 * j * h
        steps.append((q + h, (v, v, v + h)))
        steps.append((q + 2 * h, (v, v + h, v + h)))
        steps.append((q + 3 * h, (v + h, v + h, v + h)))
    return steps


def build_case2(p: Case2Params) -> ThreeSystem:
    qs = p.qs()
    knots = []
    for k in range(p.K):
        qk, psi = qs[k], p.psi(k)
        low, top = (1 - psi) * qk / 2, psi * qk
        s = 3 * psi * qk
        t = 3 * (1 - p.psi(k + 1)) * qs[k + 1] / 2
        knots.append((qk, (low, low, top)))
        knots.append((qk + (top - low), (low, top, top)))
        knots.append((s, (top, top, top)))
        knots.extend(_balanced_staircase(s, top, t, t / 3, p.theta))
    psi = p.psi(p.K)
    knots.append((qs[-1], ((1 - psi) * qs[-1] / 2, (1 - psi) * qs[-1] / 2, psi * qs[-1])))
    manifest = {
        "case": 2,
        "lambda": _fmt(p.target.lam),
        "lambda_under": _fmt(p.target.lam_under),
        "alpha": "min(1/3,1/(k+4))" if p.alpha is _alpha_to_zero else p.alpha(0),
        "psi": "1-1/(k+4)" if p.psi is _psi_to_one else p.psi(0),
        "theta": p.theta,
        "q0": p.q0,
        "K": p.K,
    }
    return ThreeSystem.from_knots(knots, (0, 1, 0), manifest)


# ---------------------------------------------------------------------------
# balanced system and dispatch


def build_balanced(K: int) -> ThreeSystem:
    """Unit staircase from q = 3 whose three ratios all tend to 1/3."""
    if K < 3:
        raise ValueError("K must be at least 3")
    knots = [(Fraction(3), (Fraction(1),) * 3)]
    for j in range(1, K + 1):
        q, v = Fraction(3 * j), Fraction(j)
        knots.append((q + 1, (v, v, v + 1)))
        knots.append((q + 2, (v, v + 1, v + 1)))
        knots.append((q + 3, (v + 1, v + 1, v + 1)))
    manifest = {"case": "balanced", "lambda": "1/2", "lambda_under": "1/2", "K": K}
    return ThreeSystem.from_knots(knots, (0, 0, 1), manifest)


def choose_case(target: SpectrumTarget) -> str:
    lam, lu = target.lam, target.lam_under
    if not _is_inf(lam) and lam == HALF and lu == HALF:
        return "balanced"
    if _is_inf(lam):
        return "1" if lu > 0 else "2"
    return "1" if max(1 - lam, Fraction(0)) < lu else "2"


def construct(target: SpectrumTarget, K: int, case: str = "auto") -> ThreeSystem:
    """Build the 3-system for ``target`` with K peaks (or steps)."""
    which = choose_case(target) if case == "auto" else str(case)
    if which == "balanced":
        return build_balanced(max(K, 3))
    if which == "1":
        return build_case1(derive_case1(target, K))
    if which == "2":
        return build_case2(derive_case2(target, K))
    raise ValueError(f"unknown case {case!r}")


def main_peaks(system: ThreeSystem, theta) -> list:
    """Change points of P3 whose ratio reaches theta, i.e. the construction's q_k."""
    p3 = system.components[2]
    return [q for q in change_points(p3) if eval_pl(p3, q) / q >= theta]


def limit_trend(values, ks) -> Fraction:
    """Extrapolate values(k) to k = infinity by a polynomial in 1/k (Neville at 0)."""
    xs = [Fraction(1, k) for k in ks]
    p = [Fraction(v) if not isinstance(v, QuadSurd) else v for v in values]
    n = len(xs)
    for m in range(1, n):
        p = [(xs[i] * p[i + 1] - xs[i + m] * p[i]) / (xs[i] - xs[i + m]) for i in range(n - m)]
    return p[0]
