"""Successive minima of the parametric bodies C_u(q) and their duals.

For u = (1, xi, eta) the primal gauge is F_q(x) = max(|x|, e^q |x.u|) and the
dual gauge is G_q(x) = max(e^-q |x|, |x ^ u|); L_j(q) and L*_j(q) are the
logs of their successive minima over Z^3. Both gauges are squeezed between
a quadratic form Q and Q/2, so every point with gauge <= R lies in the
ellipsoid Q <= 2R^2. That ellipsoid is enumerated exactly after an LLL
reduction of Q, which keeps the work independent of q.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .errors import DomainError, InsufficientData, QTooLarge, RangeError
from .minimal_points import Gauge, MinimalPointSequence, PairTarget
from .numbers import enclose
from .three_system import PLFunction, kappa

Q_MAX_DESK = 30
WORK_BITS = 256
TAIL_FRACTION = 0.5


def _mpf(x: Fraction) -> mpmath.mpf:
    return mpmath.mpf(x.numerator) / x.denominator


def _frac(x: mpmath.mpf) -> Fraction:
    man, exp = mpmath.mpf(x).man_exp
    return Fraction(int(man)) * Fraction(2) ** int(exp)


@dataclass(frozen=True)
class BodyQuery:
    """u = (1, xi, eta) as high-precision rationals together with q."""

    u: tuple[Fraction, Fraction, Fraction]
    q: float

    @classmethod
    def make(cls, pair: PairTarget, q: float) -> "BodyQuery":
        if q < 0:
            raise DomainError("q must be non-negative")
        eps = Fraction(1, 1 << WORK_BITS)
        a, b = enclose(pair.xi, eps), enclose(pair.eta, eps)
        return cls((Fraction(1), (a.lo + a.hi) / 2, (b.lo + b.hi) / 2), float(q))


# ---------------------------------------------------------------------------
# exact LLL and ellipsoid enumeration in dimension 3


def _dot(G, a, b):
    return sum(a[i] * G[i][j] * b[j] for i in range(3) for j in range(3))


def _lll(G, delta=Fraction(3, 4)):
    """LLL-reduce the standard basis of Z^3 for the Gram matrix G (exact)."""
    B = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]

    def gso():
        mu = [[Fraction(0)] * 3 for _ in range(3)]
        bstar = []
        norms = []
        for i in range(3):
            v = [Fraction(c) for c in B[i]]
            for j in range(i):
                mu[i][j] = _dot(G, B[i], bstar[j]) / norms[j]
                v = [v[t] - mu[i][j] * bstar[j][t] for t in range(3)]
            bstar.append(v)
            norms.append(_dot(G, v, v))
        return mu, norms

    k = 1
    mu, norms = gso()
    while k < 3:
        for j in range(k - 1, -1, -1):
            c = round(mu[k][j])
            if c:
                B[k] = [B[k][t] - c * B[j][t] for t in range(3)]
                mu, norms = gso()
        if norms[k] >= (delta - mu[k][k - 1] ** 2) * norms[k - 1]:
            k += 1
        else:
            B[k], B[k - 1] = B[k - 1], B[k]
            mu, norms = gso()
            k = max(k - 1, 1)
    return B


def _ldl(G):
    """G = L D L^T with unit lower-triangular L (exact)."""
    L = [[Fraction(int(i == j)) for j in range(3)] for i in range(3)]
    D = [Fraction(0)] * 3
    for j in range(3):
        D[j] = G[j][j] - sum(L[j][k] ** 2 * D[k] for k in range(j))
        for i in range(j + 1, 3):
            L[i][j] = (G[i][j] - sum(L[i][k] * L[j][k] * D[k] for k in range(j))) / D[j]
    return L, D


def _ellipsoid_points(G, T: Fraction) -> list[tuple[int, int, int]]:
    """All non-zero integer x (one per +-pair) with x^T G x <= T."""
    B = _lll(G)
    Gr = [[_dot(G, B[i], B[j]) for j in range(3)] for i in range(3)]
    L, D = _ldl(Gr)
    d = [float(v) for v in D]
    l = [[float(v) for v in row] for row in L]
    t = float(T) * (1 + 1e-9) + 1e-300
    out = []
    r2 = math.isqrt(int(t / d[2]) + 1) + 1
    for c2 in range(-r2, r2 + 1):
        rem2 = t - d[2] * c2 * c2
        if rem2 < 0:
            continue
        ctr1 = -l[2][1] * c2
        w1 = math.sqrt(rem2 / d[1])
        for c1 in range(math.ceil(ctr1 - w1), math.floor(ctr1 + w1) + 1):
            rem1 = rem2 - d[1] * (c1 - ctr1) ** 2
            if rem1 < 0:
                continue
            ctr0 = -(l[1][0] * c1 + l[2][0] * c2)
            w0 = math.sqrt(rem1 / d[0])
            for c0 in range(math.ceil(ctr0 - w0), math.floor(ctr0 + w0) + 1):
                x = tuple(c0 * B[0][i] + c1 * B[1][i] + c2 * B[2][i] for i in range(3))
                if x == (0, 0, 0):
                    continue
                first = next(v for v in x if v != 0)
                if first > 0:
                    out.append(x)
    return out


def _det3(a, b, c) -> int:
    return (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]))


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def greedy_minima(scored: Sequence[tuple]) -> list[tuple]:
    """Pick 3 independent vectors from (value, x) pairs sorted by (value, x)."""
    chosen: list[tuple] = []
    for val, x in scored:
        if not chosen:
            chosen.append((val, x))
        elif len(chosen) == 1:
            if _cross(chosen[0][1], x) != (0, 0, 0):
                chosen.append((val, x))
        elif _det3(chosen[0][1], chosen[1][1], x) != 0:
            chosen.append((val, x))
            break
    return chosen


@dataclass(frozen=True)
class Minima:
    logs: tuple[float, float, float]
    vectors: tuple


def _primal_log(bq: BodyQuery, x) -> mpmath.mpf:
    u = [_mpf(c) for c in bq.u]
    n = mpmath.sqrt(sum(v * v for v in x))
    dot = abs(sum(x[i] * u[i] for i in range(3)))
    return mpmath.log(max(n, mpmath.exp(bq.q) * dot))


def _dual_log(bq: BodyQuery, x) -> mpmath.mpf:
    u = [_mpf(c) for c in bq.u]
    n = mpmath.sqrt(sum(v * v for v in x))
    w = _cross(x, u)
    return mpmath.log(max(n * mpmath.exp(-bq.q), mpmath.sqrt(sum(v * v for v in w))))


def _minima(bq: BodyQuery, gram, log_gauge) -> Minima:
    # any three independent basis vectors give an upper bound R^2 <= max Q(b_i)
    B = _lll(gram)
    T = 2 * max(_dot(gram, b, b) for b in B)
    with mpmath.workprec(WORK_BITS):
        pts = _ellipsoid_points(gram, T)
        scored = sorted(((log_gauge(bq, x), x) for x in pts), key=lambda t: (t[0], t[1]))
        chosen = greedy_minima(scored)
        if len(chosen) < 3:
            raise InsufficientData("enumeration did not reach three independent points")
        # the third minimum must lie inside the enumerated radius
        bound = mpmath.log(mpmath.sqrt(_mpf(T) / 2))
        if chosen[2][0] > bound + mpmath.mpf(10) ** -30:
            raise InsufficientData("enumeration radius too small")
        return Minima(tuple(float(v) for v, _ in chosen), tuple(x for _, x in chosen))


def _exp2q(q: float) -> Fraction:
    with mpmath.workprec(WORK_BITS):
        return _frac(mpmath.exp(2 * mpmath.mpf(q)))


def _check_q(q: float) -> None:
    if q > Q_MAX_DESK:
        raise QTooLarge(f"q = {q} exceeds the desk cap {Q_MAX_DESK}")
    if q < 0:
        raise DomainError("q must be non-negative")


def successive_minima(pair: PairTarget, q: float) -> Minima:
    """L_1 <= L_2 <= L_3 for C_u(q) via Q(x) = |x|^2 + e^{2q}(x.u)^2."""
    _check_q(q)
    bq = BodyQuery.make(pair, q)
    E, u = _exp2q(q), bq.u
    gram = [[int(i == j) + E * u[i] * u[j] for j in range(3)] for i in range(3)]
    return _minima(bq, gram, _primal_log)


def dual_minima(pair: PairTarget, q: float) -> Minima:
    """L*_1 <= L*_2 <= L*_3 via Q*(x) = e^{-2q}|x|^2 + |x ^ u|^2."""
    _check_q(q)
    bq = BodyQuery.make(pair, q)
    Ei, u = 1 / _exp2q(q), bq.u
    nu2 = sum(c * c for c in u)
    gram = [[(Ei + nu2) * int(i == j) - u[i] * u[j] for j in range(3)] for i in range(3)]
    return _minima(bq, gram, _dual_log)


def L_star_point(x, pair: PairTarget, q: float) -> float:
    """max(log |x ^ u|, log |x| - q)."""
    if tuple(x) == (0, 0, 0):
        raise DomainError("x must be non-zero")
    bq = BodyQuery.make(pair, q)
    with mpmath.workprec(WORK_BITS):
        return float(_dual_log(bq, tuple(x)))


def L1_star_from_points(points, q: float) -> float:
    """min_i max(log Delta_i, log X_i - q) over NORM minimal points.

    Points beyond the list have log X > log X_last, so the minimum is
    certified only when it does not exceed log X_last - q.
    """
    if isinstance(points, MinimalPointSequence):
        if points.gauge is not Gauge.NORM:
            raise DomainError("L*_1 from points needs NORM-gauge minimal points")
        lx, ld = points.log_X, points.log_Delta
    else:
        lx, ld = [p[0] for p in points], [p[1] for p in points]
    if not lx:
        raise RangeError("no points")
    val = min(max(d, x - q) for x, d in zip(lx, ld))
    if val > lx[-1] - q:
        raise RangeError(f"q = {q} beyond the range certified by the points")
    return val


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class Sample:
    q: float
    L: tuple[float, float, float]
    Ls: tuple[float, float, float]
    L1s_points: float | None

    @property
    def sum_gap(self) -> float:
        return sum(self.L) - self.q

    @property
    def dual_gap(self) -> float:
        return self.L[2] + self.Ls[0]


@dataclass(frozen=True)
class ParametricProfile:
    pair: PairTarget
    samples: tuple[Sample, ...]
    psi_bars: tuple[float, float, float]
    psi_unders: tuple[float, float, float]
    duality_gap_sup: float
    minkowski_gap_sup: float
    duality_slope: float
    minkowski_slope: float


def _fit_slope(xs, ys) -> float:
    if len(xs) < 2:
        return 0.0
    return float(np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)[0])


def q_grid(q_min: float, q_max: float, step: float) -> list[float]:
    if step <= 0:
        raise DomainError("step must be positive")
    n = int(math.floor((q_max - q_min) / step + 1e-9))
    return [round(q_min + i * step, 12) for i in range(n + 1)]


def profile(pair: PairTarget, grid: Sequence[float], points: MinimalPointSequence | None = None) -> ParametricProfile:
    """Sample L_j and L*_j on ``grid`` and derive exponent and gap statistics."""
    for q in grid:
        _check_q(q)
    samples = []
    for q in grid:
        L = successive_minima(pair, q).logs
        Ls = dual_minima(pair, q).logs
        via = None
        if points is not None and len(points):
            try:
                via = L1_star_from_points(points, q)
            except RangeError:
                via = None
        samples.append(Sample(q, L, Ls, via))
    tail = [s for s in samples if s.q >= grid[0] + TAIL_FRACTION * (grid[-1] - grid[0])] or samples
    tail = [s for s in tail if s.q > 0] or tail
    bars = tuple(max(s.L[j] / s.q for s in tail) for j in range(3)) if tail[0].q > 0 else (math.nan,) * 3
    unders = tuple(min(s.L[j] / s.q for s in tail) for j in range(3)) if tail[0].q > 0 else (math.nan,) * 3
    qs = [s.q for s in samples]
    return ParametricProfile(
        pair,
        tuple(samples),
        bars,
        unders,
        max(abs(s.dual_gap) for s in samples),
        max(abs(s.sum_gap) for s in samples),
        _fit_slope(qs, [s.dual_gap for s in samples]),
        _fit_slope(qs, [s.sum_gap for s in samples]),
    )


def snap_to_pl(qs: Sequence[float], values: Sequence[float], limit: int = 10**6) -> PLFunction:
    """Flat-then-rise {0,1} function through the local peaks of sampled data.

    A sample is a peak when the curve rose into it by at least half a step
    and then stops rising. Between peaks the function stays flat and then
    climbs with slope 1, with heights clamped to keep the slopes admissible.
    """
    if len(qs) < 3:
        raise InsufficientData("need at least three samples")
    fq = [Fraction(q).limit_denominator(limit) for q in qs]
    fv = [Fraction(v).limit_denominator(limit) for v in values]
    anchors = [0]
    for j in range(1, len(fq)):
        step = fq[j] - fq[j - 1]
        rose = fv[j] - fv[j - 1] >= step / 2
        stops = j + 1 == len(fq) or fv[j + 1] - fv[j] < (fq[j + 1] - fq[j]) / 2
        if rose and stops:
            anchors.append(j)
    if anchors[-1] != len(fq) - 1:
        anchors.append(len(fq) - 1)
    verts = [(fq[0], fv[0])]
    for a, b in zip(anchors, anchors[1:]):
        va = verts[-1][1]
        vb = min(max(fv[b], va), va + (fq[b] - fq[a]))
        verts.append((fq[b] - (vb - va), va))
        verts.append((fq[b], vb))
    return PLFunction(verts, 0)


def kappa_of_profile(prof: ParametricProfile):
    """kappa of the snapped L_3 trajectory (a KappaResult)."""
    f = snap_to_pl([s.q for s in prof.samples], [s.L[2] for s in prof.samples])
    return kappa(f)


def profile_csv(prof: ParametricProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "L1", "L2", "L3", "L1s", "L2s", "L3s", "sum_gap", "dual_gap"])
    for s in prof.samples:
        row = [s.q, *s.L, *s.Ls, s.sum_gap, s.dual_gap]
        w.writerow([f"{v:.9g}" for v in row])
    return buf.getvalue()
