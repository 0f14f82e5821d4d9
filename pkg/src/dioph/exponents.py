"""Finite-data estimators for the approximation exponents of a pair.

Every estimator works on the tail of a minimal point sequence: the first
20% of the points (at least 4) are dropped, and the remaining ratios give
the estimate plus a min/max window. None of this certifies the true
asymptotic exponent; it reports what the finite data supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import InsufficientData, RegimeMismatch
from .minimal_points import MinimalPointSequence

INF_THRESHOLD = 1e6
CONVERGED_WIDTH = 0.02
DEFAULT_GRID = 8


@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    window_lo: float
    window_hi: float
    tail_start: int
    n_points_used: int
    converged: bool

    def __post_init__(self):
        if not self.window_lo <= self.value <= self.window_hi:
            raise ValueError("estimate outside its window")


@dataclass(frozen=True)
class EpsEntry:
    eps: float
    estimate: ExponentEstimate
    subseq_len: int


@dataclass(frozen=True)
class EpsProfile:
    entries: tuple[EpsEntry, ...]


def tail_start(n: int) -> int:
    return max(4, math.floor(0.2 * n))


def _logs(points) -> tuple[list[float], list[float]]:
    if isinstance(points, MinimalPointSequence):
        return points.log_X, points.log_Delta
    lx, ld = points
    return list(lx), list(ld)


def _estimate(vals: Sequence[float], value: float, start: int, extended: bool = False) -> ExponentEstimate:
    lo, hi = min(vals), max(vals)
    if extended and value > INF_THRESHOLD:
        return ExponentEstimate(math.inf, lo, math.inf, start, len(vals), False)
    return ExponentEstimate(value, lo, hi, start, len(vals), hi - lo <= CONVERGED_WIDTH)


def _require(n: int, need: int) -> None:
    if n < need:
        raise InsufficientData(f"need at least {need} points, got {n}")


def lambda_est(points) -> ExponentEstimate:
    """Tail maximum of -log Delta_i / log X_i."""
    lx, ld = _logs(points)
    _require(len(lx), 8)
    ts = tail_start(len(lx))
    vals = [-d / x for x, d in zip(lx[ts:], ld[ts:]) if x > 0]
    if not vals:
        raise InsufficientData("no tail point with X > 1")
    return _estimate(vals, max(vals), ts, extended=True)


def lambda_hat_est(points) -> ExponentEstimate:
    """Tail minimum of -log Delta_i / log X_{i+1}."""
    lx, ld = _logs(points)
    _require(len(lx), 8)
    ts = tail_start(len(lx))
    vals = [-ld[i] / lx[i + 1] for i in range(ts, len(lx) - 1)]
    return _estimate(vals, min(vals), ts)


def eps_indices(points, eps: float) -> list[int]:
    """Indices i with Delta_i <= X_i^(-eps); every index when eps == 0."""
    lx, ld = _logs(points)
    if eps == 0:
        return list(range(len(lx)))
    return [i for i, (x, d) in enumerate(zip(lx, ld)) if -d >= eps * x]


def lambda_hat_eps_est(points, eps: float) -> tuple[ExponentEstimate, int]:
    """Tail minimum of -log Delta_{i_k} / log X_{i_{k+1}} along the eps-filtered indices."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    lx, ld = _logs(points)
    _require(len(lx), 8)
    ts = tail_start(len(lx))
    idx = eps_indices((lx, ld), eps)
    tail = [i for i in idx if i >= ts]
    if len(tail) < 3:
        raise InsufficientData(f"only {len(tail)} tail indices survive eps = {eps:.6f}")
    vals = [-ld[i] / lx[j] for i, j in zip(tail, tail[1:])]
    return _estimate(vals, min(vals), ts), len(idx)


def lambda_under_est(points, grid: int = DEFAULT_GRID) -> tuple[ExponentEstimate, EpsProfile]:
    """Read the eps-profile at eps_j = L(1 - 2^-j) and return its deepest computable entry."""
    lx, ld = _logs(points)
    _require(len(lx), 16)
    lam = lambda_est((lx, ld))
    top = lam.value if math.isfinite(lam.value) else max(
        -d / x for x, d in zip(lx[lam.tail_start:], ld[lam.tail_start:]) if x > 0
    )
    entries = []
    for j in range(1, grid + 1):
        eps = top * (1 - 2.0**-j)
        try:
            est, n = lambda_hat_eps_est((lx, ld), eps)
        except InsufficientData:
            continue
        entries.append(EpsEntry(eps, est, n))
    if not entries:
        raise InsufficientData("no eps grid point keeps 3 tail indices")
    return entries[-1].estimate, EpsProfile(tuple(entries))


def beta0_est(points, grid: int = DEFAULT_GRID) -> ExponentEstimate:
    """Reciprocal of the lower exponent, valid only when lambda is close to 1."""
    lam = lambda_est(points)
    if abs(lam.value - 1) > 0.1:
        raise RegimeMismatch(f"lambda estimate {lam.value:.6f} is not within 0.1 of 1")
    lu, _ = lambda_under_est(points, grid)

    def inv(v: float) -> float:
        return math.inf if v <= 0 else 1 / v

    return ExponentEstimate(inv(lu.value), inv(lu.window_hi), inv(lu.window_lo),
                            lu.tail_start, lu.n_points_used, lu.converged)


def ratio_table(points) -> list[tuple[int, float, float]]:
    """Raw consecutive ratios (i, -log D_i/log X_i, -log D_i/log X_{i+1})."""
    lx, ld = _logs(points)
    rows = []
    for i in range(len(lx) - 1):
        a = -ld[i] / lx[i] if lx[i] > 0 else math.inf
        rows.append((i, a, -ld[i] / lx[i + 1]))
    return rows


# ---------------------------------------------------------------------------
# joint spectrum region


def _is_inf(v) -> bool:
    return isinstance(v, float) and math.isinf(v) and v > 0


def spectrum_check(lam, lam_under) -> bool:
    """Is (lambda, lambda_under) an admissible pair of exponents?

    Exact for Fraction and QuadSurd inputs; ``math.inf`` stands for an
    infinite lambda.
    """
    half = Fraction(1, 2)
    if not _is_inf(lam) and lam == half and lam_under == half:
        return True
    if isinstance(lam, float) and not math.isfinite(lam) and lam < 0:
        return False
    if not (0 <= lam_under <= 1):
        return False
    if _is_inf(lam):
        return True
    if not lam > half:
        return False
    if lam_under == 1:
        return False
    if isinstance(lam, float) or isinstance(lam_under, float):
        lu = float(lam_under)
        return lu * lu / (1 - lu) <= float(lam)
    return lam_under * lam_under <= lam * (1 - lam_under)


def format_profile(lam: ExponentEstimate, lam_hat: ExponentEstimate,
                   lam_under: ExponentEstimate, profile: EpsProfile) -> str:
    """Fixed-layout text report with 6-decimal rendering."""

    def f(v: float) -> str:
        return "inf" if math.isinf(v) else f"{v:.6f}"

    lines = ["quantity\testimate\twindow_lo\twindow_hi\tconverged"]
    for name, e in (("lambda", lam), ("lambda_hat", lam_hat), ("lambda_under", lam_under)):
        lines.append(f"{name}\t{f(e.value)}\t{f(e.window_lo)}\t{f(e.window_hi)}\t{str(e.converged).lower()}")
    lines.append(f"grid_depth\t{len(profile.entries)}")
    lines.append("eps\testimate\twindow_lo\twindow_hi\tsubseq_len")
    for en in profile.entries:
        e = en.estimate
        lines.append(f"{f(en.eps)}\t{f(e.value)}\t{f(e.window_lo)}\t{f(e.window_hi)}\t{en.subseq_len}")
    return "\n".join(lines) + "\n"
