"""Minimal points (best simultaneous approximations) of a pair of reals.

Enumeration has two stages. A vectorised float pass over x0 produces a
superset of the record candidates using rigorous float error bounds, then
an exact sequential pass over the candidates, done in rational interval
arithmetic, decides which of them are records. Because the float pass only
discards points that provably cannot be records, the result does not
depend on how the x0 range is chunked.
"""

from __future__ import annotations

import enum
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .errors import DegeneratePair, DomainError, FormatError, PrecisionBudgetExceeded
from .numbers import (
    MAX_RETRIES,
    QuadSurd,
    RationalEnclosure,
    RealExpr,
    enclose,
    nearest_int,
    parse_real,
)

FILE_FORMAT = "dioph-minpoints/1"
DEFAULT_PRECISION = Fraction(1, 10**15)
CHUNK = 1 << 16
START_BITS = 96
_U = 2.0**-52

def norm_window(xi: float, eta: float) -> int:
    """Offsets around the nearest integers that can still hold a NORM record.

    The first record is (1, 0, 0) with error R = hypot(xi, eta); an offset k
    forces an error of at least k - 1/2, so k <= R + 1/2 suffices.
    """
    return max(1, math.floor(math.hypot(xi, eta) + 0.5 + 1e-9))


class Gauge(str, enum.Enum):
    HEIGHT = "HEIGHT"
    NORM = "NORM"


@dataclass(frozen=True)
class PairTarget:
    xi: RealExpr
    eta: RealExpr

    def __post_init__(self):
        for name, v in (("xi", self.xi), ("eta", self.eta)):
            if v.exact() == 0:
                raise DomainError(f"{name} must be non-zero")

    @classmethod
    def parse(cls, xi: str, eta: str) -> "PairTarget":
        return cls(parse_real(xi), parse_real(eta))


@dataclass(frozen=True)
class MinimalPoint:
    index: int
    x: tuple[int, int, int]
    log_X: float
    log_Delta: float


@dataclass(frozen=True)
class MinimalPointSequence:
    pair: PairTarget
    gauge: Gauge
    points: tuple[MinimalPoint, ...]
    x0_max: int
    precision: Fraction = DEFAULT_PRECISION

    def __len__(self) -> int:
        return len(self.points)

    @property
    def log_X(self) -> list[float]:
        return [p.log_X for p in self.points]

    @property
    def log_Delta(self) -> list[float]:
        return [p.log_Delta for p in self.points]


def _round15(v) -> float:
    return float(mpmath.nstr(v, 15, strip_zeros=False))


def _threads() -> int:
    env = os.environ.get("DIOPH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# exact interval arithmetic on squared errors


def _isq(lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    if lo >= 0:
        return lo * lo, hi * hi
    if hi <= 0:
        return hi * hi, lo * lo
    return Fraction(0), max(lo * lo, hi * hi)


def _imul(a: tuple, b: tuple) -> tuple[Fraction, Fraction]:
    ps = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    return min(ps), max(ps)


class _Field:
    """Enclosures of xi and eta at successively finer precisions."""

    def __init__(self, pair: PairTarget):
        self.pair = pair
        self._cache: dict[int, tuple] = {}
        xe, ee = pair.xi.exact(), pair.eta.exact()
        self.exact = None
        if xe is not None and ee is not None:
            cs = {v.c for v in (xe, ee) if isinstance(v, QuadSurd)}
            if len(cs) <= 1:
                self.exact = (xe, ee)

    def iv(self, bits: int):
        if bits not in self._cache:
            eps = Fraction(1, 1 << bits)
            a, b = enclose(self.pair.xi, eps), enclose(self.pair.eta, eps)
            self._cache[bits] = ((a.lo, a.hi), (b.lo, b.hi))
        return self._cache[bits]


def _sq_delta(x, gauge: Gauge, xi, eta) -> tuple[Fraction, Fraction]:
    x0, x1, x2 = x
    a = (x0 * xi[0] - x1, x0 * xi[1] - x1)
    b = (x0 * eta[0] - x2, x0 * eta[1] - x2)
    a2, b2 = _isq(*a), _isq(*b)
    if gauge is Gauge.HEIGHT:
        return max(a2[0], b2[0]), max(a2[1], b2[1])
    # third wedge component x1*eta - x2*xi equals b*xi - a*eta
    bx, ay = _imul(b, xi), _imul(a, eta)
    c2 = _isq(bx[0] - ay[1], bx[1] - ay[0])
    return a2[0] + b2[0] + c2[0], a2[1] + b2[1] + c2[1]


def _sq_delta_exact(x, gauge: Gauge, xi, eta):
    x0, x1, x2 = x
    a, b = x0 * xi - x1, x0 * eta - x2
    if gauge is Gauge.HEIGHT:
        return max(a * a, b * b)
    c = b * xi - a * eta
    return a * a + b * b + c * c


class _Cand:
    __slots__ = ("key", "x", "bits", "iv")

    def __init__(self, key: int, x: tuple[int, int, int]):
        self.key, self.x, self.bits, self.iv = key, x, 0, None


class _Exact:
    """Certified comparisons of squared errors with precision doubling."""

    def __init__(self, field_: _Field, gauge: Gauge):
        self.f, self.gauge = field_, gauge

    def refine(self, c: _Cand, bits: int) -> None:
        if c.bits < bits:
            xi, eta = self.f.iv(bits)
            c.iv, c.bits = _sq_delta(c.x, self.gauge, xi, eta), bits

    def less(self, c: _Cand, d: _Cand) -> bool:
        """Is D(c) < D(d)? Exact ties count as not less."""
        bits = max(START_BITS, c.bits, d.bits)
        for _ in range(MAX_RETRIES):
            self.refine(c, bits)
            self.refine(d, bits)
            if c.iv[1] < d.iv[0]:
                return True
            if c.iv[0] >= d.iv[1]:
                return False
            bits *= 2
        if self.f.exact is not None:
            xi, eta = self.f.exact
            return _sq_delta_exact(c.x, self.gauge, xi, eta) < _sq_delta_exact(
                d.x, self.gauge, xi, eta
            )
        raise PrecisionBudgetExceeded(f"cannot order errors of {c.x} and {d.x}")

    def log_delta(self, c: _Cand, precision: Fraction):
        bits = max(START_BITS, c.bits)
        with mpmath.workdps(50):
            for _ in range(MAX_RETRIES):
                self.refine(c, bits)
                lo, hi = c.iv
                if lo > 0:
                    width = mpmath.log(mpmath.mpf(hi.numerator) * lo.denominator
                                       / (mpmath.mpf(lo.numerator) * hi.denominator)) / 2
                    if width <= mpmath.mpf(precision.numerator) / precision.denominator:
                        mid = (lo + hi) / 2
                        return mpmath.log(mpmath.mpf(mid.numerator) / mid.denominator) / 2
                bits *= 2
        raise PrecisionBudgetExceeded(f"cannot certify log error of {c.x}")

    def nearest(self, x0: int, which: int) -> int:
        bits = START_BITS
        for _ in range(MAX_RETRIES):
            lo, hi = self.f.iv(bits)[which]
            n, certain = nearest_int_enc(x0 * lo, x0 * hi)
            if certain or lo == hi:
                return n
            bits *= 2
        raise PrecisionBudgetExceeded(f"nearest integer to x0={x0} multiple undecided")


def nearest_int_enc(lo: Fraction, hi: Fraction) -> tuple[int, bool]:
    return nearest_int(RationalEnclosure(lo, hi))


# ---------------------------------------------------------------------------
# float screening


@dataclass
class _Screen:
    gauge: Gauge
    xi: float
    eta: float
    dxi: float
    deta: float
    n2_max: int

    def chunk(self, x0: np.ndarray):
        """Return (keys, x0, x1, x2, dlo, dhi) arrays for one x0 block."""
        p, q = x0 * self.xi, x0 * self.eta
        n1, n2 = np.rint(p), np.rint(q)
        a, b = p - n1, q - n2
        ea = 2 * (x0 * self.dxi + np.abs(p) * _U) + 1e-300
        eb = 2 * (x0 * self.deta + np.abs(q) * _U) + 1e-300
        if self.gauge is Gauge.HEIGHT:
            d = np.maximum(np.abs(a), np.abs(b))
            err = np.maximum(ea, eb) + 4 * _U * d
            k = x0.astype(np.int64)
            return k, k, n1.astype(np.int64), n2.astype(np.int64), d - err, d + err
        out = []
        ax, ay = abs(self.xi), abs(self.eta)
        w = norm_window(self.xi, self.eta)
        offsets = range(-w, w + 1)
        for d1 in offsets:
            for d2 in offsets:
                aa, bb = a - d1, b - d2
                c = bb * self.xi - aa * self.eta
                d = np.sqrt(aa * aa + bb * bb + c * c)
                ec = 2 * (eb * ax + ea * ay + np.abs(bb) * self.dxi + np.abs(aa) * self.deta)
                err = 2 * (ea + eb + ec) + 16 * _U * (d + np.abs(c))
                x1 = n1.astype(np.int64) + d1
                x2 = n2.astype(np.int64) + d2
                xx = x0.astype(np.int64)
                key = xx * xx + x1 * x1 + x2 * x2
                out.append((key, xx, x1, x2, d - err, d + err))
        cols = [np.concatenate([o[i] for o in out]) for i in range(6)]
        keep = cols[0] <= self.n2_max
        return tuple(c[keep] for c in cols)


def _float_with_err(x: RealExpr) -> tuple[float, float]:
    enc = enclose(x, Fraction(1, 1 << 80))
    mid = (enc.lo + enc.hi) / 2
    f = float(mid)
    return f, float(abs(Fraction(f) - mid) + enc.width) * 2 + 1e-300


def _screen(pair: PairTarget, gauge: Gauge, x0_max: int) -> list[tuple[int, tuple]]:
    xi, dxi = _float_with_err(pair.xi)
    eta, deta = _float_with_err(pair.eta)
    if x0_max * (2 + abs(xi) + abs(eta)) > 1.5e9:
        raise DomainError("x0_max too large for 64-bit screening")
    sc = _Screen(gauge, xi, eta, dxi, deta, x0_max * x0_max)
    starts = list(range(1, x0_max + 1, CHUNK))
    blocks = [np.arange(s, min(s + CHUNK, x0_max + 1), dtype=np.float64) for s in starts]
    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        chunks = list(ex.map(sc.chunk, blocks))

    # sequential deterministic merge; base covers all processed keys below `floor`
    base, base_cut = math.inf, None
    tail = [np.empty(0, np.int64), np.empty(0)]
    found: list[tuple[int, tuple]] = []
    for key, x0, x1, x2, dlo, dhi in chunks:
        if key.size == 0:
            continue
        floor = key.min()
        old = tail[0] < floor
        if old.any():
            base = min(base, float(tail[1][old].min()))
            base_cut = floor if base_cut is None else max(base_cut, floor)
        tkey, tdhi = tail[0][~old], tail[1][~old]
        allk = np.concatenate([tkey, key])
        alld = np.concatenate([tdhi, dhi])
        order = np.argsort(allk, kind="stable")
        sk, sd = allk[order], alld[order]
        pm = np.minimum.accumulate(sd)
        first = np.searchsorted(sk, key, side="left")
        prior = np.where(first > 0, pm[np.maximum(first - 1, 0)], np.inf)
        if base_cut is not None:
            # base only holds keys below base_cut, so it may bound only keys >= base_cut
            prior = np.where(key >= base_cut, np.minimum(prior, base), prior)
        hit = np.nonzero(dlo < prior)[0]
        for j in hit:
            found.append((int(key[j]), (int(x0[j]), int(x1[j]), int(x2[j]))))
        tail = [allk, alld]
    found.sort()
    return found


# ---------------------------------------------------------------------------
# public API


def _check_degenerate(pair: PairTarget, x0_max: int) -> None:
    for name, v in (("xi", pair.xi), ("eta", pair.eta)):
        e = v.exact()
        if isinstance(e, Fraction) and e.denominator <= x0_max:
            raise DegeneratePair(
                f"{name} = {e} is rational; x0 = {e.denominator} gives a zero error component"
            )


def enumerate_points(
    pair: PairTarget,
    x0_max: int,
    gauge: Gauge = Gauge.HEIGHT,
    precision: Fraction = DEFAULT_PRECISION,
) -> MinimalPointSequence:
    """All minimal points with N(x) <= x0_max and x0 >= 1, in increasing order."""
    gauge = Gauge(gauge)
    precision = Fraction(precision)
    if x0_max < 0:
        raise DomainError("x0_max must be non-negative")
    if precision <= 0:
        raise DomainError("precision must be positive")
    if x0_max == 0:
        return MinimalPointSequence(pair, gauge, (), 0, precision)
    _check_degenerate(pair, x0_max)

    fld = _Field(pair)
    ex = _Exact(fld, gauge)
    cands = _screen(pair, gauge, x0_max)
    records: list[_Cand] = []
    best: _Cand | None = None
    i = 0
    while i < len(cands):
        key = cands[i][0]
        group = []
        while i < len(cands) and cands[i][0] == key:
            group.append(_Cand(key, cands[i][1]))
            i += 1
        if gauge is Gauge.HEIGHT:
            # the float pass may round a near-half multiple the wrong way
            c = group[0]
            x0 = c.x[0]
            c.x = (x0, ex.nearest(x0, 0), ex.nearest(x0, 1))
        gmin = group[0]
        for c in group[1:]:
            if ex.less(c, gmin):
                gmin = c
        if best is None or ex.less(gmin, best):
            records.append(gmin)
            best = gmin

    pts = []
    with mpmath.workdps(40):
        for idx, c in enumerate(records):
            if gauge is Gauge.HEIGHT:
                lx = mpmath.log(c.x[0])
            else:
                lx = mpmath.log(c.key) / 2
            ld = ex.log_delta(c, precision)
            pts.append(MinimalPoint(idx, c.x, _round15(lx), _round15(ld)))
    return MinimalPointSequence(pair, gauge, tuple(pts), x0_max, precision)


# independent brute force --------------------------------------------------


def _mp_delta(x, gauge: Gauge, xi, eta):
    x0, x1, x2 = x
    a, b = x0 * xi - x1, x0 * eta - x2
    if gauge is Gauge.HEIGHT:
        return max(abs(a), abs(b))
    return mpmath.sqrt(a * a + b * b + (x1 * eta - x2 * xi) ** 2)


def brute_records(pair: PairTarget, gauge: Gauge, check: int, window: int | None = None):
    """Naive record scan over x0 <= check with a +-window around nearest integers."""
    if window is None:
        window = norm_window(float(pair.xi), float(pair.eta)) + 1
    with mpmath.workdps(60):
        xi, eta = mpmath.mpf(float(pair.xi)), mpmath.mpf(float(pair.eta))
        e1 = enclose(pair.xi, Fraction(1, 1 << 190))
        e2 = enclose(pair.eta, Fraction(1, 1 << 190))
        xi = mpmath.mpf(e1.lo.numerator) / e1.lo.denominator
        eta = mpmath.mpf(e2.lo.numerator) / e2.lo.denominator
        pts = []
        for x0 in range(1, check + 1):
            c1, c2 = int(mpmath.nint(x0 * xi)), int(mpmath.nint(x0 * eta))
            for x1 in range(c1 - window, c1 + window + 1):
                for x2 in range(c2 - window, c2 + window + 1):
                    x = (x0, x1, x2)
                    n = x0 if gauge is Gauge.HEIGHT else x0 * x0 + x1 * x1 + x2 * x2
                    if gauge is Gauge.NORM and n > check * check:
                        continue
                    pts.append((n, x, _mp_delta(x, gauge, xi, eta)))
        pts.sort(key=lambda t: (t[0], t[1]))
        out, best, j = [], None, 0
        while j < len(pts):
            n = pts[j][0]
            gbest = None
            while j < len(pts) and pts[j][0] == n:
                if gbest is None or pts[j][2] < gbest[2]:
                    gbest = pts[j]
                j += 1
            if best is None or gbest[2] < best:
                out.append(gbest)
                best = gbest[2]
    return out


def verify_minimality(seq: MinimalPointSequence, check_x0_max: int) -> bool:
    """Re-derive the records up to ``check_x0_max`` independently and compare."""
    if check_x0_max > seq.x0_max:
        raise DomainError("check range exceeds enumeration range")
    pts = seq.points
    for p, q in zip(pts, pts[1:]):
        if not (q.log_X > p.log_X and q.log_Delta < p.log_Delta):
            return False
    if not pts or check_x0_max < 1:
        return True
    brute = brute_records(seq.pair, seq.gauge, check_x0_max)
    if seq.gauge is Gauge.HEIGHT:
        within = [p for p in pts if p.x[0] <= check_x0_max]
    else:
        within = [p for p in pts if sum(v * v for v in p.x) <= check_x0_max**2]
    if [p.x for p in within] != [b[1] for b in brute]:
        return False
    with mpmath.workdps(30):
        for p, b in zip(within, brute):
            if abs(float(mpmath.log(b[2])) - p.log_Delta) > 1e-9:
                return False
    return True


# persistence ---------------------------------------------------------------


def save_points(seq: MinimalPointSequence, path) -> None:
    header = {
        "format": FILE_FORMAT,
        "xi": seq.pair.xi.to_text(),
        "eta": seq.pair.eta.to_text(),
        "gauge": seq.gauge.value,
        "x0_max": seq.x0_max,
        "precision": str(seq.precision),
    }
    lines = [json.dumps(header)]
    for p in seq.points:
        lines.append(json.dumps({"i": p.index, "x": list(p.x), "log_x": p.log_X, "log_delta": p.log_Delta}))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_points(lines: Iterable[str]) -> list[MinimalPoint]:
    pts = []
    for n, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            x = tuple(int(v) for v in rec["x"])
            p = MinimalPoint(int(rec["i"]), x, float(rec["log_x"]), float(rec["log_delta"]))
        except (ValueError, KeyError, TypeError) as e:
            raise FormatError(f"bad record on line {n + 2}: {e}") from e
        if len(x) != 3 or x == (0, 0, 0):
            raise FormatError(f"bad point on line {n + 2}")
        pts.append(p)
    return pts


def load_points(path) -> MinimalPointSequence:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise FormatError("missing header line")
    try:
        h = json.loads(lines[0])
        if h.get("format") != FILE_FORMAT:
            raise FormatError(f"unknown format {h.get('format')!r}")
        pair = PairTarget(parse_real(h["xi"]), parse_real(h["eta"]))
        gauge = Gauge(h["gauge"])
        x0_max = int(h["x0_max"])
        precision = Fraction(h["precision"])
    except FormatError:
        raise
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"bad header: {e}") from e
    pts = _parse_points(lines[1:])
    for k, p in enumerate(pts):
        if p.index != k:
            raise FormatError(f"record {k} has index {p.index}")
    for p, q in zip(pts, pts[1:]):
        if not q.log_X > p.log_X:
            raise FormatError(f"log_x not increasing at index {q.index}")
        if not q.log_Delta < p.log_Delta:
            raise FormatError(f"log_delta not decreasing at index {q.index}")
    return MinimalPointSequence(pair, gauge, tuple(pts), x0_max, precision)


def synthetic_sequence(log_X: Sequence[float], log_Delta: Sequence[float]) -> MinimalPointSequence:
    """Wrap raw (log X, log Delta) data as a sequence for the estimators."""
    pair = PairTarget(RealExpr.sqrt(2), RealExpr.sqrt(3))
    pts = tuple(
        MinimalPoint(i, (i + 1, 0, 0), float(a), float(b)) for i, (a, b) in enumerate(zip(log_X, log_Delta))
    )
    return MinimalPointSequence(pair, Gauge.HEIGHT, pts, 0)
