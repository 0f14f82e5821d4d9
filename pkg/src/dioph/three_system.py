"""Exact piecewise-linear functions, 3-systems and the kappa functional.

Values and abscissas are exact numbers: ``Fraction`` in general, and
``QuadSurd`` when a construction runs at an irrational parameter.
Asymptotic quantities are read off the tail of a finite horizon.
"""

from __future__ import annotations

import bisect
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .errors import AlphaTooLarge, FormatError, InsufficientData, OutOfDomain
from .numbers import QuadSurd, format_exact, parse_exact

SYSTEM_FORMAT = "dioph-3system/1"
TAIL_FRACTION = Fraction(1, 5)
GRID_DEPTH = 8
MAX_GRID_DEPTH = 64
SNAP_DENOMINATOR = 1000
SNAP_TOL = 1e-12


def _exact(v):
    if isinstance(v, (Fraction, QuadSurd)):
        return v.a if isinstance(v, QuadSurd) and v.b == 0 else v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return parse_exact(v)
    raise TypeError(f"not an exact number: {v!r}")


def _slope(q1, v1, q2, v2) -> int:
    dv, dq = v2 - v1, q2 - q1
    if dv == 0:
        return 0
    if dv == dq:
        return 1
    if dv == -dq:
        return -1
    raise ValueError(f"slope between q={q1} and q={q2} is not in {{-1, 0, 1}}")


@dataclass(frozen=True)
class PLFunction:
    """Continuous piecewise-linear function with slopes in {-1, 0, 1}.

    ``vertices`` run from the left endpoint q0 to the horizon; interior
    vertices with equal slopes on both sides are merged away.
    ``final_slope`` is the slope just after the horizon.
    """

    vertices: tuple
    final_slope: int

    def __init__(self, vertices: Iterable, final_slope: int):
        pts = [(_exact(q), _exact(v)) for q, v in vertices]
        if not pts:
            raise ValueError("a PL function needs at least one vertex")
        if final_slope not in (-1, 0, 1):
            raise ValueError("final slope must be -1, 0 or 1")
        merged = [pts[0]]
        for q, v in pts[1:]:
            pq, pv = merged[-1]
            if q == pq:
                if v != pv:
                    raise ValueError(f"jump at q={q}")
                continue
            if q < pq:
                raise ValueError("abscissas must increase")
            merged.append((q, v))
        slopes = [_slope(*a, *b) for a, b in zip(merged, merged[1:])]
        canon = [merged[0]]
        for j in range(1, len(merged) - 1):
            if slopes[j - 1] != slopes[j]:
                canon.append(merged[j])
        if len(merged) > 1:
            canon.append(merged[-1])
        object.__setattr__(self, "vertices", tuple(canon))
        object.__setattr__(self, "final_slope", final_slope)
        object.__setattr__(self, "_qs", [q for q, _ in canon])

    @property
    def q0(self):
        return self.vertices[0][0]

    @property
    def horizon(self):
        return self.vertices[-1][0]

    def slopes(self) -> list[int]:
        vs = self.vertices
        return [_slope(*a, *b) for a, b in zip(vs, vs[1:])]

    def slope_set(self) -> set[int]:
        return set(self.slopes()) | {self.final_slope}

    def __call__(self, q):
        return eval_pl(self, q)

    def negate(self) -> "PLFunction":
        return PLFunction([(q, -v) for q, v in self.vertices], -self.final_slope)


def eval_pl(f: PLFunction, q):
    """Exact value of ``f`` at ``q`` inside [q0, horizon]."""
    q = _exact(q)
    if q < f.q0 or q > f.horizon:
        raise OutOfDomain(f"q = {q} outside [{f.q0}, {f.horizon}]")
    j = bisect.bisect_right(f._qs, q) - 1
    qa, va = f.vertices[j]
    if q == qa:
        return va
    qb, vb = f.vertices[j + 1]
    return va + (q - qa) * (vb - va) / (qb - qa)


def change_points(f: PLFunction) -> list:
    """Abscissas where the slope switches from 1 to 0."""
    vs = f.vertices
    slopes = f.slopes() + [f.final_slope]
    return [vs[j][0] for j in range(1, len(vs)) if slopes[j - 1] == 1 and slopes[j] == 0]


def _tail_cut(cps: Sequence) -> int:
    return math.floor(len(cps) * TAIL_FRACTION)


def _need_changes(cps: Sequence, need: int = 3) -> None:
    if len(cps) < need:
        raise InsufficientData(f"{len(cps)} change points on the horizon, need {need}")


def psi_sup(f: PLFunction):
    """Largest peak ratio P(q_k)/q_k over the tail change points."""
    cps = change_points(f)
    _need_changes(cps)
    return max(eval_pl(f, q) / q for q in cps[_tail_cut(cps):])


def psi_inf(f: PLFunction):
    """Smallest ratio P(q)/q over vertices from the first tail change point on."""
    cps = change_points(f)
    _need_changes(cps)
    start = cps[_tail_cut(cps)]
    return min(v / q for q, v in f.vertices if q >= start)


@dataclass(frozen=True)
class KappaReport:
    alpha: object
    peaks: tuple
    r: tuple
    ratios: tuple
    tail_start: int
    kappa_alpha: object
    psi_sup: object
    psi_inf: object

    @property
    def tail_ratios(self) -> tuple:
        return self.ratios[self.tail_start:]


def kappa_alpha(f: PLFunction, alpha) -> KappaReport:
    """Tail minimum of P(q_i)/r_i over the peaks of relative height >= alpha."""
    alpha = _exact(alpha)
    cps = change_points(f)
    _need_changes(cps)
    sup = psi_sup(f)
    if alpha >= sup:
        raise AlphaTooLarge(f"alpha = {format_exact(alpha)} is not below psi_sup = {format_exact(sup)}")
    tail_q = cps[_tail_cut(cps)]
    peaks = [q for q in cps if eval_pl(f, q) / q >= alpha]
    if len(peaks) < 3:
        raise InsufficientData(f"only {len(peaks)} peaks reach alpha = {format_exact(alpha)}")
    vals = [eval_pl(f, q) for q in peaks]
    r = [peaks[i + 1] - vals[i + 1] + vals[i] for i in range(len(peaks) - 1)]
    ratios = [vals[i] / r[i] for i in range(len(r))]
    ts = next((i for i, q in enumerate(peaks[:-1]) if q >= tail_q), None)
    if ts is None:
        raise InsufficientData("no surviving peak pair in the tail")
    return KappaReport(alpha, tuple(peaks), tuple(r), tuple(ratios), ts,
                       min(ratios[ts:]), sup, psi_inf(f))


def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Fraction with the smallest denominator in [lo, hi]."""
    fl = math.floor(lo)
    if fl == lo or fl + 1 <= hi:
        return Fraction(fl if fl == lo else fl + 1)
    # lo, hi share the integer part; recurse on the reciprocals of the fractional parts
    return fl + 1 / simplest_between(1 / (hi - fl), 1 / (lo - fl))


def periodic_min(seq: Sequence, tol=0):
    """Minimum over one period and the largest mismatch, if the last three periods
    repeat to within ``tol`` (relative); else None."""
    n = len(seq)
    for p in range(1, n // 3 + 1):
        tail = seq[n - 3 * p:]
        gaps = [abs(tail[i] - tail[i + p]) for i in range(2 * p)]
        if all(g <= tol * abs(tail[i]) for i, g in enumerate(gaps)):
            return min(tail[-p:]), max(gaps)
    return None


@dataclass(frozen=True)
class KappaResult:
    value: object
    alpha: object
    depth: int
    exact: bool
    converged: bool
    grid: tuple = field(default=())


def kappa_grid(f: PLFunction, depth: int = GRID_DEPTH, max_depth: int | None = None) -> list[tuple[int, KappaReport]]:
    """kappa_alpha at alpha_m = psi_sup (1 - 2^-m) for m = 1..depth.

    With ``max_depth`` the grid keeps deepening past ``depth`` until two
    consecutive values agree, fewer than three peaks survive, or m hits the cap.
    """
    sup = psi_sup(f)
    out = []
    m = 0
    while True:
        m += 1
        if m > depth:
            if max_depth is None or m > max_depth or not out:
                break
            if len(out) >= 2 and out[-1][1].kappa_alpha == out[-2][1].kappa_alpha:
                break
        a = sup * (1 - Fraction(1, 2**m))
        try:
            out.append((m, kappa_alpha(f, a)))
        except InsufficientData:
            if m > depth:
                break
    return out


def kappa(f: PLFunction, depth: int = GRID_DEPTH, max_depth: int = MAX_GRID_DEPTH) -> KappaResult:
    """kappa_alpha read at the deepest computable alpha on the grid.

    The grid runs past ``depth`` while its last two values still differ, since
    kappa is the limit as alpha approaches psi_sup. An exactly periodic tail of ratios makes the value exact. A tail that is
    periodic up to a drift below SNAP_TOL is read as the simplest fraction
    within a few drifts of its period minimum, since o(q) height changes only
    move the ratios by that much. Failing both, a rational tail minimum within
    SNAP_TOL of a small-denominator fraction is snapped to it, and anything
    else is returned as the raw tail minimum.
    """
    grid = kappa_grid(f, depth, max_depth)
    if not grid:
        raise InsufficientData("no alpha on the grid keeps three peaks")
    m, rep = grid[-1]
    values = tuple(g.kappa_alpha for _, g in grid)
    converged = all(v == values[-1] for v in values[-2:])
    tail = rep.tail_ratios
    per = periodic_min(tail)
    if per is not None:
        return KappaResult(per[0], rep.alpha, m, True, converged, values)
    near = periodic_min(tail, SNAP_TOL) if all(isinstance(t, Fraction) for t in tail) else None
    if near is not None:
        v, drift = near
        return KappaResult(simplest_between(v - 4 * drift, v + 4 * drift), rep.alpha, m, True, converged, values)
    v = rep.kappa_alpha
    if isinstance(v, Fraction):
        snap = v.limit_denominator(SNAP_DENOMINATOR)
        if abs(float(v - snap)) <= SNAP_TOL:
            return KappaResult(snap, rep.alpha, m, True, converged, values)
    return KappaResult(v, rep.alpha, m, False, converged, values)


def _check_dual(f: PLFunction) -> None:
    if not f.slope_set() <= {0, -1}:
        raise ValueError("dual function must have slopes in {0, -1}")
    if any(v > 0 for _, v in f.vertices):
        raise ValueError("dual function must be non-positive")


def kappa_star_alpha(f_star: PLFunction, alpha):
    """kappa*_alpha(f*) = -kappa_{-alpha}(-f*)."""
    _check_dual(f_star)
    return -kappa_alpha(f_star.negate(), -_exact(alpha)).kappa_alpha


def kappa_star(f_star: PLFunction, alpha=None):
    """Dual kappa; with ``alpha`` given, the filtered value at that level."""
    if alpha is not None:
        return kappa_star_alpha(f_star, alpha)
    _check_dual(f_star)
    return -kappa(f_star.negate()).value


def perturb(f: PLFunction, bound, seed: int) -> PLFunction:
    """Move each peak height by at most ``bound``, keeping slopes in {0, 1}.

    Between consecutive anchors (q0, change points, horizon) a {0,1}
    function is flat then rising, so the perturbed function is rebuilt in
    that shape with clamped heights.
    """
    bound = Fraction(bound)
    if bound < 0:
        raise ValueError("bound must be non-negative")
    if not f.slope_set() <= {0, 1}:
        raise ValueError("perturb expects slopes in {0, 1}")
    if bound == 0:
        return f
    rng = random.Random(seed)
    scale = 1000
    k = int(bound * scale)
    anchors = [f.q0] + [q for q in change_points(f)] + ([f.horizon] if f.horizon not in change_points(f) else [])
    anchors = sorted(set(anchors))
    new = [(anchors[0], eval_pl(f, anchors[0]))]
    for a, b in zip(anchors, anchors[1:]):
        target = eval_pl(f, b) + Fraction(rng.randint(-k, k), scale)
        va = new[-1][1]
        vb = min(max(target, va), va + (b - a))
        new.append((b - (vb - va), va))
        new.append((b, vb))
    return PLFunction(new, f.final_slope)


# ---------------------------------------------------------------------------
# 3-systems


@dataclass(frozen=True)
class ThreeSystem:
    components: tuple
    manifest: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.components) != 3:
            raise ValueError("a 3-system has three components")
        q0s = {c.q0 for c in self.components}
        hs = {c.horizon for c in self.components}
        if len(q0s) != 1 or len(hs) != 1:
            raise ValueError("components must share q0 and horizon")

    @property
    def q0(self):
        return self.components[0].q0

    @property
    def horizon(self):
        return self.components[0].horizon

    @classmethod
    def from_knots(cls, knots: Sequence, final_slopes: Sequence[int], manifest: dict | None = None):
        """Build from knots [(q, (p1, p2, p3)), ...] joined linearly."""
        comps = tuple(
            PLFunction([(q, p[j]) for q, p in knots], final_slopes[j]) for j in range(3)
        )
        return cls(comps, manifest or {})

    def breakpoints(self) -> list:
        qs = set()
        for c in self.components:
            qs.update(q for q, _ in c.vertices)
        return sorted(qs)

    def __call__(self, q) -> tuple:
        return tuple(eval_pl(c, q) for c in self.components)


def validate(system: ThreeSystem) -> tuple[bool, list[str]]:
    """Check the three axioms exactly; never raises."""
    bad: list[str] = []
    try:
        qs = system.breakpoints()
        vals = [system(q) for q in qs]
    except Exception as e:  # malformed input is a violation, not a crash
        return False, [f"structure: {e}"]
    for q, p in zip(qs, vals):
        if not (0 <= p[0] <= p[1] <= p[2]):
            bad.append(f"axiom 1 (order) at q={format_exact(q)}: {[format_exact(v) for v in p]}")
        if p[0] + p[1] + p[2] != q:
            bad.append(f"axiom 1 (sum) at q={format_exact(q)}: sum {format_exact(sum(p))}")
    slopes = []
    for (qa, pa), (qb, pb) in zip(zip(qs, vals), zip(qs[1:], vals[1:])):
        s = []
        for j in range(3):
            d, dq = pb[j] - pa[j], qb - qa
            s.append(0 if d == 0 else 1 if d == dq else None)
        slopes.append(s)
    slopes.append([c.final_slope for c in system.components])
    rising = []
    for k, s in enumerate(slopes):
        ones = [j for j in range(3) if s[j] == 1]
        zeros = [j for j in range(3) if s[j] == 0]
        where = f"({format_exact(qs[k])}, {format_exact(qs[k + 1])})" if k + 1 < len(qs) else f"after {format_exact(qs[-1])}"
        if len(ones) != 1 or len(zeros) != 2:
            bad.append(f"axiom 2 on {where}: slopes {s}")
            rising.append(None)
        else:
            rising.append(ones[0])
    for k in range(1, len(rising)):
        r, s = rising[k - 1], rising[k]
        if r is None or s is None or r >= s:
            continue
        p = vals[k]
        if any(p[j] != p[r] for j in range(r, s + 1)):
            bad.append(
                f"axiom 3 at q={format_exact(qs[k])}: slope passes from P{r + 1} to P{s + 1} "
                f"with values {[format_exact(v) for v in p[r:s + 1]]}"
            )
    return not bad, bad


# ---------------------------------------------------------------------------
# persistence


def _jsonable(v):
    if isinstance(v, (Fraction, QuadSurd)):
        return format_exact(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def system_to_json(system: ThreeSystem) -> str:
    doc = {
        "format": SYSTEM_FORMAT,
        "q0": format_exact(system.q0),
        "horizon": format_exact(system.horizon),
        "components": [
            {"vertices": [[format_exact(q), format_exact(v)] for q, v in c.vertices],
             "final_slope": c.final_slope}
            for c in system.components
        ],
    }
    if system.manifest:
        doc["manifest"] = _jsonable(system.manifest)
    return json.dumps(doc, indent=1) + "\n"


def save_system(system: ThreeSystem, path) -> None:
    Path(path).write_text(system_to_json(system))


def system_from_json(text: str) -> ThreeSystem:
    try:
        doc = json.loads(text)
        if doc.get("format") != SYSTEM_FORMAT:
            raise FormatError(f"unknown format {doc.get('format')!r}")
        comps = tuple(
            PLFunction([(parse_exact(q), parse_exact(v)) for q, v in c["vertices"]], int(c["final_slope"]))
            for c in doc["components"]
        )
        system = ThreeSystem(comps, doc.get("manifest", {}))
        if system.q0 != parse_exact(doc["q0"]) or system.horizon != parse_exact(doc["horizon"]):
            raise FormatError("q0/horizon disagree with the vertex lists")
    except FormatError:
        raise
    except (ValueError, KeyError, TypeError, AttributeError) as e:
        raise FormatError(f"malformed system file: {e}") from e
    ok, bad = validate(system)
    if not ok:
        raise FormatError("system violates the axioms: " + "; ".join(bad[:3]))
    return system


def load_system(path) -> ThreeSystem:
    return system_from_json(Path(path).read_text())
