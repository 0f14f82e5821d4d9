import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dioph.errors import AlphaTooLarge, FormatError, InsufficientData, OutOfDomain
from dioph.three_system import (
    PLFunction,
    ThreeSystem,
    change_points,
    eval_pl,
    kappa,
    kappa_alpha,
    kappa_star,
    load_system,
    perturb,
    psi_inf,
    psi_sup,
    save_system,
    simplest_between,
    system_from_json,
    system_to_json,
    validate,
)

from sawtooths import kappa_alpha_oracle, periodic_peaks, rising_sawtooth, sawtooth_from_peaks

F = Fraction


def doubling_sawtooth(n=12):
    # peaks at 2^k with heights 2^(k-1); rising into the first peak so it counts
    return sawtooth_from_peaks([(F(2**k), F(2 ** (k - 1))) for k in range(1, n + 1)], start=F(1))


def test_eval_pl_examples():
    f = PLFunction([(0, 0), (1, 1), (2, 1)], 0)
    assert f(F(3, 2)) == 1
    assert f(F(1, 2)) == F(1, 2)
    with pytest.raises(OutOfDomain):
        f(-1)


def test_equal_slopes_merge():
    f = PLFunction([(0, 0), (1, 1), (2, 2), (3, 2)], 0)
    assert f.vertices == ((0, 0), (2, 2), (3, 2))


def test_bad_slope_rejected():
    with pytest.raises(ValueError):
        PLFunction([(0, 0), (1, 2)], 0)


def test_change_points():
    f = doubling_sawtooth(3)
    assert change_points(f) == [2, 4, 8]
    assert change_points(PLFunction([(0, 0), (5, 5)], 1)) == []
    assert change_points(PLFunction([(0, 0), (1, 0), (5, 4)], 1)) == []


def test_sawtooth_psi():
    f = doubling_sawtooth()
    assert psi_sup(f) == F(1, 2)
    assert psi_inf(f) == F(1, 3)


def test_psi_needs_change_points():
    with pytest.raises(InsufficientData):
        psi_sup(PLFunction([(0, 0), (5, 5)], 1))


def test_constant_ratio_staircase():
    f = sawtooth_from_peaks([(F(5 * 3**k), F(2 * 3**k)) for k in range(8)])
    assert psi_sup(f) == F(2, 5)


@pytest.mark.parametrize("alpha", [F(2, 5), F(0)])
def test_sawtooth_kappa_alpha(alpha):
    rep = kappa_alpha(doubling_sawtooth(), alpha)
    assert rep.kappa_alpha == F(1, 3)
    assert all(r == 3 * q / 2 for q, r in zip(rep.peaks, rep.r))


def test_alpha_too_large():
    with pytest.raises(AlphaTooLarge):
        kappa_alpha(doubling_sawtooth(), F(3, 5))


def test_sawtooth_kappa_exact():
    res = kappa(doubling_sawtooth())
    assert res.value == F(1, 3) and res.exact
    assert all(v == F(1, 3) for v in res.grid)


def test_kappa_non_converged_reports_deepest():
    # each period holds peaks at ratios 1/4, 3/8, 7/16, ..., 1/2: raising alpha drops
    # the lower peaks and stretches r, so kappa_alpha keeps falling along the grid
    levels = [F(1, 2) * (1 - F(1, 2**m)) for m in range(1, 7)] + [F(1, 2)]
    peaks, q = [], F(2)
    for _ in range(6):
        for lv in levels:
            peaks.append((q, lv * q))
            q *= 2
    f = sawtooth_from_peaks(peaks)
    res = kappa(f)
    assert list(res.grid) == sorted(res.grid, reverse=True) and res.grid[0] > res.grid[-1]
    assert res.value == res.grid[-1]


def test_kappa_star_conjugate():
    g = doubling_sawtooth().negate()
    assert kappa_star(g, F(-2, 5)) == F(-1, 3)
    assert kappa_star(g) == F(-1, 3)
    with pytest.raises(ValueError):
        kappa_star(PLFunction([(0, -1), (1, 0)], 0))


def test_perturb_zero_is_identity():
    f = doubling_sawtooth()
    assert perturb(f, 0, 7) is f


@pytest.mark.parametrize("bound", [1, 2, 5])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_perturb_keeps_kappa(bound, seed):
    # the tail starts near 2^51, so a bounded shift is invisible at the snapping tolerance
    f = doubling_sawtooth(250)
    g = perturb(f, bound, seed)
    assert g.slope_set() <= {0, 1}
    assert kappa(g).value == F(1, 3)


@pytest.mark.parametrize("seed", [0, 3, 9])
def test_perturb_keeps_large_denominator_kappa(seed):
    # these fixtures have kappa denominators far above any small-fraction snap
    f = rising_sawtooth(periodic_peaks(random.Random(seed), 40))
    k = kappa(f).value
    assert k.denominator > 1000
    assert kappa(perturb(f, 5, seed)).value == k


@settings(max_examples=200, deadline=None)
@given(st.fractions(0, 10, max_denominator=60), st.fractions(0, 10, max_denominator=60))
def test_simplest_between(a, b):
    lo, hi = sorted((a, b))
    x = simplest_between(lo, hi)
    assert lo <= x <= hi
    for d in range(1, x.denominator):
        assert math.ceil(lo * d) > hi * d


def test_perturb_large_bound_still_valid():
    f = sawtooth_from_peaks([(F(k * 10), F(k * 5)) for k in range(1, 8)])
    g = perturb(f, 50, 3)
    assert g.slope_set() <= {0, 1}
    for (q, v) in g.vertices:
        assert abs(v - eval_pl(f, q)) <= 50 + (q - f.q0)


@st.composite
def random_sawtooth(draw):
    n = draw(st.integers(min_value=6, max_value=14))
    q, h = F(draw(st.integers(2, 20))), None
    peaks = []
    for _ in range(n):
        lo = F(0) if h is None else h
        frac = F(draw(st.integers(1, 99)), 100)
        cand = max(lo, frac * q)
        peaks.append((q, cand))
        h = cand
        step = F(draw(st.integers(150, 400)), 100)
        q = q * step
        # leave room for a rise of at most the gap
        q = max(q, peaks[-1][0] + 1)
    # keep each rise shorter than its gap so every peak is a true 1 -> 0 change
    fixed = [peaks[0]]
    for qb, hb in peaks[1:]:
        qa, ha = fixed[-1]
        hb = min(hb, ha + (qb - qa) * F(9, 10))
        fixed.append((qb, max(hb, ha)))
    return fixed


def _strict(peaks):
    return all(hb > ha for (_, ha), (_, hb) in zip(peaks, peaks[1:])) and peaks[0][1] > 0


@settings(max_examples=50, deadline=None)
@given(random_sawtooth(), st.integers(0, 7))
def test_kappa_alpha_matches_oracle(peaks, m):
    if not _strict(peaks):
        return
    f = rising_sawtooth(peaks)
    sup = psi_sup(f)
    alpha = sup * (1 - F(1, 2**m)) if m else F(0)
    try:
        rep = kappa_alpha(f, alpha)
    except InsufficientData:
        return
    assert rep.kappa_alpha == kappa_alpha_oracle(peaks, alpha)


@st.composite
def periodic_sawtooth(draw):
    """Geometric-period sawtooth: a random block of peaks repeated at scale Lambda."""
    p = draw(st.integers(1, 4))
    gaps = [F(draw(st.integers(41, 80)), 10) for _ in range(p)]
    rhos = [F(draw(st.integers(20, 80)), 100) for _ in range(p)]
    reps = draw(st.integers(6, 9))
    q, peaks = F(1), []
    for _ in range(reps):
        for g, rho in zip(gaps, rhos):
            peaks.append((q, rho * q))
            q *= g
    return peaks


@settings(max_examples=50, deadline=None)
@given(periodic_sawtooth())
def test_kappa_alpha_nonincreasing_and_below_psi_inf(peaks):
    f = rising_sawtooth(peaks)
    sup = psi_sup(f)
    vals = []
    for m in range(0, 8):
        a = sup * (1 - F(1, 2**m)) if m else F(0)
        try:
            vals.append(kappa_alpha(f, a).kappa_alpha)
        except InsufficientData:
            break
    assert vals == sorted(vals, reverse=True)
    assert vals[0] <= psi_inf(f)
    assert kappa(f).value <= psi_inf(f)


# -- 3-systems


def staircase():
    knots = [(0, (0, 0, 0)), (1, (0, 0, 1)), (2, (0, 1, 1)), (3, (1, 1, 1)), (4, (1, 1, 2))]
    return ThreeSystem.from_knots(knots, (0, 0, 1))


def test_valid_staircase():
    assert validate(staircase()) == (True, [])
    assert staircase()(F(5, 2)) == (F(1, 2), 1, 1)


def test_two_rising_components():
    knots = [(0, (0, 0, 0)), (1, (0, 1, 1))]
    ok, bad = validate(ThreeSystem.from_knots(knots, (0, 0, 1)))
    assert not ok and any(b.startswith("axiom 2") for b in bad)


def test_jump_without_meeting():
    knots = [(3, (0, 1, 2)), (4, (1, 1, 2)), (5, (1, 1, 3))]
    ok, bad = validate(ThreeSystem.from_knots(knots, (0, 0, 1)))
    assert not ok and any(b.startswith("axiom 3") for b in bad)


def test_order_and_sum_violations():
    knots = [(0, (1, 0, 0)), (1, (1, 0, 1))]
    ok, bad = validate(ThreeSystem.from_knots(knots, (0, 0, 1)))
    assert any(b.startswith("axiom 1 (order)") for b in bad)
    assert any(b.startswith("axiom 1 (sum)") for b in bad)


def test_mismatched_domains_rejected():
    a = PLFunction([(0, 0), (1, 0)], 0)
    b = PLFunction([(0, 0), (2, 0)], 0)
    with pytest.raises(ValueError):
        ThreeSystem((a, a, b))


def test_system_round_trip(tmp_path):
    knots = [(0, (0, 0, 0)), (1, (0, 0, 1)), (2, (0, 1, 1)), (3, (1, 1, 1))]
    s = ThreeSystem.from_knots(knots, (0, 0, 1), {"case": "demo", "nu": F(2, 3)})
    f = tmp_path / "s.json"
    save_system(s, f)
    t = load_system(f)
    assert t == s and t.manifest == {"case": "demo", "nu": "2/3"}
    assert system_to_json(t) == f.read_text()


def test_invalid_system_file():
    bad = ThreeSystem.from_knots([(0, (0, 0, 0)), (1, (0, 1, 1))], (0, 0, 1))
    with pytest.raises(FormatError):
        system_from_json(system_to_json(bad))
    with pytest.raises(FormatError):
        system_from_json("{not json")
    with pytest.raises(FormatError):
        system_from_json('{"format": "other"}')
