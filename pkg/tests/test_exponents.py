import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dioph.errors import InsufficientData, RegimeMismatch
from dioph.exponents import (
    beta0_est,
    eps_indices,
    format_profile,
    lambda_est,
    lambda_hat_est,
    lambda_hat_eps_est,
    lambda_under_est,
    spectrum_check,
    tail_start,
)
from dioph.minimal_points import Gauge, PairTarget, enumerate_points, synthetic_sequence
from dioph.numbers import QuadSurd

GOLD_M1 = QuadSurd(Fraction(-1, 2), Fraction(1, 2), 5)  # gamma - 1


def geometric(n=20):
    return synthetic_sequence([2.0**i for i in range(1, n + 1)], [-(2.0**i) for i in range(1, n + 1)])


def linear(n=20):
    return synthetic_sequence([float(i) for i in range(1, n + 1)], [-i / 2 for i in range(1, n + 1)])


def test_tail_policy():
    assert tail_start(8) == 4 and tail_start(16) == 4 and tail_start(50) == 10


def test_lambda_geometric():
    e = lambda_est(geometric())
    assert e.value == 1.0 and e.window_lo == e.window_hi == 1.0 and e.converged


def test_lambda_constant_ratio():
    assert lambda_est(linear()).value == 0.5


def test_lambda_hat_geometric():
    assert lambda_hat_est(geometric()).value == 0.5


def test_lambda_hat_linear_below_half():
    e = lambda_hat_est(linear())
    # (i/2)/(i+1) over the tail, smallest at the first tail index
    assert e.value == pytest.approx(2.5 / 6)
    assert e.window_hi < 0.5


@pytest.mark.parametrize("fn", [lambda_est, lambda_hat_est])
def test_seven_points_insufficient(fn):
    with pytest.raises(InsufficientData):
        fn(geometric(7))


def test_eps_filter_all_pass():
    est, n = lambda_hat_eps_est(geometric(), 0.9)
    assert est.value == 0.5 and n == 20


def test_eps_zero_is_lambda_hat():
    assert lambda_hat_eps_est(geometric(), 0)[0] == lambda_hat_est(geometric())
    assert lambda_hat_eps_est(linear(), 0)[0] == lambda_hat_est(linear())


def test_eps_too_large():
    with pytest.raises(InsufficientData):
        lambda_hat_eps_est(geometric(), 1.5)


def test_lambda_under_geometric():
    est, prof = lambda_under_est(geometric())
    assert est.value == 0.5
    assert len(prof.entries) == 8
    assert all(e.estimate.value == 0.5 for e in prof.entries)
    assert [e.eps for e in prof.entries] == [1.0 * (1 - 2.0**-j) for j in range(1, 9)]


def test_lambda_under_needs_sixteen():
    with pytest.raises(InsufficientData):
        lambda_under_est(geometric(15))


def test_single_entry_grid():
    seq = geometric()
    est, prof = lambda_under_est(seq, 1)
    assert len(prof.entries) == 1
    assert est == lambda_hat_eps_est(seq, prof.entries[0].eps)[0]


def test_beta0():
    # lambda = 1 and every hat ratio 1/2
    assert beta0_est(geometric()).value == pytest.approx(2.0)


def test_beta0_golden():
    g = (1 + math.sqrt(5)) / 2
    lx = [g**i for i in range(1, 30)]
    # lambda ratios are 1 and hat ratios X_i / X_{i+1} = 1/g
    seq = synthetic_sequence(lx, [-v for v in lx])
    assert beta0_est(seq).value == pytest.approx(g)


def test_beta0_regime_guard():
    seq = synthetic_sequence([float(i) for i in range(1, 21)], [-0.6 * i for i in range(1, 21)])
    with pytest.raises(RegimeMismatch):
        beta0_est(seq)


@pytest.mark.parametrize("lam, lu, ok", [
    (Fraction(1), GOLD_M1, True),
    (Fraction(1, 2), Fraction(1, 2), True),
    (0.6, 0.9, False),
    (Fraction(1), Fraction(1, 2), True),
    (Fraction(1), Fraction(9, 10), False),
    (math.inf, Fraction(1), True),
    (Fraction(5), Fraction(1), False),
    (Fraction(1, 2), Fraction(1, 3), False),
])
def test_spectrum_check(lam, lu, ok):
    assert spectrum_check(lam, lu) is ok


def test_golden_boundary_is_equality():
    x = GOLD_M1
    assert x * x / (1 - x) == 1


@st.composite
def sequences(draw):
    n = draw(st.integers(min_value=16, max_value=60))
    steps = draw(st.lists(st.floats(min_value=0.05, max_value=5), min_size=n, max_size=n))
    ratios = draw(st.lists(st.floats(min_value=0.05, max_value=3), min_size=n, max_size=n))
    lx, ld, x = [], [], 0.5
    for s, r in zip(steps, ratios):
        x += s
        d = -r * x
        if ld and d >= ld[-1]:
            d = ld[-1] - 0.01
        lx.append(x)
        ld.append(d)
    return synthetic_sequence(lx, ld)


@settings(max_examples=80, deadline=None)
@given(sequences())
def test_window_brackets_value(seq):
    for e in (lambda_est(seq), lambda_hat_est(seq)):
        assert e.window_lo <= e.value <= e.window_hi


@settings(max_examples=80, deadline=None)
@given(sequences(), st.floats(min_value=0, max_value=2), st.floats(min_value=0, max_value=2))
def test_filter_monotone(seq, e1, e2):
    lo, hi = sorted((e1, e2))
    assert set(eps_indices(seq, hi)) <= set(eps_indices(seq, lo))


@settings(max_examples=80, deadline=None)
@given(sequences())
def test_ordering(seq):
    lam, hat = lambda_est(seq), lambda_hat_est(seq)
    assert hat.value <= lam.window_hi
    try:
        under, prof = lambda_under_est(seq)
    except InsufficientData:
        return
    assert under.value <= hat.window_hi + 1e-12
    assert [e.eps for e in prof.entries] == sorted(e.eps for e in prof.entries)


@settings(max_examples=80, deadline=None)
@given(sequences())
def test_profile_nonincreasing(seq):
    try:
        _, prof = lambda_under_est(seq)
    except InsufficientData:
        return
    for a, b in zip(prof.entries, prof.entries[1:]):
        assert b.estimate.value <= a.estimate.window_hi + 1e-12
        assert b.subseq_len <= a.subseq_len


@pytest.fixture(scope="module")
def sqrt23():
    pair = PairTarget.parse("sqrt(2)", "sqrt(3)")
    return {g: enumerate_points(pair, 10**6, g) for g in Gauge}


def test_generic_pair_trend(sqrt23):
    # a single unusually good point (41, 58, 71) sits inside the HEIGHT tail and sets the
    # raw maximum; the tail window still reaches the generic band
    h = lambda_est(sqrt23[Gauge.HEIGHT])
    assert h.window_lo <= 0.65 and h.window_hi >= 0.4
    n = lambda_est(sqrt23[Gauge.NORM])
    assert 0.4 <= n.value <= 0.65


@pytest.mark.parametrize("gauge", list(Gauge))
def test_real_data_spectrum_consistent(sqrt23, gauge):
    seq = sqrt23[gauge]
    lam, under = lambda_est(seq), lambda_under_est(seq)[0]
    lu = under.window_lo
    assert lu * lu / (1 - lu) <= lam.window_hi


def test_report_format(sqrt23):
    seq = sqrt23[Gauge.HEIGHT]
    under, prof = lambda_under_est(seq)
    text = format_profile(lambda_est(seq), lambda_hat_est(seq), under, prof)
    lines = text.splitlines()
    assert lines[1].startswith("lambda\t") and lines[2].startswith("lambda_hat\t")
    assert lines[3].startswith("lambda_under\t") and lines[4] == f"grid_depth\t{len(prof.entries)}"
    assert format_profile(lambda_est(seq), lambda_hat_est(seq), under, prof) == text
