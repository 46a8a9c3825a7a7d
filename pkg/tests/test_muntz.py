import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import legendre as leg, polynomial as P

from steklov_lab import muntz
from steklov_lab.errors import SequenceError


def brute_max(lam):
    y = np.linspace(0.0, 50.0, 200001)
    z = 1.0 + 1j * y
    B = np.prod([(z - l - 0.5) / (z + l + 0.5) for l in lam], axis=0)
    return float(np.max(np.abs(B / z)))


def test_two_dimensional_exponents_are_even_integers():
    s = muntz.muntz_sequence(2, 0, 10)
    assert np.array_equal(s.lambdas, 2.0 * np.arange(11))
    assert s.alpha == -1.0


def test_three_dimensional_gaps():
    s = muntz.muntz_sequence(3, 1, 200)
    assert s.lambdas[1] == pytest.approx(2 * (math.sqrt(6) - math.sqrt(2)), rel=1e-14)
    assert s.alpha == pytest.approx(2 * math.sqrt(2) - 1)
    g = s.gaps()
    assert np.all(g >= 2.0)
    assert np.all(g[99:] - 2 <= 0.01)
    assert np.max((g - 2) * np.arange(1, g.size + 1)) < 1.0


def test_gap_violation_names_index():
    with pytest.raises(SequenceError, match="2"):
        muntz.MuntzSystem.from_lambdas([0.0, 2.0, 3.0])


def test_first_gram_row():
    sign, logc = muntz.gram_log_coefficients([0.0, 2.0], 1)
    C = muntz.reconstruct(sign, logc)
    assert C[0, 0] == 1.0
    assert C[1, 0] == pytest.approx(-math.sqrt(5) / 2, rel=1e-14)
    assert C[1, 1] == pytest.approx(3 * math.sqrt(5) / 2, rel=1e-14)


def test_integer_exponents_give_shifted_legendre():
    sign, logc = muntz.gram_log_coefficients(np.arange(8.0), 7)
    C = muntz.reconstruct(sign, logc)
    for p in range(8):
        c = np.zeros(p + 1)
        c[p] = 1
        ref = math.sqrt(2 * p + 1) * P.Polynomial(leg.leg2poly(c))(P.Polynomial([-1, 2]))
        assert np.allclose(C[p, :p + 1], ref.coef, atol=1e-9, rtol=1e-12)


def test_orthonormality():
    assert muntz.orthonormality_residual(muntz.MuntzSystem.from_lambdas([0.0, 2.0, 4.0]), 2) < 1e-12
    assert muntz.orthonormality_residual(muntz.muntz_sequence(3, 1, 30), 20) < 1e-8


def test_large_coefficients_stay_finite_in_logs():
    s = muntz.muntz_sequence(2, 0, 60)
    sign, logc = muntz.gram_coefficients(s, 60)
    assert np.isfinite(logc[60, :61]).all()
    assert logc.max() > math.log(1e40)
    assert np.all(np.diff([logc[p, :p + 1].max() for p in range(61)]) > 0)


def test_blaschke_products():
    assert muntz.blaschke_product([0.0]) == pytest.approx(1 / 3)
    assert muntz.blaschke_product([0.0, 2.0]) == pytest.approx(1 / 7)


@pytest.mark.parametrize("lam", [[0.0], [0.0, 2.0], [0.0, 2.0, 4.0, 6.0]])
def test_blaschke_max_matches_dense_search(lam):
    val, y = muntz.blaschke_max(lam)
    assert val == pytest.approx(brute_max(lam), rel=1e-6)
    # the maximum sits off the real axis, so it exceeds the product
    assert y > 0 and val > muntz.blaschke_product(lam)


def test_blaschke_decay_plateau():
    s = muntz.muntz_sequence(2, 0, 100)
    plateau = [m * muntz.blaschke_product(s.lambdas[:m + 1]) for m in range(20, 101)]
    assert 0.1 <= min(plateau) and max(plateau) <= 10
    assert max(plateau) / min(plateau) < 1.1


def test_modulus_constant_and_linear():
    assert muntz.modulus_of_continuity(lambda x: 0 * x + 2.0, 0.3) == 0.0
    for u in (0.01, 0.1, 0.5):
        assert muntz.modulus_of_continuity(lambda x: x, u) == pytest.approx(u * math.sqrt(1 - u), rel=1e-9)


def test_modulus_of_step_scales_like_sqrt():
    h = lambda x: (x > 0.5).astype(float)
    # the shifted step differs from itself on a set of measure r
    for u in (0.1, 0.2, 0.4):
        assert muntz.modulus_of_continuity(h, u) == pytest.approx(math.sqrt(u), rel=0.01)


def test_truncation_examples():
    tr = muntz.truncation_rule(1 / 81, 0.5, 2.0)
    assert tr.m == 0
    assert muntz.truncation_rule(0.5, 0.5, 2.0).flag
    ms = [muntz.truncation_rule(10.0 ** -k, 0.5, 2.0).m for k in (5, 10, 50, 100, 300)]
    assert ms == sorted(ms) and ms[-1] > 50
    rate = ms[-1] / math.log(1e300)
    assert rate == pytest.approx(1 / (4 * math.log(9.0)), rel=0.05)


@given(st.floats(1e-250, 1e-3), st.floats(0.0, 3.0), st.floats(1.0, 5.0))
def test_truncation_monotone_and_safe(eps, C, M1):
    a = muntz.truncation_rule(eps, C, M1)
    b = muntz.truncation_rule(eps / 2, C, M1)
    assert b.m >= a.m
    if not a.flag:
        assert muntz.log_g(a.m, C, M1) <= 0.5 * math.log(1 / eps) + 1e-9


def test_multinomial_bound():
    ok, worst = muntz.multinomial_check(30)
    assert ok and worst <= 1.0


SYS = muntz.muntz_sequence(3, 1, 24)


@settings(max_examples=15)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=4), st.integers(1, 12))
def test_projection_pythagoras(coef, m):
    h = lambda x: np.polynomial.chebyshev.chebval(2 * x - 1, coef) * np.exp(-x)
    assert muntz.project(SYS, h, m).pythagoras_residual < 1e-8


def test_moment_bound_zero_and_span():
    mb = muntz.moment_bound(0.0, SYS, lambda x: 0 * x, 5)
    assert tuple(mb) == (0.0, 0.0, 0.0)
    lam1 = SYS.lambdas[1]
    h = lambda x: x ** lam1
    mb = muntz.moment_bound(1.0, SYS, h, 1)
    assert mb.approx_term < 1e-12
    assert mb.h_norm2 == pytest.approx(1 / (2 * lam1 + 1), rel=1e-10)
    assert mb.holds


def test_moment_precondition_reported_not_raised():
    C = muntz.reconstruct(*SYS.C_matrix(5))
    h = lambda x: sum(C[5, j] * x ** SYS.lambdas[j] for j in range(6))
    mb = muntz.moment_bound(0.0, SYS, h, 10)
    assert not mb.precondition_ok and mb.worst_k > 5
    assert abs(mb.moments[:5]).max() < 1e-8 * abs(mb.moments).max()
    assert mb.h_norm2 == pytest.approx(1.0, rel=1e-8)
    assert mb.h_norm2 <= mb.effective_bound + 1e-8


def test_jackson_constant_is_stable():
    h = lambda x: np.sin(3 * x) * np.sqrt(x)
    c = muntz.jackson_constant(SYS, h, range(5, 21))
    assert c[-1] <= 3 * c[0]


def test_table_rows():
    rows = muntz.muntz_table(SYS, 5)
    assert [r[0] for r in rows] == list(range(6))
    assert math.isnan(rows[0][2]) and rows[1][2] == pytest.approx(SYS.lambdas[1])
    assert rows[0][3] == pytest.approx(1 / 3)
