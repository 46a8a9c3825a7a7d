import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from steklov_lab.asymptotics import (asymptotic_weyl, endpoint_equivalence_test, eigenvalue_asymptote,
                                     scalar_recursion, simon_coefficients)
from steklov_lab.dnmap import steklov_spectrum
from steklov_lab.errors import OrderError
from steklov_lab.geometry import ConformalFactor, Potential
from steklov_lab.ode import weyl_functions

X = np.linspace(0, 1, 51)


def sqrt_series(c, B):
    """Coefficients of sqrt(t^2 + c) - t in powers 1/t^(j+1): the oracle for q = c."""
    out = []
    for j in range(B + 1):
        if j % 2:
            out.append(0.0)
        else:
            k = j // 2 + 1
            out.append(math.comb(2 * k, k) * (-1) ** (k + 1) / ((2 * k - 1) * 4 ** k) * c ** k)
    return out


def test_zero_potential_has_zero_coefficients():
    co = simon_coefficients(Potential.constant(0.0), 6)
    assert all(co.beta0(j) == 0 for j in range(7))
    assert asymptotic_weyl(co, 7.0) == (-7.0, -7.0)


@pytest.mark.parametrize("c", [1.0, -0.7, 3.0])
def test_constant_potential_matches_square_root_expansion(c):
    co = simon_coefficients(Potential.constant(c), 8)
    ref = sqrt_series(c, 8)
    assert [co.beta0(j) for j in range(9)] == pytest.approx(ref, abs=1e-12)
    assert scalar_recursion(c, 8) == pytest.approx(ref, abs=1e-12)


def test_constant_potential_example_value():
    co = simon_coefficients(Potential.constant(1.0), 1)
    m, _ = asymptotic_weyl(co, 10.0, 1)
    assert m == pytest.approx(-10.05, abs=1e-15)
    exact = weyl_functions(Potential.constant(1.0), 100.0).M
    assert abs(m - exact) < 2e-4


def test_linear_potential_first_coefficients():
    co = simon_coefficients(Potential.from_callable(lambda x: x), 2)
    assert np.allclose(co.betas[0](X), X / 2, atol=1e-14)
    assert np.allclose(co.betas[1](X), 0.25, atol=1e-13)
    assert np.allclose(co.gammas[0](X), (1 - X) / 2, atol=1e-14)


def test_order_cap():
    with pytest.raises(OrderError):
        simon_coefficients(Potential.constant(1.0), 11)


def test_expansion_residual_law_cos():
    q = Potential.from_callable(lambda x: np.cos(np.pi * x))
    co = simon_coefficients(q, 4)
    res = [abs(asymptotic_weyl(co, t, 4)[0] - weyl_functions(q, t * t).M) for t in (20.0, 40.0)]
    # with beta_5(0) = 0 for cos the next term is t^-7
    assert res[0] / res[1] > 2 ** 5


def test_endpoint_equivalence():
    first, gaps = endpoint_equivalence_test(Potential.from_callable(lambda x: x), 4)
    assert first == 0 and gaps[0] == pytest.approx(-0.5)
    first, gaps = endpoint_equivalence_test(Potential.from_callable(lambda x: x * (1 - x)), 6)
    assert first is None and max(map(abs, gaps)) < 1e-6
    sym = Potential.from_callable(lambda x: np.cos(2 * np.pi * x) + (x - 0.5) ** 2)
    first, gaps = endpoint_equivalence_test(sym, 6)
    assert first is None and max(map(abs, gaps)) < 1e-6


def derivative_mismatch(poly, kmax):
    """First k with q^(k)(0) != (-1)^k q^(k)(1), straight from the polynomial."""
    for k in range(kmax + 1):
        d = poly.deriv(k) if k else poly
        if abs(d(0.0) - (-1) ** k * d(1.0)) > 1e-9:
            return k
    return None


@pytest.mark.parametrize("coeffs", [[0, 0, 1], [0.25, -1, 1, 0.1], [0, 0, 0, 1, -3, 3, -1], [1, 0, 0, 0, 1]])
def test_first_mismatch_matches_endpoint_derivatives(coeffs):
    poly = np.polynomial.Polynomial(coeffs)
    first, gaps = endpoint_equivalence_test(Potential.from_callable(poly), 6)
    assert first == derivative_mismatch(poly, 6)


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=6))
def test_mismatch_property_on_random_polynomials(c):
    poly = np.polynomial.Polynomial(np.asarray(c, float))
    first, _ = endpoint_equivalence_test(Potential.from_callable(poly), 6)
    assert first == derivative_mismatch(poly, 6)


def test_eigenvalue_asymptote_examples():
    assert eigenvalue_asymptote(ConformalFactor.constant(1.0), 3, 7, "-") == pytest.approx(7.5)
    assert eigenvalue_asymptote(ConformalFactor.constant(4.0), 3, 10, "-") == pytest.approx(5.25)


def test_asymptote_error_is_order_one_over_m():
    f = ConformalFactor.from_spec({"kind": "polynomial", "coeffs": [1.0, 1.0, -1.0]})
    S = steklov_spectrum(f, 3, 0.0, 200)
    ms = np.arange(20, 201, 20)
    for br in ("-", "+"):
        lam = S.branch(br)
        err = np.array([abs(lam[m] - eigenvalue_asymptote(f, 3, int(m), br)) for m in ms])
        assert np.max(err * ms) < 5.0


@given(st.floats(-2, 2))
def test_series_and_scalar_recursions_agree(c):
    co = simon_coefficients(Potential.constant(c), 6)
    assert [co.beta0(j) for j in range(7)] == pytest.approx(scalar_recursion(c, 6), abs=1e-12)
