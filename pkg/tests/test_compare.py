from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from steklov_lab.compare import (auto_fit_window, exponential_rate_fit, smallest_closeness_eps,
                                 spectra_close)
from steklov_lab.dnmap import steklov_spectrum
from steklov_lab.errors import FitInvalidError
from steklov_lab.geometry import ConformalFactor

F = ConformalFactor.from_spec({"kind": "fourier", "base": 1.0, "cos": [0.1, 0.05], "sin": [0.08]})
S = steklov_spectrum(F, 3, 0.0, 25)


def test_reflexive():
    assert spectra_close(S, S, 0.0).holds


def test_reflected_factor_gives_same_spectrum():
    g = ConformalFactor.from_callable(lambda x: F(1 - np.asarray(x)))
    assert spectra_close(S, steklov_spectrum(g, 3, 0.0, 25), 1e-9).holds


def test_scaled_factor_is_far():
    S1 = steklov_spectrum(ConformalFactor.constant(1.0), 3, 0.0, 25)
    S2 = steklov_spectrum(ConformalFactor.constant(1.21), 3, 0.0, 25)
    rep = spectra_close(S1, S2, 0.01)
    assert not rep.holds
    assert max(r.gap for r in rep.per_eigenvalue) > 0.01


def test_multiplicities_count():
    # a duplicated eigenvalue must be matched by the same total weight
    rows = list(S.rows)
    m, kap, mult, lm, lp = rows[3]
    rows[3] = (m, kap, mult + 1, lm, lp)
    fake = SimpleNamespace(rows=tuple(rows), n=3, blocks=S.blocks, multiset=None)
    fake.multiset = lambda: type(S).multiset(fake)
    assert not spectra_close(S, fake, 1e-6).holds


S0 = steklov_spectrum(ConformalFactor.constant(1.0), 3, 0.0, 10)
S02 = steklov_spectrum(ConformalFactor.constant(1.02), 3, 0.0, 10)


@given(st.floats(1e-6, 1.0))
def test_closeness_is_symmetric(eps):
    assert spectra_close(S0, S02, eps).holds == spectra_close(S02, S0, eps).holds


def test_closeness_is_not_monotone_in_eps():
    # an interval edge can split a matched pair, so larger eps may fail
    flags = [spectra_close(S0, S02, e).holds for e in np.geomspace(1e-4, 1, 60)]
    assert any(a and not b for a, b in zip(flags, flags[1:]))


def test_bisected_eps_holds_and_is_above_nearest_gap():
    e = smallest_closeness_eps(S0, S02)
    assert spectra_close(S0, S02, e).holds
    v, _ = S0.multiset()
    vt, _ = S02.multiset()
    window = min(S0.rows[-1][3], S02.rows[-1][3])
    nearest = max(np.min(np.abs(vt - x)) for x in v if x < window - 1)
    assert e >= nearest


def synthetic(rate, m_max=30, c=1.0):
    blocks, rows = [], []
    for m in range(m_max + 1):
        y = np.sqrt(m * (m + 1))
        lam = y + 1.0
        blocks.append(SimpleNamespace(lambda_branch1=lam + c * np.exp(-rate * y), lambda_branch0=lam + 1))
        rows.append((m, m * (m + 1), 2 * m + 1, lam, lam + 1))
    base = SimpleNamespace(rows=tuple(rows), blocks=[SimpleNamespace(lambda_branch1=r[3], lambda_branch0=r[4])
                                                      for r in rows])
    other = SimpleNamespace(rows=tuple(rows), blocks=blocks)
    for X in (base, other):
        X.branch = (lambda X: lambda w: np.array([b.lambda_branch1 if w == "-" else b.lambda_branch0
                                                   for b in X.blocks]))(X)
    return base, other


@given(st.floats(0.3, 1.0))
def test_rate_fit_recovers_synthetic_rate(rate):
    a, b = synthetic(rate)
    fit = exponential_rate_fit(a, b, "-", auto_fit_window(a, b, "-"))
    assert fit.rate == pytest.approx(rate, rel=1e-6)
    assert fit.r_squared > 0.999999


def test_identical_spectra_fit_is_invalid():
    with pytest.raises(FitInvalidError):
        exponential_rate_fit(S, S, "-")
