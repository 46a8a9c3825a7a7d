import math

import numpy as np
import pytest

from steklov_lab.errors import DivergingNormError, PreconditionError
from steklov_lab.geometry import ConformalFactor
from steklov_lab.stability import (StabilityConfig, discrete_weyl_gaps, pinned_bump_family,
                                   run_calderon_stability, run_steklov_stability,
                                   symmetric_bump_family)

SMALL = StabilityConfig(m_max=20, grid_n=128, muntz_m=12, nodes=256, jackson_range=(5, 12))
BASE = {"kind": "fourier", "base": 1.0, "cos": [0.0, 0.15]}


def test_symmetric_family_keeps_symmetry_and_endpoints():
    for d, f, ft in symmetric_bump_family(BASE, [1e-2, 1e-3]):
        x = np.linspace(0, 1, 101)
        assert np.allclose(ft(x), ft(1 - x), atol=1e-13)
        assert ft(0.0) == pytest.approx(f(0.0), abs=1e-14)
        assert np.max(np.abs(ft(x) - f(x))) == pytest.approx(d, rel=1e-6)
    with pytest.raises(ValueError):
        symmetric_bump_family(BASE, [])


def test_weyl_gaps_scale_linearly_in_delta():
    fam = symmetric_bump_family(BASE, [1e-3, 1e-4])
    gaps = [discrete_weyl_gaps(f, ft, 3, 0.0, range(1, 6)) for _, f, ft in fam]
    for a, b in zip(*gaps):
        assert a.det_gap / b.det_gap == pytest.approx(10.0, rel=0.01)
        assert a.trace_gap / b.trace_gap == pytest.approx(10.0, rel=0.01)


def test_asymmetric_factor_is_rejected():
    f = ConformalFactor.constant(1.0)
    g = ConformalFactor.from_spec({"kind": "affine", "a": 1.0, "b": 0.2})
    with pytest.raises(PreconditionError):
        discrete_weyl_gaps(f, g, 3, 0.0, range(1, 3))
    with pytest.raises(PreconditionError):
        run_steklov_stability(f, g, 3, 0.0, SMALL)


def test_steklov_record_checks_hold():
    (_, f, ft), = symmetric_bump_family(BASE, [1e-3])
    rec = run_steklov_stability(f, ft, 3, 0.0, SMALL)
    assert rec.spectral_gap_check["holds"]
    assert rec.eps > 0 and rec.q_gap_L2 > 0
    assert rec.passed, rec.checks
    assert rec.bound_product == pytest.approx(rec.q_gap_L2 * math.log(1 / rec.eps))
    assert rec.to_dict()["passed"] is True


def test_calderon_pinned_pair_runs():
    (_, f, ft), = pinned_bump_family({"kind": "affine", "a": 1.0, "b": 0.3}, [1e-2])
    rec = run_calderon_stability(f, ft, 3, 0.0, SMALL)
    assert rec.mode == "calderon" and math.isfinite(rec.eps)
    assert rec.checks["pythagoras"] and rec.checks["disjoint_split"]


def test_calderon_endpoint_mismatch_diverges():
    with pytest.raises(DivergingNormError) as info:
        run_calderon_stability(ConformalFactor.constant(1.0), ConformalFactor.constant(4.0), 3, 0.0, SMALL)
    assert info.value.result.slope == pytest.approx(0.5, rel=0.05)


def test_config_from_dict_ignores_unknown_keys():
    c = StabilityConfig.from_dict({"m_max": 12, "jackson_range": [3, 9], "nonsense": 1})
    assert c.m_max == 12 and c.jackson_range == (3, 9)


def test_identical_factors_give_zero_gaps():
    f = ConformalFactor.from_spec(BASE)
    rec = run_steklov_stability(f, f, 3, 0.0, SMALL)
    assert rec.q_gap_L2 == 0.0 and rec.bound_product == 0.0
    assert rec.passed
