"""Shooting solver for -u'' + q u = -z u and the Weyl-Titchmarsh data.

Fundamental systems::

    c0(0)=1, c0'(0)=0      s0(0)=0, s0'(0)=1      (integrated 0 -> 1)
    c1(1)=1, c1'(1)=0      s1(1)=0, s1'(1)=1      (integrated 1 -> 0)

Both pairs share one running log-scale.  Whenever the state exceeds e^30 it is
divided by e^30 and 30 is added to the scale.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from ._jit import njit
from .errors import IntegrationError, PoleProximityError
from .scaled import ScaledValue
from .series import cheb_eval_scalar

RTOL = 1e-11
RENORM_LOG = 30.0
RENORM = math.exp(RENORM_LOG)
POLE_LOG_MARGIN = 20.0

# Dormand-Prince 5(4) tableau
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                                22 / 525, -1 / 40)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9


@njit
def _rhs(breaks, coeffs, z, x, y, out):
    w = cheb_eval_scalar(breaks, coeffs, x) + z
    out[0] = y[1]
    out[1] = w * y[0]
    out[2] = y[3]
    out[3] = w * y[2]


@njit
def _err_norm(y, yn, e, rtol):
    # per-solution floor so a component passing through zero does not stall
    fa = rtol * 1e-3 * max(abs(y[0]), abs(y[1]), abs(yn[0]), abs(yn[1]))
    fb = rtol * 1e-3 * max(abs(y[2]), abs(y[3]), abs(yn[2]), abs(yn[3]))
    err = 0.0
    for i in range(4):
        fl = fa if i < 2 else fb
        sc = fl + rtol * max(abs(y[i]), abs(yn[i]))
        if sc == 0.0:
            sc = 1e-300
        r = abs(e[i]) / sc
        if r > err:
            err = r
    return err


@njit
def dp45_pair(breaks, coeffs, z, x0, y0, targets, emit, rtol, renorm):
    """Integrate two solutions of u'' = (q + z) u through ``targets``.

    Returns (states, logs, n_renorm, status, x_fail).  ``states`` holds one row
    per target with ``emit`` set.  status 0 is success, 1 step-size underflow.
    """
    nt = targets.shape[0]
    nout = 0
    for i in range(nt):
        if emit[i]:
            nout += 1
    states = np.zeros((nout, 4))
    logs = np.zeros(nout)
    y = y0.copy()
    logsc = 0.0
    x = x0
    direction = 1.0 if targets[nt - 1] >= x0 else -1.0
    h = direction * min(0.05, 0.5 / math.sqrt(abs(z) + 1.0))
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    k5 = np.empty(4)
    k6 = np.empty(4)
    k7 = np.empty(4)
    yt = np.empty(4)
    yn = np.empty(4)
    e = np.empty(4)
    nren = 0
    io = 0
    _rhs(breaks, coeffs, z, x, y, k1)
    for it in range(nt):
        xt = targets[it]
        while direction * (xt - x) > 0.0:
            if direction * (x + h - xt) > 0.0:
                h = xt - x
            for i in range(4):
                yt[i] = y[i] + h * _A21 * k1[i]
            _rhs(breaks, coeffs, z, x + _C2 * h, yt, k2)
            for i in range(4):
                yt[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
            _rhs(breaks, coeffs, z, x + _C3 * h, yt, k3)
            for i in range(4):
                yt[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            _rhs(breaks, coeffs, z, x + _C4 * h, yt, k4)
            for i in range(4):
                yt[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
            _rhs(breaks, coeffs, z, x + _C5 * h, yt, k5)
            for i in range(4):
                yt[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i]
                                    + _A65 * k5[i])
            _rhs(breaks, coeffs, z, x + h, yt, k6)
            for i in range(4):
                yn[i] = y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i]
                                    + _B6 * k6[i])
            _rhs(breaks, coeffs, z, x + h, yn, k7)
            for i in range(4):
                e[i] = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                            + _E6 * k6[i] + _E7 * k7[i])
            err = _err_norm(y, yn, e, rtol)
            if err <= 1.0:
                x = x + h
                if direction * (x - xt) > 0.0 or abs(x - xt) < 1e-15:
                    x = xt
                for i in range(4):
                    y[i] = yn[i]
                    k1[i] = k7[i]
                big = max(abs(y[0]), abs(y[1]), abs(y[2]), abs(y[3]))
                if big > renorm:
                    for i in range(4):
                        y[i] /= renorm
                        k1[i] /= renorm
                    logsc += math.log(renorm)
                    nren += 1
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            else:
                fac = max(0.1, 0.9 * err ** -0.2)
            h = h * fac
            if abs(h) < 1e-13 * (1.0 + abs(x)):
                return states, logs, nren, 1, x
        if emit[it]:
            for i in range(4):
                states[io, i] = y[i]
            logs[io] = logsc
            io += 1
    return states, logs, nren, 0, x


def integrate_pair(q, z, x0, y0, xout, rtol=RTOL):
    """States of both solutions at ``xout`` (ordered away from ``x0``).

    Returns (states[k, 4], log_scales[k], renorm_count).  Breakpoints of a
    piecewise potential are visited as internal stops so no step straddles a
    kink.
    """
    series = q.series if hasattr(q, "series") else q
    xout = np.asarray(xout, dtype=float)
    inner = series.breaks[1:-1]
    lo, hi = min(x0, xout.min()), max(x0, xout.max())
    stops = inner[(inner > lo) & (inner < hi)]
    allx = np.concatenate([xout, stops])
    emit = np.concatenate([np.ones(len(xout), bool), np.zeros(len(stops), bool)])
    order = np.argsort(allx if xout[-1] >= x0 else -allx, kind="stable")
    allx, emit = allx[order], emit[order]
    states, logs, nren, status, xf = dp45_pair(
        series.breaks, np.ascontiguousarray(series.coeffs), float(z), float(x0),
        np.asarray(y0, dtype=float), allx, emit, float(rtol), RENORM)
    if status != 0:
        raise IntegrationError(f"step size underflow at x = {xf:.6g} (z = {z:.6g})")
    # emitted rows follow the sorted order; map them back to the caller's order
    rank = np.argsort(order)[: len(xout)]
    inv = (np.cumsum(emit) - 1)[rank]
    return states[inv], logs[inv], int(nren)


def solutions_at(q, z, xs, side="left", rtol=RTOL):
    """Values of (c, c', s, s') at ``xs`` for the pair normalised at x=0
    (side='left') or at x=1 (side='right')."""
    xs = np.asarray(xs, dtype=float)
    x0 = 0.0 if side == "left" else 1.0
    order = np.argsort(xs if side == "left" else -xs)
    st, lg, _ = integrate_pair(q, z, x0, [1.0, 0.0, 0.0, 1.0], xs[order], rtol)
    out = np.empty_like(st)
    lout = np.empty_like(lg)
    out[order] = st
    lout[order] = lg
    return out, lout


def _sv(v, log):
    return ScaledValue(float(v), float(log))


@dataclass(frozen=True)
class WeylData:
    z: float
    M: float
    N: float
    Delta: ScaledValue
    inv_Delta: ScaledValue
    c0_1: ScaledValue
    dc0_1: ScaledValue
    s0_1: ScaledValue
    ds0_1: ScaledValue
    c1_0: ScaledValue
    dc1_0: ScaledValue
    s1_0: ScaledValue
    ds1_0: ScaledValue
    wronskian_residual: float
    relation_residuals: dict = field(default_factory=dict)
    renorm_count: int = 0
    pole_margin: float = math.inf

    @property
    def log_abs_delta(self):
        return self.Delta.log_abs

    @property
    def max_relation_residual(self):
        return max(self.relation_residuals.values()) if self.relation_residuals else 0.0


def _wronskian_residual(c, dc, s, ds, log2):
    """|W(c, s) - 1| relative to the size of the terms forming W."""
    w = (c * ds - dc * s)
    terms = abs(c * ds) + abs(dc * s)
    if log2 > 700:
        return abs(w - math.exp(-log2) if log2 < 745 else w) / terms
    w = w * math.exp(log2)
    terms = terms * math.exp(log2)
    return abs(w - 1.0) / max(1.0, terms)


def fundamental_solutions(q, z, rtol=RTOL):
    """Both fundamental systems at x = 1/2 and at the far endpoints."""
    left, llog, nl = integrate_pair(q, z, 0.0, [1.0, 0.0, 0.0, 1.0], [0.5, 1.0], rtol)
    right, rlog, nr = integrate_pair(q, z, 1.0, [1.0, 0.0, 0.0, 1.0], [0.5, 0.0], rtol)
    return left, llog, right, rlog, nl + nr


def weyl_functions(q, z, rtol=RTOL, check_pole=True):
    left, llog, right, rlog, nren = fundamental_solutions(q, z, rtol)
    c0, dc0, s0, ds0 = left[0]
    c1, dc1, s1, ds1 = right[0]
    lg = llog[0] + rlog[0]
    delta_m = s0 * ds1 - ds0 * s1
    # both Wronskian terms can vanish together at x = 1/2, so scale by the full vectors
    typical = math.hypot(s0, ds0) * math.hypot(s1, ds1)
    margin = math.log(abs(delta_m) / typical) if delta_m != 0.0 else -math.inf
    if check_pole and margin < -POLE_LOG_MARGIN:
        raise PoleProximityError(
            f"|Delta(z)| is e^{margin:.1f} of its typical size at z = {z:.8g}: "
            "z is near a Dirichlet eigenvalue (omega near the Dirichlet spectrum)")
    D = c0 * ds1 - dc0 * s1
    E = c1 * ds0 - dc1 * s0
    M = -D / delta_m
    N = -E / delta_m
    Delta = _sv(delta_m, lg)
    inv = 1.0 / Delta

    e = {k: _sv(v, llog[1]) for k, v in zip(("c0", "dc0", "s0", "ds0"), left[1])}
    e.update({k: _sv(v, rlog[1]) for k, v in zip(("c1", "dc1", "s1", "ds1"), right[1])})

    wr = 0.0
    for st, lgi in ((left, llog), (right, rlog)):
        for row, l in zip(st, lgi):
            wr = max(wr, _wronskian_residual(row[0], row[1], row[2], row[3], 2 * l))

    MD = M * Delta
    ND = N * Delta
    MND = M * ND
    rel = {
        "s0(1)=Delta": e["s0"].rel_diff(Delta),
        "s0'(1)=-N Delta": e["ds0"].rel_diff(-ND),
        "c0(1)=-M Delta": e["c0"].rel_diff(-MD),
        "c0'(1)=MN Delta-1/Delta": e["dc0"].rel_diff(MND - inv),
        "s1(0)=-Delta": e["s1"].rel_diff(-Delta),
        "s1'(0)=-M Delta": e["ds1"].rel_diff(-MD),
        "c1(0)=-N Delta": e["c1"].rel_diff(-ND),
        "c1'(0)=1/Delta-NM Delta": e["dc1"].rel_diff(inv - MND),
    }
    return WeylData(float(z), float(M), float(N), Delta, inv,
                    e["c0"], e["dc0"], e["s0"], e["ds0"],
                    e["c1"], e["dc1"], e["s1"], e["ds1"],
                    float(wr), rel, nren, margin)


def wronskian_profile(q, z, npts=32, rtol=RTOL):
    """Relative Wronskian drift of both pairs at ``npts`` interior points."""
    xs = (np.arange(npts) + 0.5) / npts
    out = []
    for side in ("left", "right"):
        st, lg = solutions_at(q, z, xs, side, rtol)
        for row, l in zip(st, lg):
            out.append(_wronskian_residual(row[0], row[1], row[2], row[3], 2 * l))
    return float(max(out))
