"""Closeness of two Steklov spectra and exponential-rate fits of branch gaps."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import FitInvalidError

NOISE_FLOOR = 1e-11


@dataclass(frozen=True)
class ClosenessRow:
    value: float
    matched_value: float
    gap: float
    cardinality_ok: bool
    m: int
    branch: str


@dataclass(frozen=True)
class ClosenessReport:
    holds: bool
    per_eigenvalue: tuple
    direction: str
    window: float
    ambiguous: tuple = ()

    def worst(self):
        bad = [r for r in self.per_eigenvalue if not r.cardinality_ok]
        return bad[0] if bad else max(self.per_eigenvalue, key=lambda r: r.gap, default=None)

    def to_dict(self):
        return {
            "holds": self.holds,
            "direction": self.direction,
            "window": self.window,
            "ambiguous_blocks": list(self.ambiguous),
            "rows": [
                {"m": r.m, "branch": r.branch, "value": r.value, "matched_value": r.matched_value,
                 "gap": r.gap, "cardinality_ok": r.cardinality_ok}
                for r in self.per_eigenvalue
            ],
        }


def _eps_of(eps, m):
    if np.ndim(eps) == 0:
        return float(eps)
    return float(eps[m])


def _count(vals, cum, lo, hi):
    """Total weight of sorted ``vals`` inside [lo, hi]."""
    i = np.searchsorted(vals, lo, side="left")
    j = np.searchsorted(vals, hi, side="right")
    return cum[j] - cum[i]


def _complete_window(S, St):
    # every eigenvalue below this level is present in both truncated spectra
    tops = []
    for X in (S, St):
        tops += [X.rows[-1][3], X.rows[-1][4]]
    return min(tops)


def _one_sided(S, St, eps, window):
    v, w = S.multiset()
    vt, wt = St.multiset()
    cum = np.concatenate([[0], np.cumsum(w)])
    cumt = np.concatenate([[0], np.cumsum(wt)])
    rows = []
    ok = True
    for m, _, mult, lm, lp in S.rows:
        e = _eps_of(eps, m)
        for val, br in ((lm, "-"), (lp, "+")):
            if val + e > window:
                continue
            k = int(np.argmin(np.abs(vt - val)))
            gap = abs(vt[k] - val)
            card = _count(v, cum, val - e, val + e) == _count(vt, cumt, val - e, val + e)
            good = bool(gap <= e and card)
            ok &= good
            rows.append(ClosenessRow(float(val), float(vt[k]), float(gap), bool(card), m, br))
    return ok, rows


def spectra_close(S, S_tilde, eps, symmetric=True):
    """Whether S and S_tilde are close up to ``eps`` (scalar or per-m sequence).

    Eigenvalues enter with their sphere multiplicities.  Only eigenvalues in
    the window where both truncated spectra are complete are audited.
    """
    if S.n != S_tilde.n:
        raise ValueError("spectra belong to different dimensions")
    window = _complete_window(S, S_tilde)
    ok, rows = _one_sided(S, S_tilde, eps, window)
    if symmetric:
        ok2, rows2 = _one_sided(S_tilde, S, eps, window)
        ok, rows = ok and ok2, rows + rows2
    amb = tuple(m for m, _, _, lm, lp in S.rows if lp - lm <= 2 * _eps_of(eps, m))
    return ClosenessReport(bool(ok), tuple(rows), "symmetric" if symmetric else "one-sided",
                           float(window), amb)


def smallest_closeness_eps(S, S_tilde, lo=1e-15, hi=None, iters=80):
    """Smallest constant eps for which the spectra are close (bisection in log eps)."""
    if spectra_close(S, S_tilde, lo).holds:
        return lo
    if hi is None:
        hi = 1.0
        while not spectra_close(S, S_tilde, hi).holds:
            hi *= 4.0
            if hi > 1e8:
                return math.inf
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if spectra_close(S, S_tilde, math.exp(mid)).holds:
            b = mid
        else:
            a = mid
    return math.exp(b)


@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    intercept: float
    ms: tuple
    gaps: tuple

    def __iter__(self):
        return iter((self.rate, self.r_squared))


def exponential_rate_fit(S, S_tilde, branch="-", m_range=None, floor=NOISE_FLOOR):
    """Fit ln|lambda - lambda~| = c - rate * sqrt(kappa_m) on one branch."""
    lam = S.branch(branch)
    lamt = S_tilde.branch(branch)
    kap = np.array([r[1] for r in S.rows], dtype=float)
    ms = np.arange(len(lam))
    if m_range is not None:
        lo, hi = m_range
        sel = (ms >= lo) & (ms <= hi)
    else:
        sel = ms >= 1
    gaps = np.abs(lam - lamt)[sel]
    scale = np.maximum(np.abs(lam[sel]), 1.0)
    y = np.sqrt(kap[sel])
    if len(gaps) < 3 or np.any(gaps <= floor * scale):
        raise FitInvalidError("branch gaps reach the integrator noise floor; no decay to fit")
    slope, icpt = np.polyfit(y, np.log(gaps), 1)
    pred = icpt + slope * y
    ss_res = float(np.sum((np.log(gaps) - pred) ** 2))
    ss_tot = float(np.sum((np.log(gaps) - np.log(gaps).mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    rate = -float(slope)
    if rate <= 0:
        raise FitInvalidError(f"branch gaps do not decay (fitted rate {rate:.3g})")
    return RateFit(rate, r2, float(icpt), tuple(int(m) for m in ms[sel]), tuple(gaps))


def auto_fit_window(S, S_tilde, branch="-", m_lo=8, floor=NOISE_FLOOR, headroom=1e3):
    """(m_lo, m_hi) with m_hi the last block before the gap comes within
    ``headroom`` of the noise floor.  Small m are skipped because there the
    algebraic prefactor of the gap still bends the log-linear fit."""
    lam = S.branch(branch)
    gaps = np.abs(lam - S_tilde.branch(branch))
    scale = np.maximum(np.abs(lam), 1.0)
    low = np.nonzero(gaps <= headroom * floor * scale)[0]
    low = low[low > m_lo]
    m_hi = int(low[0]) - 1 if low.size else len(lam) - 1
    if m_hi - m_lo < 3:
        raise FitInvalidError(f"gaps reach the noise floor by m = {m_hi + 1}; too few blocks to fit")
    return m_lo, m_hi
