"""Block-diagonal Dirichlet-to-Neumann map and the Steklov spectrum.

On the m-th spherical-harmonic block the DN map is the 2x2 matrix::

    [ -M/sqrt(f0) + C0                    -(r / sqrt(f0)) / Delta ]
    [ -(1/(r sqrt(f1))) / Delta           -N/sqrt(f1) - C1        ]

with C0 = (ln h)'(0) / (4 sqrt(f0)), C1 = (ln h)'(1) / (4 sqrt(f1)),
h = f^(n-2), r = (f1/f0)^((n-2)/4) and (M, N, Delta) evaluated at kappa_m.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np

from .geometry import log_h_prime, potential_from_factor
from .ode import weyl_functions
from .scaled import ScaledValue

DEFAULT_M_MAX = 60
SLOPE_THRESHOLD = 1e-3


def kappa(m, n):
    return m * (m + n - 2)


def multiplicity(m, n):
    if m == 0:
        return 1
    if n == 2:
        return 2
    return (2 * m + n - 2) * math.factorial(m + n - 3) // (math.factorial(m) * math.factorial(n - 2))


def sphere_eigenvalues(n, m_max):
    return [(kappa(m, n), multiplicity(m, n)) for m in range(m_max + 1)]


@dataclass(frozen=True)
class DNBlock:
    mu: float
    entries: np.ndarray          # off-diagonals collapsed to floats (may underflow to 0)
    off_diag: tuple              # the two off-diagonals as ScaledValue
    lambda_minus: float
    lambda_plus: float
    lambda_branch0: float        # eigenvalue attached to x = 0 (the '+' asymptote)
    lambda_branch1: float        # eigenvalue attached to x = 1 (the '-' asymptote)
    weyl: object = None

    @property
    def log_offprod(self):
        return self.off_diag[0].log_abs + self.off_diag[1].log_abs

    def trace_det_residual(self):
        a = self.entries
        tr = a[0, 0] + a[1, 1]
        det = a[0, 0] * a[1, 1] - math.exp(self.log_offprod) if self.log_offprod > -700 else a[0, 0] * a[1, 1]
        e_tr = abs(tr - (self.lambda_minus + self.lambda_plus)) / max(abs(tr), 1e-300)
        e_det = abs(det - self.lambda_minus * self.lambda_plus) / max(abs(det), abs(a[0, 0] * a[1, 1]), 1e-300)
        return e_tr, e_det


@dataclass(frozen=True)
class FactorData:
    """Endpoint quantities of f needed by every block."""
    sf0: float
    sf1: float
    C0: float
    C1: float
    log_r: float

    @classmethod
    def of(cls, f, n):
        f0, f1 = float(f(0.0)), float(f(1.0))
        sf0, sf1 = math.sqrt(f0), math.sqrt(f1)
        C0 = log_h_prime(f, n, 0.0) / (4.0 * sf0)
        C1 = log_h_prime(f, n, 1.0) / (4.0 * sf1)
        return cls(sf0, sf1, C0, C1, (n - 2) / 4.0 * math.log(f1 / f0))


def block_from_weyl(w, fd):
    a00 = -w.M / fd.sf0 + fd.C0
    a11 = -w.N / fd.sf1 - fd.C1
    r = ScaledValue.from_log(fd.log_r)
    b01 = -(r / fd.sf0) * w.inv_Delta
    b10 = -(w.inv_Delta / fd.sf1) / r
    log_off = b01.log_abs + b10.log_abs
    mean = 0.5 * (a00 + a11)
    half = 0.5 * (a00 - a11)
    offprod = math.exp(log_off) if log_off > -700 else 0.0
    if offprod < 0:  # pragma: no cover - the product is a square over f0 f1
        offprod = 0.0
    root = math.sqrt(half * half + offprod)
    lo, hi = mean - root, mean + root
    # branch attached to x = 1 is the one closest to the lower-right entry
    if abs(hi - a11) < abs(lo - a11):
        b1, b0 = hi, lo
    else:
        b1, b0 = lo, hi
    ent = np.array([[a00, float(b01)], [float(b10), a11]])
    return DNBlock(w.z, ent, (b01, b10), lo, hi, b0, b1, w)


def dn_block(f, n, omega, mu, q=None, rtol=None):
    if q is None:
        q = potential_from_factor(f, n, omega)
    w = weyl_functions(q, mu) if rtol is None else weyl_functions(q, mu, rtol=rtol)
    return block_from_weyl(w, FactorData.of(f, n))


@dataclass(frozen=True)
class SteklovSpectrum:
    rows: tuple                   # (m, kappa, multiplicity, lambda_minus, lambda_plus)
    n: int
    omega: float
    blocks: tuple = ()
    tag: str = None

    @property
    def m_max(self):
        return self.rows[-1][0]

    def column(self, name):
        idx = {"m": 0, "kappa": 1, "mult": 2, "lambda_minus": 3, "lambda_plus": 4}[name]
        return np.array([r[idx] for r in self.rows])

    def branch(self, which):
        """Eigenvalues by endpoint attachment: '-' (x = 1) or '+' (x = 0)."""
        if which in ("-", -1):
            return np.array([b.lambda_branch1 for b in self.blocks])
        return np.array([b.lambda_branch0 for b in self.blocks])

    def monotone_threshold(self):
        """Smallest index from which both sorted branches strictly increase."""
        lm, lp = self.column("lambda_minus"), self.column("lambda_plus")
        k = len(lm) - 1
        while k > 0 and lm[k - 1] < lm[k] and lp[k - 1] < lp[k]:
            k -= 1
        return k

    def multiset(self):
        """(values, weights) of the full spectrum with sphere multiplicities."""
        vals, wts = [], []
        for m, _, mult, lm, lp in self.rows:
            vals += [lm, lp]
            wts += [mult, mult]
        vals = np.array(vals)
        order = np.argsort(vals, kind="stable")
        return vals[order], np.array(wts)[order]


def _thread_count(threads):
    import os
    env = os.environ.get("STEKLOV_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, int(threads or 1))


def steklov_spectrum(f, n, omega, m_max=DEFAULT_M_MAX, threads=1, q=None):
    if q is None:
        q = potential_from_factor(f, n, omega)
    fd = FactorData.of(f, n)
    ms = list(range(m_max + 1))

    def one(m):
        return block_from_weyl(weyl_functions(q, float(kappa(m, n))), fd)

    nt = _thread_count(threads)
    if nt > 1:
        with ThreadPoolExecutor(nt) as ex:
            blocks = list(ex.map(one, ms))
    else:
        blocks = [one(m) for m in ms]
    rows = tuple((m, kappa(m, n), multiplicity(m, n), b.lambda_minus, b.lambda_plus)
                 for m, b in zip(ms, blocks))
    return SteklovSpectrum(rows, n, float(omega), tuple(blocks), f.closed_form_tag)


def _spectral_norm_2x2(a):
    return float(np.linalg.norm(a, 2))


def block_difference_norm(b, bt):
    d = b.entries - bt.entries
    # off-diagonal differences in scaled arithmetic (each may underflow alone)
    d = d.copy()
    d[0, 1] = float(b.off_diag[0] - bt.off_diag[0])
    d[1, 0] = float(b.off_diag[1] - bt.off_diag[1])
    return _spectral_norm_2x2(d)


@dataclass(frozen=True)
class CalderonResult:
    norm: float
    diverging: bool
    slope: float
    per_block: tuple
    expected_slope: float

    def __iter__(self):
        return iter((self.norm, self.diverging))


def calderon_norm_difference(f, f_tilde, n, omega, m_max=DEFAULT_M_MAX, threads=1, spectra=None):
    """Sup over blocks of the spectral norm of the block difference.

    The slope of the block norm against sqrt(kappa_m) over the top decade of
    m detects a mismatch in endpoint values (the norm then grows without
    bound).
    """
    if spectra is None:
        S = steklov_spectrum(f, n, omega, m_max, threads)
        St = steklov_spectrum(f_tilde, n, omega, m_max, threads)
    else:
        S, St = spectra
    norms = np.array([block_difference_norm(b, bt) for b, bt in zip(S.blocks, St.blocks)])
    ys = np.sqrt([kappa(m, n) for m in range(len(norms))])
    lo = max(1, int(math.ceil(m_max / 10)))
    sel = slice(lo, m_max + 1)
    if m_max - lo >= 2:
        slope = float(np.polyfit(ys[sel], norms[sel], 1)[0])
    else:
        slope = 0.0
    exp_slope = max(abs(1 / math.sqrt(f(k)) - 1 / math.sqrt(f_tilde(k))) for k in (0.0, 1.0))
    diverging = slope > SLOPE_THRESHOLD
    norm = math.inf if diverging else float(norms.max())
    return CalderonResult(norm, diverging, slope, tuple(norms), exp_slope)
