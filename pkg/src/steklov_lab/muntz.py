"""Müntz exponent systems and the moment-problem bound built on them.

Exponents are gapped (consecutive differences at least 2). Orthonormal
Müntz-Legendre combinations L_p = sum_j C_pj x^lambda_j are formed from the
closed-form Gram coefficients. Their values suffer cancellation of order
3^(2p), so they are summed in mpmath and only the results come back as floats.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .errors import SequenceError

GAP_TOL = 1e-12
TRUNC_TMAX = 200.0
TRUNC_TOL = 1e-9


@lru_cache(maxsize=32)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n, a=0.0, b=1.0):
    x, w = _leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def composite_gauss(breaks, total=512):
    """GL nodes on each piece of ``breaks``, about ``total`` nodes overall."""
    breaks = np.asarray(breaks, float)
    per = max(8, total // (len(breaks) - 1))
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        x, w = gauss_legendre(per, a, b)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _check_gaps(lambdas, offset=0):
    d = np.diff(lambdas)
    bad = np.nonzero(d < 2.0 - GAP_TOL)[0]
    if bad.size:
        k = int(bad[0])
        raise SequenceError(
            f"exponent gap {d[k]:.6g} < 2 between indices {k + offset} and {k + 1 + offset}", stage="muntz")


@dataclass
class MuntzSystem:
    lambdas: np.ndarray
    alpha: float = 0.0
    m0: int = 0
    _C: dict = field(default_factory=dict, repr=False)
    _values: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_lambdas(cls, lambdas, alpha=0.0, m0=0):
        lam = np.asarray(lambdas, float)
        if lam.ndim != 1 or lam.size == 0:
            raise SequenceError("need a non-empty exponent list", stage="muntz")
        if lam[0] < 0:
            raise SequenceError("exponents must be non-negative", stage="muntz")
        _check_gaps(lam, m0)
        return cls(lam, float(alpha), int(m0))

    @property
    def size(self):
        return self.lambdas.size

    @property
    def eps2(self):
        return blaschke_product(self.lambdas)

    def gaps(self):
        return np.diff(self.lambdas)

    def C_matrix(self, p_max=None):
        return gram_coefficients(self, self.size - 1 if p_max is None else p_max)

    def basis_values(self, x, p_max):
        """Float array of L_0..L_p_max at the points x, shape (len(x), p_max + 1)."""
        x = np.asarray(x, float)
        key = x.tobytes()
        have = self._values.get(key)
        if have is None or have.shape[1] <= p_max:
            have = _basis_values_mp(self.lambdas[:p_max + 1], x)
            self._values[key] = have
        return have[:, :p_max + 1]


def muntz_sequence(n, m0, m_max, shifted=True):
    """Exponents lambda_k = 2(y_{m0+k} - y_{m0}) with y_m = sqrt(m(m+n-2)).

    With ``shifted=False`` the raw exponents 2*y_m (m >= m0) are kept and
    alpha is -1; for m0 = 0 both conventions coincide.
    """
    if n < 2:
        raise SequenceError("dimension must be at least 2", stage="muntz")
    if m_max < m0 or m0 < 0:
        raise SequenceError("need 0 <= m0 <= m_max", stage="muntz")
    ms = np.arange(m0, m_max + 1, dtype=float)
    y = np.sqrt(ms * (ms + n - 2))
    if shifted:
        lam, alpha = 2 * (y - y[0]), 2 * y[0] - 1
    else:
        lam, alpha = 2 * y, -1.0
    return MuntzSystem.from_lambdas(lam, alpha, m0)


def gram_log_coefficients(lambdas, p_max):
    """Sign and log-magnitude arrays of C_pj (lower triangular, zero sign above)."""
    lam = np.asarray(lambdas, float)[:p_max + 1]
    P = lam.size
    sign = np.zeros((P, P))
    logc = np.full((P, P), -np.inf)
    for p in range(P):
        head = 0.5 * math.log(2 * lam[p] + 1)
        for j in range(p + 1):
            num = np.sum(np.log(lam[j] + lam[:p] + 1))
            diff = np.delete(lam[:p + 1], j) - lam[j]
            logc[p, j] = head + num - np.sum(np.log(np.abs(diff)))
            sign[p, j] = -1.0 if (p - j) % 2 else 1.0
    return sign, logc


def gram_coefficients(sys, p_max):
    if p_max >= sys.size:
        raise SequenceError(f"p_max {p_max} exceeds the {sys.size} stored exponents", stage="muntz")
    if p_max not in sys._C:
        sys._C[p_max] = gram_log_coefficients(sys.lambdas, p_max)
    return sys._C[p_max]


def reconstruct(sign, logc):
    """Plain-float C matrix; may overflow for large p."""
    with np.errstate(over="ignore"):
        return sign * np.exp(logc)


def _basis_values_mp(lam, x):
    P = lam.size
    _, logc = gram_log_coefficients(lam, P - 1)
    top = np.max(logc[np.isfinite(logc)]) / math.log(10)
    with mpmath.workdps(int(30 + max(top, 0))):
        ml = [mpmath.mpf(float(v)) for v in lam]
        C = np.empty((P, P), dtype=object)
        C[:] = mpmath.mpf(0)
        for p in range(P):
            head = mpmath.sqrt(2 * ml[p] + 1)
            for j in range(p + 1):
                num = mpmath.mpf(1)
                for r in range(p):
                    num *= ml[j] + ml[r] + 1
                den = mpmath.mpf(1)
                for r in range(p + 1):
                    if r != j:
                        den *= ml[j] - ml[r]
                C[p, j] = head * num / den
        V = np.empty((x.size, P), dtype=object)
        for i, xi in enumerate(x):
            lx = mpmath.log(mpmath.mpf(float(xi))) if xi > 0 else None
            for j in range(P):
                if ml[j] == 0:
                    V[i, j] = mpmath.mpf(1)
                else:
                    V[i, j] = mpmath.exp(ml[j] * lx) if lx is not None else mpmath.mpf(0)
        out = V.dot(C.T)
        return np.array([[float(v) for v in row] for row in out])


def orthonormality_residual(sys, p_max=20, nodes=256):
    x, w = gauss_legendre(nodes)
    L = sys.basis_values(x, p_max)
    G = (L * w[:, None]).T @ L
    return float(np.max(np.abs(G - np.eye(p_max + 1))))


def blaschke_product(lambdas):
    """|prod (lambda_k - 1/2)/(lambda_k + 3/2)|, summed in logs."""
    lam = np.asarray(lambdas, float)
    return float(np.exp(np.sum(np.log(np.abs(lam - 0.5)) - np.log(lam + 1.5))))


def _log_ratio(lam, y):
    y2 = y * y
    return 0.5 * (np.sum(np.log((0.5 - lam) ** 2 + y2) - np.log((1.5 + lam) ** 2 + y2)) - np.log1p(y2))


def blaschke_max(lambdas, ngrid=400):
    """max over y >= 0 of |B(1+iy)/(1+iy)| with B(z) = prod (z-lambda_k-1/2)/(z+lambda_k+1/2).

    Returns (value, argmax y).
    """
    lam = np.asarray(lambdas, float)
    ymax = 10.0 * (lam[-1] + 2.0)
    ys = np.concatenate([[0.0], np.logspace(-3, math.log10(ymax), ngrid)])
    vals = np.array([_log_ratio(lam, y) for y in ys])
    i = int(np.argmax(vals))
    best_y, best = ys[i], vals[i]
    lo, hi = ys[max(i - 1, 0)], ys[min(i + 1, ys.size - 1)]
    if hi > lo:
        r = minimize_scalar(lambda y: -_log_ratio(lam, y), bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-12 * max(1.0, hi)})
        if -r.fun > best:
            best_y, best = float(r.x), -float(r.fun)
    return float(math.exp(best)), float(best_y)


def blaschke_index(sys, m):
    """(eps2 via the product formula, eps2 via the max over the vertical line) for lambda_0..lambda_m."""
    lam = sys.lambdas[:m + 1]
    return blaschke_product(lam), blaschke_max(lam)[0]


def _l2_shift(h, r, nodes):
    if r >= 1.0:
        return 0.0
    x, w = gauss_legendre(nodes, 0.0, 1.0 - r)
    d = h(x + r) - h(x)
    return float(np.sum(w * d * d))


def modulus_of_continuity(h, u, nodes=512, ngrid=64):
    """L2 modulus sup_{0<=r<=u} ||h(.+r) - h||_{L2(0,1-r)}."""
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    rs = np.linspace(0.0, u, ngrid + 1)[1:]
    vals = np.array([_l2_shift(h, r, nodes) for r in rs])
    i = int(np.argmax(vals))
    lo = rs[i - 1] if i > 0 else 0.0
    hi = rs[min(i + 1, ngrid - 1)]
    fine = np.linspace(lo, hi, ngrid + 1)[1:]
    best = max(vals[i], max(_l2_shift(h, r, nodes) for r in fine))
    return math.sqrt(best)


@dataclass(frozen=True)
class Truncation:
    m: int
    t: float
    flag: str = ""

    def __int__(self):
        return self.m


def log_g(t, C, M1):
    return (math.log(1.5) + math.log(4 * t + 2 * C + 1) + math.log(t + 1)
            + 2 * t * math.log(4.5 * M1))


def truncation_rule(eps, C, M1):
    """m(eps) = floor(g^{-1}(1/sqrt(eps))) with the growth function g of the moment bound."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    target = 0.5 * math.log(1.0 / eps)
    if target <= log_g(0.0, C, M1):
        return Truncation(0, 0.0, "eps too large: g(0) already exceeds 1/sqrt(eps)")
    lo, hi = 0.0, TRUNC_TMAX
    if log_g(hi, C, M1) < target:
        return Truncation(int(hi), hi, "clipped at t = 200")
    while hi - lo > TRUNC_TOL:
        mid = 0.5 * (lo + hi)
        if log_g(mid, C, M1) <= target:
            lo = mid
        else:
            hi = mid
    return Truncation(int(math.floor(lo)), lo)


def multinomial_check(p_max=30):
    """Exact check of (j+p)!/(j! j! (p-j)!) <= 3^(j+p) for 0 <= j <= p <= p_max.

    Returns (ok, largest ratio as float).
    """
    f = math.factorial
    ok, worst = True, 0.0
    for p in range(p_max + 1):
        for j in range(p + 1):
            num = f(j + p)
            den = f(j) * f(j) * f(p - j)
            if num > den * 3 ** (j + p):
                ok = False
            worst = max(worst, num / (den * 3 ** (j + p)))
    return ok, worst


@dataclass(frozen=True)
class Projection:
    coeffs: np.ndarray
    h_norm2: float
    proj_norm2: float
    resid_norm2: float

    @property
    def pythagoras_residual(self):
        return abs(self.h_norm2 - self.proj_norm2 - self.resid_norm2)


def _quad(breaks, nodes):
    return composite_gauss((0.0, 1.0) if breaks is None else breaks, nodes)


def project(sys, h, m, breaks=None, nodes=512):
    """Orthogonal L2(0,1) projection of h onto span{x^lambda_0..x^lambda_m}."""
    x, w = _quad(breaks, nodes)
    hv = np.asarray(h(x), float)
    L = sys.basis_values(x, m)
    a = L.T @ (w * hv)
    r = hv - L @ a
    return Projection(a, float(w @ hv ** 2), float(w @ (L @ a) ** 2), float(w @ r ** 2))


@dataclass(frozen=True)
class MomentBound:
    norm_bound: float
    projection_term: float
    approx_term: float
    h_norm2: float
    moments: np.ndarray
    eps: float
    eps_eff: float
    precondition_ok: bool
    worst_k: int
    row_log_sums: np.ndarray
    pythagoras_residual: float

    def __iter__(self):
        return iter((self.norm_bound, self.projection_term, self.approx_term))

    @property
    def effective_bound(self):
        """Same bound with eps replaced by the largest measured moment."""
        return self.eps_eff ** 2 * float(np.sum(np.exp(2 * self.row_log_sums))) + self.approx_term

    @property
    def holds(self):
        return self.h_norm2 <= self.norm_bound + 1e-8


def row_log_sums(sys, m):
    _, logc = gram_coefficients(sys, m)
    return np.array([logsumexp(logc[p, :p + 1]) for p in range(m + 1)])


def moment_bound(moments_bound_eps, sys, h, m, breaks=None, nodes=512):
    """||h||^2 <= eps^2 sum_k (sum_l |C_kl|)^2 + E2(h, Lambda_m)^2.

    The moment precondition |int t^lambda_k h| <= eps is measured, not
    assumed; when it fails the worst index is reported.
    """
    x, w = _quad(breaks, nodes)
    hv = np.asarray(h(x), float)
    lam = sys.lambdas[:m + 1]
    powers = np.exp(np.outer(np.log(x), lam))
    moments = powers.T @ (w * hv)
    pr = project(sys, h, m, breaks, nodes)
    rls = row_log_sums(sys, m)
    s = float(np.sum(np.exp(2 * rls)))
    eps = float(moments_bound_eps)
    proj_term = eps * eps * s
    absm = np.abs(moments)
    worst = int(np.argmax(absm))
    ok = bool(absm[worst] <= eps * (1 + 1e-12) + 1e-300)
    return MomentBound(proj_term + pr.resid_norm2, proj_term, pr.resid_norm2, pr.h_norm2, moments,
                       eps, float(absm[worst]), ok, -1 if ok else worst, rls, pr.pythagoras_residual)


def jackson_ratios(sys, h, ms, breaks=None, nodes=512):
    """E2(h, Lambda_m) / w(h, eps2(Lambda_m)) for each m."""
    out = []
    for m in ms:
        e2 = math.sqrt(max(project(sys, h, m, breaks, nodes).resid_norm2, 0.0))
        u = blaschke_product(sys.lambdas[:m + 1])
        wv = modulus_of_continuity(h, min(u, 0.999), nodes)
        out.append(e2 / wv if wv > 0 else 0.0)
    return np.array(out)


def jackson_constant(sys, h, ms, breaks=None, nodes=512):
    """Running supremum of the Jackson ratios; the constant must not grow with m."""
    return np.maximum.accumulate(jackson_ratios(sys, h, ms, breaks, nodes))


def muntz_table(sys, p_max=None):
    """Rows (k, lambda_k, gap to previous, eps2 up to k, log sum_l |C_kl|)."""
    p_max = sys.size - 1 if p_max is None else min(p_max, sys.size - 1)
    rls = row_log_sums(sys, p_max)
    rows = []
    for k in range(p_max + 1):
        gap = float(sys.lambdas[k] - sys.lambdas[k - 1]) if k else float("nan")
        rows.append((k, float(sys.lambdas[k]), gap, blaschke_product(sys.lambdas[:k + 1]), float(rls[k])))
    return rows
