"""Transformation-operator kernel and the integral operators built from it.

The kernel K(x, t), |t| <= x, turns free solutions into solutions for q::

    s0(x) = sinh(yx)/y + int_0^x H(x,t) sinh(yt)/y dt,   H = K(x,t) - K(x,-t)
    c0(x) = cosh(yx)   + int_0^x P(x,t) cosh(yt) dt,     P = K(x,t) + K(x,-t)

with y = sqrt(kappa).  In characteristic coordinates J(u, v) = K(u+v, u-v)
solves J = J0 + int_0^u int_0^v q(a+b) J(a, b) db da with J0(u) = (1/2) int_0^u q.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from ._jit import USE_JIT, njit
from .errors import DimensionError, InversionError, IterationError
from .ode import solutions_at, weyl_functions
from .scaled import ScaledValue

DEFAULT_GRID = 512


# ---------------------------------------------------------------------------
# Picard sweeps for J


@njit
def _sweep_loops(J, qx, src, hu, out):
    M = J.shape[0] - 1
    prev_inner = np.zeros(M + 1)
    inner = np.zeros(M + 1)
    acc = np.zeros(M + 1)
    for a in range(M + 1):
        nb = M + 1 - a
        run = 0.0
        prev = qx[a] * J[a, 0]
        inner[0] = 0.0
        for b in range(1, nb):
            g = qx[a + b] * J[a, b]
            run += 0.5 * hu * (prev + g)
            prev = g
            inner[b] = run
        if a == 0:
            for b in range(nb):
                acc[b] = 0.0
                out[a, b] = src[a]
        else:
            for b in range(nb):
                acc[b] += 0.5 * hu * (prev_inner[b] + inner[b])
                out[a, b] = src[a] + acc[b]
        for b in range(nb):
            prev_inner[b] = inner[b]
    return out


def _sweep_numpy(J, qx, src, hu, out):
    M = J.shape[0] - 1
    idx = np.add.outer(np.arange(M + 1), np.arange(M + 1))
    G = qx[np.minimum(idx, 2 * M)] * J
    G[idx > M] = 0.0
    c = np.cumsum(G, axis=1)
    inner = hu * (c - 0.5 * G[:, :1] - 0.5 * G)
    c2 = np.cumsum(inner, axis=0)
    outer = hu * (c2 - 0.5 * inner[:1, :] - 0.5 * inner)
    out[:] = src[:, None] + outer
    out[idx > M] = 0.0
    return out


def _sweep(J, qx, src, hu, out):
    if USE_JIT:
        return _sweep_loops(J, qx, src, hu, out)
    return _sweep_numpy(J, qx, src, hu, out)


def _solve_J(q, M, tol, max_iter):
    """J on the half grid u = a hu, v = b hu (hu = 1/M), a + b <= M."""
    hu = 1.0 / M
    s = np.arange(2 * M + 1) * hu
    qx = q.series(np.minimum(s, 1.0))
    src = 0.5 * q.series.antideriv()(np.arange(M + 1) * hu)
    J = np.zeros((M + 1, M + 1))
    J[:] = src[:, None]
    idx = np.add.outer(np.arange(M + 1), np.arange(M + 1))
    outside = idx > M
    J[outside] = 0.0
    out = np.zeros_like(J)
    for it in range(1, max_iter + 1):
        _sweep(J, qx, src, hu, out)
        out[outside] = 0.0
        change = float(np.max(np.abs(out - J)))
        J, out = out, J
        if change < tol:
            _sweep(J, qx, src, hu, out)
            out[outside] = 0.0
            residual = float(np.max(np.abs(out - J)))
            return J, it, residual
    raise IterationError(f"kernel iteration did not converge in {max_iter} sweeps (last change {change:.2e})")


def _K_from_J(J, N):
    """Full K(x_i, t_j) array of shape (N+1, 2N+1), column N + j holds t_j."""
    M = J.shape[0] - 1
    r = M // (2 * N)
    K = np.zeros((N + 1, 2 * N + 1))
    for i in range(N + 1):
        j = np.arange(-i, i + 1)
        K[i, N + j] = J[(i + j) * r, (i - j) * r]
    return K


@dataclass(frozen=True, eq=False)
class KernelGrid:
    grid_n: int
    K: np.ndarray = field(repr=False)
    q_ref: object = field(repr=False)
    iterations: int = 0
    residual: float = 0.0
    richardson: bool = True

    @property
    def h(self):
        return 1.0 / self.grid_n

    @property
    def x(self):
        return np.arange(self.grid_n + 1) * self.h

    def H(self):
        """H(x_i, t_j) for all |j| <= i (odd extension), same layout as K."""
        return self.K - self.K[:, ::-1]

    def P(self):
        return self.K + self.K[:, ::-1]

    def diagonal(self):
        N = self.grid_n
        return self.K[np.arange(N + 1), N + np.arange(N + 1)]

    def diagonal_error(self):
        exact = 0.5 * self.q_ref.series.antideriv()(self.x)
        return float(np.max(np.abs(self.diagonal() - exact)))

    def to_bytes(self):
        import json
        header = json.dumps({"grid_n": self.grid_n, "spacing": self.h,
                             "potential": self.q_ref.tag, "layout": "K[i, N+j], |j|<=i"})
        return header.encode() + b"\n" + np.ascontiguousarray(self.K, dtype="<f8").tobytes()


def solve_kernel(q, grid_n=DEFAULT_GRID, tol=1e-10, richardson=True, max_iter=200):
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    J, its, res = _solve_J(q, 2 * grid_n, tol, max_iter)
    K = _K_from_J(J, grid_n)
    if richardson:
        Jf, its2, res2 = _solve_J(q, 4 * grid_n, tol, max_iter)
        Kf = _K_from_J(Jf, grid_n)
        K = (4.0 * Kf - K) / 3.0
        its, res = max(its, its2), max(res, res2)
    return KernelGrid(grid_n, K, q, its, res, richardson)


def marchenko_bound_check(kg, slack=1e-9):
    """Check |K| against the growth bound at every node; returns (ok, worst ratio)."""
    N = kg.grid_n
    xf = np.linspace(0.0, 1.0, 8 * N + 1)
    qs = kg.q_ref.series
    Q = qs.antideriv()(xf)
    w_f = np.maximum.accumulate(np.abs(Q))
    aq = np.abs(qs(xf))
    dx = xf[1] - xf[0]
    s0 = np.concatenate([[0.0], np.cumsum(0.5 * dx * (aq[1:] + aq[:-1]))])
    s1 = np.concatenate([[0.0], np.cumsum(0.5 * dx * (s0[1:] + s0[:-1]))])
    w = lambda u: np.interp(u, xf, w_f)
    sig1 = lambda u: np.interp(u, xf, s1)
    worst = 0.0
    ok = True
    for i in range(N + 1):
        x = i * kg.h
        j = np.arange(-i, i + 1)
        t = j * kg.h
        u, v = (x + t) / 2, (x - t) / 2
        bound = 0.5 * w(u) * np.exp(sig1(x) - sig1(u) - sig1(v))
        kv = np.abs(kg.K[i, N + j])
        allowed = bound * (1 + slack) + 1e-12
        ok &= bool(np.all(kv <= allowed))
        nz = bound > 1e-14
        if np.any(nz):
            worst = max(worst, float(np.max(kv[nz] / bound[nz])))
    return ok, worst


# ---------------------------------------------------------------------------
# exponential-weight product quadrature on a uniform grid


def _phi(s):
    s = np.asarray(s, dtype=float)
    small = np.abs(s) < 1e-3
    ss = np.where(small, 1.0, s)
    e = np.exp(ss)
    p1 = np.where(small, 0.5 + s / 6 + s * s / 24 + s ** 3 / 120 + s ** 4 / 720,
                  (np.expm1(ss) - ss) / ss ** 2)
    p2 = np.where(small, 0.5 + s / 3 + s * s / 8 + s ** 3 / 30 + s ** 4 / 144,
                  ((ss - 1.0) * e + 1.0) / ss ** 2)
    return p1, p2


def exp_hat_weights(c, h, n, shift):
    """Weights w_j with sum_j w_j g_j = int_0^{nh} g(t) e^(c t - shift) dt for the
    piecewise-linear interpolant of g on t_j = j h."""
    w = np.zeros(n + 1)
    if n == 0:
        return w
    p1, p2 = _phi(c * h)
    tk = np.arange(n) * h
    scale = h * np.exp(c * tk - shift)
    w[:-1] += scale * p1
    w[1:] += scale * p2
    return w


_GL_T, _GL_W = np.polynomial.legendre.leggauss(8)


def exp_quad_weights(c, h, n, shift):
    """Like exp_hat_weights but with piecewise-quadratic interpolation on
    panels of two intervals (one leading linear interval when n is odd)."""
    w = np.zeros(n + 1)
    if n == 0:
        return w
    start = n % 2
    if start:
        w[:2] += exp_hat_weights(c, h, 1, shift)
    npan = (n - start) // 2
    if npan == 0:
        return w
    # nodes in a reference panel [0, 2h] and the three Lagrange basis values
    s = h * (1.0 + _GL_T)
    gw = h * _GL_W
    u = s / h
    l0 = 0.5 * (u - 1.0) * (u - 2.0)
    l1 = -u * (u - 2.0)
    l2 = 0.5 * u * (u - 1.0)
    base = np.array([gw @ (l0 * np.exp(c * s)), gw @ (l1 * np.exp(c * s)), gw @ (l2 * np.exp(c * s))])
    t0 = (start + 2 * np.arange(npan)) * h
    scale = np.exp(c * t0 - shift)
    idx = start + 2 * np.arange(npan)
    np.add.at(w, idx, scale * base[0])
    np.add.at(w, idx + 1, scale * base[1])
    np.add.at(w, idx + 2, scale * base[2])
    return w


def power_quad_weights(p, h, n):
    """Weights for int_0^{nh} g(t) t^p dt on the same quadratic panels."""
    w = np.zeros(n + 1)
    if n == 0:
        return w
    start = n % 2
    if start:
        # linear interval [0, h]: int (1 - t/h) t^p and int (t/h) t^p
        w[0] += h ** (p + 1) / ((p + 1) * (p + 2))
        w[1] += h ** (p + 1) / (p + 2)
    s = h * (1.0 + _GL_T)
    gw = h * _GL_W
    u = s / h
    lag = (0.5 * (u - 1.0) * (u - 2.0), -u * (u - 2.0), 0.5 * u * (u - 1.0))
    for k in range((n - start) // 2):
        t0 = (start + 2 * k) * h
        tw = gw * (t0 + s) ** p
        for r in range(3):
            w[start + 2 * k + r] += tw @ lag[r]
    return w


def sinh_cosh_weights(y, h, n):
    """(ws, wc): int_0^x g sinh(yt) dt = e^{yx} ws.g and likewise for cosh, x = n h."""
    x = n * h
    wp = exp_quad_weights(y, h, n, y * x)
    wm = exp_quad_weights(-y, h, n, y * x)
    return 0.5 * (wp - wm), 0.5 * (wp + wm)


def representation_values(kg, kappa_val, x):
    """s0 and c0 at a grid node rebuilt from the kernel, as ScaledValue."""
    i = int(round(x / kg.h))
    if abs(i * kg.h - x) > 1e-12:
        raise DimensionError(f"x = {x} is not a node of the kernel grid")
    N = kg.grid_n
    j = np.arange(0, i + 1)
    Hrow = kg.H()[i, N + j]
    Prow = kg.P()[i, N + j]
    t = j * kg.h
    y = math.sqrt(kappa_val)
    if y == 0.0:
        s0 = x + float(power_quad_weights(1, kg.h, i) @ Hrow)
        c0 = 1.0 + float(power_quad_weights(0, kg.h, i) @ Prow)
        return ScaledValue(s0), ScaledValue(c0)
    ws, wc = sinh_cosh_weights(y, kg.h, i)
    e2 = math.exp(-2 * y * x)
    s0 = ScaledValue((0.5 * (1 - e2) + float(ws @ Hrow)) / y, y * x)
    c0 = ScaledValue(0.5 * (1 + e2) + float(wc @ Prow), y * x)
    return s0, c0


def representation_check(kg, z, x):
    """Relative residuals of the kernel representation of s0, c0 against the
    shooting solver at kappa = z."""
    s_rep, c_rep = representation_values(kg, z, x)
    st, lg = solutions_at(kg.q_ref, z, [x], "left")
    c, _, s, _ = st[0]
    return s_rep.rel_diff(ScaledValue(s, lg[0])), c_rep.rel_diff(ScaledValue(c, lg[0]))


# ---------------------------------------------------------------------------
# integral operators


@njit
def _trap(vals, lo, hi, h):
    if hi <= lo:
        return 0.0
    s = 0.5 * (vals[lo] + vals[hi])
    for j in range(lo + 1, hi):
        s += vals[j]
    return s * h


@njit
def _pair_terms(A, Bk, N, h, out, sign4, sign5, wdiag):
    """Accumulate the five kernel terms built from the pair (A, Bk) into
    out[i, k] (x_i, tau_k).  A, Bk have layout [i, N + j]."""
    buf = np.zeros(N + 1)
    for i in range(N + 1):
        for k in range(i + 1):
            val = wdiag * (A[i, N + 2 * k - i] + Bk[i, N + 2 * k - i])
            lo = max(0, 2 * k - i)
            hi = min(i, 2 * k)
            if hi > lo:
                for j in range(lo, hi + 1):
                    buf[j] = A[i, N + 2 * k - j] * Bk[i, N + j]
                val += wdiag * _trap(buf, lo, hi, h)
            if i > 2 * k:
                for j in range(2 * k, i + 1):
                    buf[j] = A[i, N + j] * Bk[i, N + j - 2 * k]
                val += wdiag * sign4 * _trap(buf, 2 * k, i, h)
                for j in range(2 * k, i + 1):
                    buf[j] = A[i, N + j - 2 * k] * Bk[i, N + j]
                val += wdiag * sign5 * _trap(buf, 2 * k, i, h)
            out[i, k] += val
    return out


def _x_weights_matrix(kernel, h):
    """C[k, i] = trapezoid weight in x over [tau_k, 1] times kernel[i, k]."""
    N = kernel.shape[0] - 1
    C = np.zeros((N + 1, N + 1))
    for k in range(N):
        w = np.full(N + 1 - k, h)
        w[0] = w[-1] = 0.5 * h
        C[k, k:] = w * kernel[k:, k]
    return C


@dataclass(frozen=True, eq=False)
class IntegralOperator:
    """Operator (identity_weight) * L(tau) + int_tau^1 kernel(x, tau) L(x) dx on the grid."""
    kind: str
    kernel: np.ndarray = field(repr=False)     # [i, k] -> (x_i, tau_k)
    matrix: np.ndarray = field(repr=False)     # Volterra part, acts on grid values
    grid_n: int = DEFAULT_GRID
    identity_weight: float = 1.0

    @property
    def h(self):
        return 1.0 / self.grid_n

    @property
    def tau(self):
        return np.arange(self.grid_n + 1) * self.h

    @property
    def norm_bound(self):
        return float(np.max(np.abs(self.kernel)))

    def sample(self, L):
        if callable(L):
            return np.asarray(L(self.tau), dtype=float) * np.ones(self.grid_n + 1)
        L = np.asarray(L, dtype=float)
        if L.shape != (self.grid_n + 1,):
            raise DimensionError(f"expected {self.grid_n + 1} grid values, got {L.shape}")
        return L

    def apply(self, L):
        v = self.sample(L)
        return self.identity_weight * v + self.matrix @ v

    __call__ = apply

    def apply_C(self, L):
        return self.matrix @ self.sample(L)

    def C_operator(self):
        return IntegralOperator("C", self.kernel, self.matrix, self.grid_n, 0.0)

    def l2(self, v):
        return l2_norm(v, self.h)


def l2_norm(v, h):
    w = np.full(len(v), h)
    w[0] = w[-1] = 0.5 * h
    return float(math.sqrt(np.sum(w * np.asarray(v) ** 2)))


def _check_pair(kg, kg_t):
    if kg.grid_n != kg_t.grid_n:
        raise DimensionError(f"kernel grids differ: {kg.grid_n} vs {kg_t.grid_n}")


def build_B(q, q_tilde, kg, kg_tilde):
    """B = Q + R with

    int_0^1 [c0 s0~ + c0~ s0] L dx = (1/y) int_0^1 sinh(2 tau y) (BL)(tau) dtau.
    """
    _check_pair(kg, kg_tilde)
    N = kg.grid_n
    H, P = kg.H(), kg.P()
    Ht, Pt = kg_tilde.H(), kg_tilde.P()
    ker = np.zeros((N + 1, N + 1))
    # Q: (P~, H) ; R: (P, H~).  The t-reflected piece enters with a minus sign.
    _pair_terms(Pt, H, N, kg.h, ker, -1.0, 1.0, 1.0)
    _pair_terms(P, Ht, N, kg.h, ker, -1.0, 1.0, 1.0)
    return IntegralOperator("B", ker, _x_weights_matrix(ker, kg.h), N, 1.0)


def build_D(q, q_tilde, kg, kg_tilde):
    """D = I + C with

    int_0^1 s0 s0~ L dx = (1/(2 y^2)) [int_0^1 cosh(2 tau y) (DL)(tau) dtau - int_0^1 L].
    """
    _check_pair(kg, kg_tilde)
    N = kg.grid_n
    ker = np.zeros((N + 1, N + 1))
    _pair_terms(kg_tilde.H(), kg.H(), N, kg.h, ker, -1.0, -1.0, 2.0)
    return IntegralOperator("D", ker, _x_weights_matrix(ker, kg.h), N, 1.0)


@dataclass(frozen=True)
class InversionResult:
    h: np.ndarray
    term_norms: tuple
    residual: float

    def __array__(self, dtype=None):
        return self.h if dtype is None else self.h.astype(dtype)


def invert_B(B, g, tol=1e-12, max_terms=200):
    """Neumann series sum_n (-C)^n g."""
    g = B.sample(g)
    gnorm = float(np.max(np.abs(g)))
    h = g.copy()
    term = g.copy()
    norms = [gnorm]
    if gnorm == 0.0:
        return InversionResult(h, tuple(norms), 0.0)
    for n in range(1, max_terms + 1):
        term = -(B.matrix @ term)
        tn = float(np.max(np.abs(term)))
        norms.append(tn)
        h += term
        if tn < tol * gnorm:
            break
        if n >= 30 and tn >= norms[-2]:
            raise InversionError(f"Neumann terms stopped decreasing at n = {n} ({tn:.3e})")
    else:
        raise InversionError("Neumann series did not reach tolerance")
    res = B.l2(B.apply(h) - g) / max(B.l2(g), 1e-300)
    return InversionResult(h, tuple(norms), res)


def C_power_norms(op, h, n_max=6):
    """sup|C^n h| for n = 1..n_max."""
    v = op.sample(h)
    out = []
    for _ in range(n_max):
        v = op.matrix @ v
        out.append(float(np.max(np.abs(v))))
    return out


# ---------------------------------------------------------------------------
# identities


def gauss_nodes(series_list, total=512):
    """Composite Gauss-Legendre nodes respecting all breakpoints."""
    brk = np.unique(np.concatenate([s.breaks for s in series_list]))
    npieces = len(brk) - 1
    per = max(16, total // npieces)
    t, w = np.polynomial.legendre.leggauss(per)
    xs, ws = [], []
    for a, b in zip(brk[:-1], brk[1:]):
        xs.append(0.5 * (a + b) + 0.5 * (b - a) * t)
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def scaled_sum(values, logs):
    """sum_i values_i * exp(logs_i) as a ScaledValue."""
    values = np.asarray(values, dtype=float)
    logs = np.asarray(logs, dtype=float)
    nz = values != 0.0
    if not np.any(nz):
        return ScaledValue(0.0)
    la = logs[nz] + np.log(np.abs(values[nz]))
    top = float(np.max(la))
    return ScaledValue(float(np.sum(np.sign(values[nz]) * np.exp(la - top))), top)


def _left_solutions(q, z, xs):
    st, lg = solutions_at(q, z, xs, "left")
    return st[:, 0], st[:, 2], lg   # c0, s0, log-scale


def _normalised_residual(lhs, rhs):
    num = lhs - rhs
    if num.mantissa == 0.0:
        return 0.0
    den = abs(lhs) + abs(rhs) + ScaledValue(1.0)
    return math.exp(num.log_abs - den.log_abs)


def integral_identity_terms(q, q_tilde, z, nodes=512):
    """(lhs, rhs) ScaledValue pairs of the three Weyl/potential identities."""
    w, wt = weyl_functions(q, z), weyl_functions(q_tilde, z)
    xs, ws = gauss_nodes([q.series, q_tilde.series], nodes)
    c0, s0, lg = _left_solutions(q, z, xs)
    ct, st, lgt = _left_solutions(q_tilde, z, xs)
    L = q.series(xs) - q_tilde.series(xs)
    D, Dt = w.Delta, wt.Delta
    DD = D * Dt
    one = ScaledValue(1.0)
    out = {}
    # theta = c0' s0~ - c0 s0~' between 0 and 1
    lhs = DD * (w.M * (w.N - wt.N)) - Dt / D + one
    out["c0 s0~"] = (lhs, scaled_sum(ws * L * c0 * st, lg + lgt))
    lhs = DD * (wt.M * (wt.N - w.N)) - D / Dt + one
    out["c0~ s0"] = (lhs, scaled_sum(-ws * L * ct * s0, lg + lgt))
    lhs = DD * (wt.N - w.N)
    out["s0 s0~"] = (lhs, scaled_sum(ws * L * s0 * st, lg + lgt))
    return out


def integral_identity_residual(q, q_tilde, z, nodes=512):
    terms = integral_identity_terms(q, q_tilde, z, nodes)
    return max(_normalised_residual(a, b) for a, b in terms.values())


def b_identity(B, q, q_tilde, L, y, nodes=512):
    """Both sides of int [c0 s0~ + c0~ s0] L = (1/y) int sinh(2 tau y) BL; returns
    (lhs, rhs) as ScaledValue."""
    z = y * y
    xs, ws = gauss_nodes([q.series, q_tilde.series], nodes)
    c0, s0, lg = _left_solutions(q, z, xs)
    ct, st, lgt = _left_solutions(q_tilde, z, xs)
    Lx = np.asarray(L(xs), dtype=float) * np.ones_like(xs)
    lhs = scaled_sum(ws * Lx * (c0 * st + ct * s0), lg + lgt)
    BL = B.apply(L)
    ws_, _ = sinh_cosh_weights(2 * y, B.h, B.grid_n)
    rhs = ScaledValue(float(ws_ @ BL) / y, 2 * y)
    return lhs, rhs


def d_identity(D, q, q_tilde, L, y):
    """Both sides of (N~ - N) s0(1) s0~(1) = (1/(2y^2)) [int cosh(2 tau y) DL - int L]."""
    z = y * y
    w, wt = weyl_functions(q, z), weyl_functions(q_tilde, z)
    lhs = (w.s0_1 * wt.s0_1) * (wt.N - w.N)
    DL = D.apply(L)
    _, wc = sinh_cosh_weights(2 * y, D.h, D.grid_n)
    Lg = D.sample(L)
    intL = l2_trap(Lg, D.h)
    rhs = (ScaledValue(float(wc @ DL), 2 * y) - ScaledValue(intL)) / (2 * y * y)
    return lhs, rhs


def l2_trap(v, h):
    w = np.full(len(v), h)
    w[0] = w[-1] = 0.5 * h
    return float(np.sum(w * v))
