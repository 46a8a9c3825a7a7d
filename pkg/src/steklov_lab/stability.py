"""End-to-end stability experiments.

The Steklov chain: spectra -> measured closeness eps -> B applied to
L = q - q~ -> a function h on (0, 1] whose Müntz moments are small ->
projection bound on ||h|| -> Neumann inversion of B -> bound on ||q - q~||.
The Calderón chain is the same with the D operator and unshifted exponents.
Everything is computed from both factors, so each stage can be compared with
the directly measured potential gap.
"""
from dataclasses import asdict, dataclass, field
import math

import numpy as np
from scipy.interpolate import CubicSpline

from . import muntz
from .compare import smallest_closeness_eps, spectra_close
from .dnmap import calderon_norm_difference, kappa, steklov_spectrum
from .errors import DivergingNormError, PreconditionError, SteklovLabError
from .geometry import ConformalFactor, is_symmetric, potential_from_factor
from .ode import weyl_functions
from .scaled import ScaledValue
from .transform import build_B, build_D, invert_B, l2_norm, solve_kernel

E1, E2 = math.exp(-1.0), math.exp(-2.0)


@dataclass
class StabilityConfig:
    m_max: int = 40
    grid_n: int = 256
    muntz_m: int = 24
    m0: int = 1
    nodes: int = 512
    threads: int = 1
    M1: float = 2.0
    jackson_range: tuple = (5, 24)
    symmetry_tol: float = 1e-10
    endpoint_tol: float = 1e-10

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in (d or {}).items() if k in cls.__dataclass_fields__}
        if "jackson_range" in known:
            known["jackson_range"] = tuple(known["jackson_range"])
        return cls(**known)


@dataclass
class ExperimentRecord:
    mode: str
    eps: float
    spectral_gap_check: dict
    trace_det_gaps: list
    q_gap_L2: float
    q_gap_sup: float
    f_gap_sup: float
    bound_product: float
    chain: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    weyl_gaps: list = field(default_factory=list)
    corollary: dict = field(default_factory=dict)
    label: str = ""

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass(frozen=True)
class WeylGap:
    m: int
    y: float
    mn_gap: float
    trace_gap: float
    det_gap: float


class StageFailure(SteklovLabError):
    """Wraps an error from one pipeline stage; ``archive`` holds the finished stages."""

    def __init__(self, err, archive):
        super().__init__(f"{type(err).__name__}: {err}", stage=getattr(err, "stage", "stability"))
        self.cause = err
        self.archive = archive


# ---------------------------------------------------------------------------
# per-block Weyl combinations


def _combination(w):
    inv2 = w.inv_Delta * w.inv_Delta
    return w.M * w.N, inv2


def discrete_weyl_gaps(f, f_tilde, n, omega, m_range, q=None, q_tilde=None, check_symmetry=True):
    """Per-block gaps of M N - 1/Delta^2, of the block trace and of the block determinant."""
    if check_symmetry:
        for name, g in (("f", f), ("f~", f_tilde)):
            if not is_symmetric(g.series):
                raise PreconditionError(f"{name} is not symmetric about x = 1/2", stage="weyl-gaps")
    q = q if q is not None else potential_from_factor(f, n, omega)
    qt = q_tilde if q_tilde is not None else potential_from_factor(f_tilde, n, omega)
    out = []
    from .dnmap import FactorData, block_from_weyl
    fd, fdt = FactorData.of(f, n), FactorData.of(f_tilde, n)
    for m in m_range:
        z = float(kappa(m, n))
        w, wt = weyl_functions(q, z), weyl_functions(qt, z)
        a, ia = _combination(w)
        b, ib = _combination(wt)
        mn_gap = abs((a - b) - float(ia - ib))
        blk, blkt = block_from_weyl(w, fd), block_from_weyl(wt, fdt)
        tr = abs((blk.lambda_minus + blk.lambda_plus) - (blkt.lambda_minus + blkt.lambda_plus))
        det = abs(blk.lambda_minus * blk.lambda_plus - blkt.lambda_minus * blkt.lambda_plus)
        out.append(WeylGap(int(m), math.sqrt(z), float(mn_gap), float(tr), float(det)))
    return out


# ---------------------------------------------------------------------------
# shared pieces


def _gl_norms(d, nodes):
    """L2 and sup norms of a series-valued difference, plus its H1 norm."""
    xs, ws = muntz.composite_gauss(d.breaks, nodes)
    v = d(xs)
    dv = d.deriv(1)(xs)
    grid = np.linspace(0.0, 1.0, 4001)
    l2 = math.sqrt(float(ws @ v ** 2))
    h1 = math.sqrt(float(ws @ (v ** 2 + dv ** 2)))
    return l2, float(np.max(np.abs(d(grid)))), h1


def _operator_inverse_norm(op):
    """Discrete L2 operator norm of (I + C)^-1 with trapezoid weights."""
    N = op.grid_n
    w = np.full(N + 1, op.h)
    w[0] = w[-1] = 0.5 * op.h
    A = op.identity_weight * np.eye(N + 1) + op.matrix
    Ainv = np.linalg.inv(A)
    sw = np.sqrt(w)
    return float(np.linalg.norm(sw[:, None] * Ainv / sw[None, :], 2))


def _h_from_grid(values, h_grid, alpha, reflected_sign):
    """t -> t^alpha g(-ln t), g(s) = v(1-s) on [0,1], sign * v(s-1) on [1,2]."""
    tau = np.arange(len(values)) * h_grid
    sp = CubicSpline(tau, values)

    def h(t):
        t = np.asarray(t, float)
        out = np.zeros_like(t)
        with np.errstate(divide="ignore"):
            s = -np.log(np.where(t > 0, t, 1.0))
        a = (t >= E1) & (t <= 1.0)
        b = (t >= E2) & (t < E1)
        out[a] = sp(np.clip(1.0 - s[a], 0.0, 1.0))
        out[b] = reflected_sign * sp(np.clip(s[b] - 1.0, 0.0, 1.0))
        return out * np.where(t > 0, t, 1.0) ** alpha
    return h


def _moment_chain(op, L_grid, sysm, alpha, reflected_sign, eps, cfg, archive):
    """Moment/projection/inversion chain shared by both experiments."""
    BL = op.apply(L_grid)
    archive["operator_image_norm"] = op.l2(BL)
    h = _h_from_grid(BL, op.h, alpha, reflected_sign)
    breaks = (0.0, E2, E1, 1.0)
    x, w = muntz.composite_gauss(breaks, cfg.nodes)
    hv = h(x)
    h_norm2 = float(w @ hv ** 2)
    split = abs(h_norm2 - float(w @ (hv * (x >= E1)) ** 2) - float(w @ (hv * (x < E1)) ** 2))
    h1_norm = math.sqrt(float(w @ (hv * (x >= E1)) ** 2))
    # h1 carries g on [0, 1]; there t^(-2 alpha - 1) <= max(1, e^(2 alpha + 1))
    c_alpha = max(1.0, math.exp(alpha + 0.5))
    archive["h_norm"] = math.sqrt(h_norm2)

    mm = min(cfg.muntz_m, sysm.size - 1)
    mb_all = muntz.moment_bound(0.0, sysm, h, mm, breaks, cfg.nodes)
    moments = np.abs(mb_all.moments)
    rls = mb_all.row_log_sums
    cum_S = np.cumsum(np.exp(2 * rls))
    bounds = []
    for m in range(mm + 1):
        e2 = muntz.project(sysm, h, m, breaks, cfg.nodes).resid_norm2
        eps_m = float(np.max(moments[:m + 1]))
        bounds.append(math.sqrt(eps_m ** 2 * cum_S[m] + max(e2, 0.0)))
    bounds = np.array(bounds)
    mom_const = float(np.max(moments) / eps) if eps > 0 else math.inf

    lo, hi = cfg.jackson_range
    js = [m for m in range(lo, min(hi, mm) + 1)]
    jack = muntz.jackson_constant(sysm, h, js, breaks, cfg.nodes) if js else np.array([0.0])
    C_J = float(jack[-1]) if len(jack) else 0.0
    tr = muntz.truncation_rule(eps, max(C_J, 1e-12), cfg.M1) if eps > 0 else muntz.Truncation(mm, 0.0, "eps = 0")
    m_eps = min(tr.m, mm)
    binv = _operator_inverse_norm(op)
    inv = invert_B(op, BL)
    recovered = l2_norm(np.asarray(inv.h) - L_grid, op.h)
    us = np.array([0.02, 0.05, 0.1, 0.2])
    wmod = np.array([muntz.modulus_of_continuity(h, u, cfg.nodes) for u in us])
    chain = {
        "alpha": alpha,
        "c_alpha": c_alpha,
        "B_inverse_norm": binv,
        "operator_image_norm": op.l2(BL),
        "h_norm": math.sqrt(h_norm2),
        "h1_norm": h1_norm,
        "split_residual": split,
        "pythagoras_residual": mb_all.pythagoras_residual,
        "moment_constant": mom_const,
        "moments": moments.tolist(),
        "m_eps": m_eps,
        "truncation_flag": tr.flag,
        "h_bound_at_m_eps": float(bounds[m_eps]),
        "h_bound_best": float(bounds.min()),
        "m_best": int(np.argmin(bounds)),
        "chain_bound": binv * c_alpha * float(bounds[m_eps]),
        "chain_bound_best": binv * c_alpha * float(bounds.min()),
        "jackson_ms": js,
        "jackson_constant": jack.tolist(),
        "jackson_growth": float(jack[-1] / jack[0]) if len(jack) and jack[0] > 0 else 1.0,
        "modulus_u": us.tolist(),
        "modulus_over_u": (wmod / us).tolist(),
        "modulus_over_sqrt_u": (wmod / np.sqrt(us)).tolist(),
        "inversion_error": recovered,
        "neumann_terms": len(inv.term_norms),
    }
    return chain


def _corollary_f_gap(f, ft, n, nodes):
    """Sup-norm factor gap through F = f^((n-2)/4), F'' = q F (omega = 0).

    W = F~ F' - F~' F vanishes at some x0 when the endpoint values agree;
    then W(x) = int_{x0}^x F~ F (q - q~) and F/F~ - 1 = int_0^x W / F~^2.
    """
    p = (n - 2) / 4.0
    ev, evt = f.exact, ft.exact

    def parts(g, e, x):
        if e is not None:
            return e(x, 0), e(x, 1)
        return g.series(x), g.series.deriv(1)(x)

    def W(x):
        a, da = parts(f, ev, x)
        b, db = parts(ft, evt, x)
        return b ** p * p * a ** (p - 1) * da - p * b ** (p - 1) * db * a ** p

    grid = np.linspace(0.0, 1.0, 2001)
    Wg = W(grid)
    sc = np.nonzero(np.sign(Wg[:-1]) * np.sign(Wg[1:]) <= 0)[0]
    x0, note = None, ""
    if sc.size:
        a, b = grid[sc[0]], grid[sc[0] + 1]
        for _ in range(60):
            mid = 0.5 * (a + b)
            if np.sign(W(np.array([a]))[0]) * np.sign(W(np.array([mid]))[0]) <= 0:
                b = mid
            else:
                a = mid
        x0 = 0.5 * (a + b)
    else:
        note = "no sign change of F~F' - F~'F found"
    F = f.series(grid) ** p
    Ft = ft.series(grid) ** p
    q = potential_from_factor(f, n, 0.0)
    qt = potential_from_factor(ft, n, 0.0)
    dq = q.series - qt.series
    # rebuild F/F~ from the identity, using q - q~ only
    xs = np.linspace(0.0, 1.0, 8001)
    Fx, Ftx = f.series(xs) ** p, ft.series(xs) ** p
    integrand = Ftx * Fx * dq(xs)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(xs))])
    Wx = cum - (np.interp(x0, xs, cum) if x0 is not None else 0.0)
    ratio = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(xs) * ((Wx / Ftx ** 2)[1:] + (Wx / Ftx ** 2)[:-1]))])
    F_path = Ftx * (1.0 + ratio)
    f_path = np.maximum(F_path, 1e-300) ** (1.0 / p)
    direct = float(np.max(np.abs(f.series(grid) - ft.series(grid))))
    path = float(np.max(np.abs(f_path - ft.series(xs))))
    l2, _, _ = _gl_norms(dq, nodes)
    const = float(np.max(Ft) / np.min(Ft) ** 2 * np.max(Ft * F))
    lip = float(max(np.max(F), np.max(Ft)) ** (1.0 / p - 1.0) / p) if p < 1 else float(
        max(np.min(F), np.min(Ft)) ** (1.0 / p - 1.0) / p)
    return {
        "x0": x0,
        "note": note,
        "f_gap_direct": direct,
        "f_gap_identity": path,
        "identity_mismatch": abs(direct - path),
        "f_gap_bound": lip * const * l2,
    }


def _spectra(f, ft, n, omega, cfg, qs):
    q, qt = qs
    S = steklov_spectrum(f, n, omega, cfg.m_max, cfg.threads, q=q)
    St = steklov_spectrum(ft, n, omega, cfg.m_max, cfg.threads, q=qt)
    return S, St


def _run(stage, fn, archive):
    try:
        out = fn()
    except StageFailure:
        raise
    except SteklovLabError as err:
        if err.stage == "unknown":
            err.stage = stage
        raise StageFailure(err, dict(archive)) from err
    archive[stage] = "done"
    return out


# ---------------------------------------------------------------------------
# drivers


def run_steklov_stability(f, f_tilde, n, omega=0.0, config=None, label=""):
    cfg = config if isinstance(config, StabilityConfig) else StabilityConfig.from_dict(config)
    archive = {}
    for name, g in (("f", f), ("f~", f_tilde)):
        if not is_symmetric(g.series, cfg.symmetry_tol):
            raise PreconditionError(f"{name} is not symmetric about x = 1/2", stage="stability")
    q, qt = _run("potential", lambda: (potential_from_factor(f, n, omega),
                                        potential_from_factor(f_tilde, n, omega)), archive)
    S, St = _run("spectrum", lambda: _spectra(f, f_tilde, n, omega, cfg, (q, qt)), archive)
    eps = smallest_closeness_eps(S, St)
    rep = spectra_close(S, St, eps)
    archive["eps"] = eps
    lm, lmt = S.column("lambda_minus"), St.column("lambda_minus")
    lp, lpt = S.column("lambda_plus"), St.column("lambda_plus")
    aligned = bool(np.max(np.maximum(np.abs(lm - lmt), np.abs(lp - lpt))) <= eps * (1 + 1e-9))
    td = [(float(abs((a + b) - (c + d))), float(abs(a * b - c * d)))
          for a, b, c, d in zip(lm, lp, lmt, lpt)]
    wg = _run("weyl-gaps", lambda: discrete_weyl_gaps(
        f, f_tilde, n, omega, range(cfg.m_max // 2, cfg.m_max + 1), q, qt, check_symmetry=False), archive)
    dq = q.series - qt.series
    l2, sup, h1 = _gl_norms(dq, cfg.nodes)

    def chain():
        kg, kgt = solve_kernel(q, cfg.grid_n), solve_kernel(qt, cfg.grid_n)
        B = build_B(q, qt, kg, kgt)
        L = dq(B.tau)
        sysm = muntz.muntz_sequence(n, cfg.m0, cfg.m0 + cfg.muntz_m)
        return _moment_chain(B, L, sysm, sysm.alpha, -1.0, eps, cfg, archive), l2_norm(L, B.h)
    ch, l2_grid = _run("moment-chain", chain, archive)
    ch["q_gap_L2_grid"] = l2_grid

    cor = {}
    f_gap = float(np.max(np.abs(f.series(np.linspace(0, 1, 4001)) - f_tilde.series(np.linspace(0, 1, 4001)))))
    if omega == 0 and n >= 3:
        cor = _corollary_f_gap(f, f_tilde, n, cfg.nodes)
    ratios = [g.det_gap / (eps * g.y) if eps > 0 else 0.0 for g in wg]
    checks = {
        "direct_gap_within_chain_bound": l2_grid <= ch["chain_bound"] * (1 + 1e-9) + 1e-14,
        "h_within_moment_bound": ch["h_norm"] <= ch["h_bound_at_m_eps"] * (1 + 1e-9) + 1e-14,
        "disjoint_split": ch["split_residual"] <= 1e-10 * max(1.0, ch["h_norm"] ** 2),
        "pythagoras": ch["pythagoras_residual"] <= 1e-8 * max(1.0, ch["h_norm"] ** 2),
        "sobolev_sup": sup <= 2 * h1 + 1e-14,
    }
    if cor:
        checks["f_gap_within_bound"] = cor["f_gap_direct"] <= cor["f_gap_bound"] * (1 + 1e-6) + 1e-12
    summary = {"holds": rep.holds, "window": rep.window, "worst_gap": max((r.gap for r in rep.per_eigenvalue), default=0.0),
               "pairing_aligned": aligned, "ambiguous_blocks": list(rep.ambiguous),
               "det_gap_over_eps_y": ratios}
    bp = l2 * math.log(1.0 / eps) if eps > 0 else 0.0
    return ExperimentRecord("steklov", eps, summary, td, l2, sup, f_gap, bp, ch, checks,
                            [asdict(g) for g in wg], cor, label)


def run_calderon_stability(f, f_tilde, n, omega=0.0, config=None, label=""):
    cfg = config if isinstance(config, StabilityConfig) else StabilityConfig.from_dict(config)
    archive = {}
    q, qt = _run("potential", lambda: (potential_from_factor(f, n, omega),
                                        potential_from_factor(f_tilde, n, omega)), archive)
    S, St = _run("spectrum", lambda: _spectra(f, f_tilde, n, omega, cfg, (q, qt)), archive)
    cal = calderon_norm_difference(f, f_tilde, n, omega, cfg.m_max, cfg.threads, spectra=(S, St))
    mism = [abs(float(f(x)) - float(f_tilde(x))) for x in (0.0, 1.0)]
    if cal.diverging or max(mism) > cfg.endpoint_tol:
        err = DivergingNormError(
            f"block norms grow with slope {cal.slope:.4g} (endpoint value mismatch {max(mism):.3g}); "
            "the operator difference is unbounded", stage="calderon")
        err.result = cal
        raise err
    dq = q.series - qt.series
    l2, sup, h1 = _gl_norms(dq, cfg.nodes)
    xs, ws = muntz.composite_gauss(dq.breaks, cfg.nodes)
    mean_gap = abs(float(ws @ dq(xs)))
    eps = mean_gap + cal.norm
    n_gaps = [abs(b.weyl.N - bt.weyl.N) for b, bt in zip(S.blocks, St.blocks)]

    def chain():
        kg, kgt = solve_kernel(q, cfg.grid_n), solve_kernel(qt, cfg.grid_n)
        D = build_D(q, qt, kg, kgt)
        L = dq(D.tau)
        sysm = muntz.muntz_sequence(n, 0, cfg.muntz_m, shifted=True)
        return _moment_chain(D, L, sysm, sysm.alpha, 1.0, eps, cfg, archive), l2_norm(L, D.h)
    ch, l2_grid = _run("moment-chain", chain, archive)
    ch["q_gap_L2_grid"] = l2_grid
    checks = {
        "direct_gap_within_chain_bound": l2_grid <= ch["chain_bound"] * (1 + 1e-9) + 1e-14,
        "h_within_moment_bound": ch["h_norm"] <= ch["h_bound_at_m_eps"] * (1 + 1e-9) + 1e-14,
        "disjoint_split": ch["split_residual"] <= 1e-10 * max(1.0, ch["h_norm"] ** 2),
        "pythagoras": ch["pythagoras_residual"] <= 1e-8 * max(1.0, ch["h_norm"] ** 2),
        "sobolev_sup": sup <= 2 * h1 + 1e-14,
    }
    summary = {"mean_gap": mean_gap, "block_norm": cal.norm, "slope": cal.slope,
               "N_gap_over_eps": [g / eps if eps > 0 else 0.0 for g in n_gaps]}
    td = [(float(abs((b.lambda_minus + b.lambda_plus) - (bt.lambda_minus + bt.lambda_plus))),
           float(abs(b.lambda_minus * b.lambda_plus - bt.lambda_minus * bt.lambda_plus)))
          for b, bt in zip(S.blocks, St.blocks)]
    f_gap = float(np.max(np.abs(f.series(np.linspace(0, 1, 4001)) - f_tilde.series(np.linspace(0, 1, 4001)))))
    bp = l2 * math.log(1.0 / eps) if 0 < eps < 1 else float("nan")
    return ExperimentRecord("calderon", eps, summary, td, l2, sup, f_gap, bp, ch, checks, [], {}, label)


# ---------------------------------------------------------------------------
# families


def symmetric_bump_family(base, deltas, center=0.5, half_width=0.2, power=6, degree=64):
    """Pairs (delta, f, f + delta * bump) with a bump symmetric about x = 1/2.

    The bump is a polynomial bump supported away from both ends, so endpoint
    values and derivatives are unchanged and symmetry is kept. ``center`` other
    than 1/2 places a mirrored pair of bumps.
    """
    if not deltas:
        raise ValueError("empty delta list")
    base_spec = base if isinstance(base, dict) else {"kind": "constant", "value": float(base)}
    if abs(center - 0.5) < 1e-15:
        bumps = [(0.5 - half_width, 0.5 + half_width)]
    else:
        bumps = [(center - half_width, center + half_width),
                 (1 - center - half_width, 1 - center + half_width)]
    f = ConformalFactor.from_spec(base_spec, degree)
    out = []
    for d in deltas:
        terms = [base_spec] + [{"kind": "poly-bump", "amplitude": float(d), "left": a, "right": b,
                                "power": power} for a, b in bumps]
        out.append((float(d), f, ConformalFactor.from_spec({"kind": "sum", "terms": terms}, degree)))
    return out


def pinned_bump_family(base, deltas, left=0.1, right=0.45, power=6, degree=64):
    """Asymmetric pairs with equal endpoint values (a single off-centre bump)."""
    if not deltas:
        raise ValueError("empty delta list")
    base_spec = base if isinstance(base, dict) else {"kind": "constant", "value": float(base)}
    f = ConformalFactor.from_spec(base_spec, degree)
    out = []
    for d in deltas:
        terms = [base_spec, {"kind": "poly-bump", "amplitude": float(d), "left": left, "right": right,
                             "power": power}]
        out.append((float(d), f, ConformalFactor.from_spec({"kind": "sum", "terms": terms}, degree)))
    return out
