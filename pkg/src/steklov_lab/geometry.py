"""Conformal factors, the potential they induce, admissibility classes and the
x -> 1 - x involution."""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, DomainError, ResolutionError
from .series import DEFAULT_DEGREE, ChebSeries

GRID = np.linspace(0.0, 1.0, 1024)
RESOLUTION_TOL = 1e-8


# ---------------------------------------------------------------------------
# exact evaluators; each returns the k-th derivative (k = 0, 1, 2) at x


def _constant(value=1.0):
    def ev(x, k):
        return np.full_like(x, value if k == 0 else 0.0, dtype=float)
    return ev, []


def _affine(a=1.0, b=0.0):
    def ev(x, k):
        if k == 0:
            return a + b * x
        return np.full_like(x, b if k == 1 else 0.0, dtype=float)
    return ev, []


def _polynomial(coeffs=(1.0,)):
    p = np.polynomial.Polynomial(coeffs)

    def ev(x, k):
        return p.deriv(k)(x) if k else p(x)
    return ev, []


def _exponential(scale=1.0, rate=1.0, shift=0.0):
    def ev(x, k):
        return scale * rate ** k * np.exp(rate * (x - shift))
    return ev, []


def _gaussian_bump(base=1.0, amplitude=0.1, center=0.5, width=0.15):
    def ev(x, k):
        s = (x - center) / width
        g = amplitude * np.exp(-0.5 * s * s)
        if k == 0:
            return base + g
        if k == 1:
            return -s / width * g
        return (s * s - 1.0) / width ** 2 * g
    return ev, []


def _fourier(base=1.0, cos=(), sin=()):
    cos = list(cos)
    sin = list(sin)

    def ev(x, k):
        out = np.full_like(x, base if k == 0 else 0.0, dtype=float)
        for j, a in enumerate(cos, start=1):
            w = j * math.pi
            out = out + a * w ** k * np.cos(w * x + k * math.pi / 2)
        for j, b in enumerate(sin, start=1):
            w = j * math.pi
            out = out + b * w ** k * np.sin(w * x + k * math.pi / 2)
        return out
    return ev, []


def _poly_bump(amplitude=0.1, left=0.0, right=0.4, power=4):
    """amplitude * (4 (x-l)(r-x) / (r-l)^2)^power on [l, r], zero elsewhere.

    A piecewise polynomial of class C^{power-1}; breakpoints at l and r keep
    each piece exactly polynomial.
    """
    half2 = (right - left) ** 2 / 4.0
    p = int(power)
    # u(x) = (x-l)(r-x)/half2, u' = (l + r - 2x)/half2, u'' = -2/half2
    def ev(x, k):
        inside = (x >= left) & (x <= right)
        u = np.where(inside, (x - left) * (right - x) / half2, 0.0)
        du = (left + right - 2.0 * x) / half2
        if k == 0:
            val = u ** p
        elif k == 1:
            val = p * u ** (p - 1) * du if p >= 1 else 0.0 * u
        else:
            val = (p * (p - 1) * u ** (p - 2) * du * du if p >= 2 else 0.0 * u) - 2.0 * p / half2 * u ** (p - 1)
        return np.where(inside, amplitude * val, 0.0)
    brk = [b for b in (left, right) if 0.0 < b < 1.0]
    return ev, brk


def _sum(terms=()):
    parts = [_build_evaluator(t) for t in terms]

    def ev(x, k):
        out = np.zeros_like(x, dtype=float)
        for e, _ in parts:
            out = out + e(x, k)
        return out
    brk = sorted({b for _, bs in parts for b in bs})
    return ev, brk


def _product(terms=()):
    parts = [_build_evaluator(t) for t in terms]
    if len(parts) != 2:
        raise ConfigError("product factors take exactly two terms")
    (e1, b1), (e2, b2) = parts

    def ev(x, k):
        if k == 0:
            return e1(x, 0) * e2(x, 0)
        if k == 1:
            return e1(x, 1) * e2(x, 0) + e1(x, 0) * e2(x, 1)
        return e1(x, 2) * e2(x, 0) + 2 * e1(x, 1) * e2(x, 1) + e1(x, 0) * e2(x, 2)
    return ev, sorted(set(b1) | set(b2))


KINDS = {
    "constant": _constant,
    "affine": _affine,
    "polynomial": _polynomial,
    "exponential": _exponential,
    "gaussian-bump": _gaussian_bump,
    "fourier": _fourier,
    "poly-bump": _poly_bump,
    "sum": _sum,
    "product": _product,
}


def _build_evaluator(spec):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"factor spec needs a 'kind': {spec!r}")
    kind = spec["kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown factor kind {kind!r}; expected one of {sorted(KINDS)}")
    params = {k: v for k, v in spec.items() if k != "kind"}
    try:
        return KINDS[kind](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind!r}: {exc}") from None


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    """Positive factor f on [0, 1] held as a (piecewise) Chebyshev series.

    ``exact`` is an optional callable ``exact(x, k)`` returning the k-th
    derivative in closed form; ``closed_form_tag`` names it.
    """
    series: ChebSeries
    closed_form_tag: str = None
    exact: object = field(default=None, repr=False)
    spec: dict = field(default=None, repr=False)

    @property
    def coeffs(self):
        return self.series.coeffs

    @property
    def degree(self):
        return self.series.degree

    def __call__(self, x):
        return self.series(x)

    def deriv(self, k=1):
        return self.series.deriv(k)

    @classmethod
    def from_spec(cls, spec, degree=DEFAULT_DEGREE):
        ev, brk = _build_evaluator(spec)
        breaks = [0.0] + list(brk) + [1.0]
        series = ChebSeries.from_function(lambda x: ev(x, 0), degree, breaks)
        tag = spec["kind"]
        f = cls(series, tag, ev, dict(spec))
        check_positive(f)
        return f

    @classmethod
    def from_callable(cls, fn, degree=DEFAULT_DEGREE, breaks=(0.0, 1.0), tag=None):
        f = cls(ChebSeries.from_function(fn, degree, breaks), tag)
        check_positive(f)
        return f

    @classmethod
    def constant(cls, value, degree=DEFAULT_DEGREE):
        return cls.from_spec({"kind": "constant", "value": float(value)}, degree)

    def exact_error(self, grid=GRID):
        """Max relative deviation between series and closed form on the grid."""
        if self.exact is None:
            return None
        ref = self.exact(grid, 0)
        return float(np.max(np.abs(self.series(grid) - ref)) / max(np.max(np.abs(ref)), 1e-300))


def check_positive(f):
    vals = f.series(GRID)
    if not np.all(vals > 0.0):
        i = int(np.argmin(vals))
        raise DomainError(f"conformal factor is not positive: f({GRID[i]:.4f}) = {vals[i]:.3g}")


@dataclass(frozen=True, eq=False)
class Potential:
    """Potential q on [0, 1] together with the data that produced it."""
    series: ChebSeries
    omega: float = 0.0
    dim_n: int = 2
    symmetric: bool = False
    tag: str = None

    @property
    def coeffs(self):
        return self.series.coeffs

    def __call__(self, x):
        return self.series(x)

    @classmethod
    def from_callable(cls, fn, degree=DEFAULT_DEGREE, breaks=(0.0, 1.0), tag=None, omega=0.0, dim_n=2):
        s = ChebSeries.from_function(fn, degree, breaks)
        return cls(s, omega, dim_n, is_symmetric(s), tag)

    @classmethod
    def constant(cls, value, tag=None):
        s = ChebSeries.constant(value, degree=8)
        return cls(s, 0.0, 2, True, tag or f"const:{value}")


def is_symmetric(series, tol=1e-10):
    q = series(GRID)
    qf = series(1.0 - GRID)
    return bool(np.max(np.abs(q - qf)) <= tol * (1.0 + np.max(np.abs(q))))


def potential_from_factor(f, n, omega=0.0, degree=None):
    """q = (F''/F) - omega f with F = f^((n-2)/4)."""
    if n < 2 or int(n) != n:
        raise DomainError(f"dimension must be an integer >= 2, got {n}")
    check_positive(f)
    fs = f.series
    if fs.tail_ratio() > RESOLUTION_TOL:
        raise ResolutionError(
            f"factor series not resolved (tail ratio {fs.tail_ratio():.2e}); raise the degree")
    if n == 2:
        q = fs * (-float(omega))
    else:
        p = (n - 2) / 4.0
        if f.exact is not None:
            # closed-form derivatives avoid amplifying series round-off
            d0 = lambda x: f.exact(x, 0)
            d1 = lambda x: f.exact(x, 1)
            d2 = lambda x: f.exact(x, 2)
        else:
            d0, d1, d2 = fs, fs.deriv(1), fs.deriv(2)

        def qfun(x):
            fx = d0(x)
            r1 = d1(x) / fx
            return p * d2(x) / fx + p * (p - 1.0) * r1 * r1 - omega * fx

        deg = degree if degree is not None else max(fs.degree, DEFAULT_DEGREE)
        q = ChebSeries.from_function(qfun, deg, fs.breaks)
        if q.tail_ratio() > RESOLUTION_TOL:
            raise ResolutionError(
                f"second derivative of the factor not resolved (tail ratio {q.tail_ratio():.2e})")
    tag = f"q[{f.closed_form_tag}]" if f.closed_form_tag else None
    return Potential(q, float(omega), int(n), is_symmetric(q), tag)


def apply_involution(obj):
    """Return x -> obj(1 - x) for a factor or a potential."""
    if isinstance(obj, Potential):
        s = obj.series.flip()
        return Potential(s, obj.omega, obj.dim_n, obj.symmetric, obj.tag and obj.tag + "∘η")
    ev = None
    if obj.exact is not None:
        base = obj.exact

        def ev(x, k):
            return (-1.0) ** k * base(1.0 - np.asarray(x, dtype=float), k)
    tag = obj.closed_form_tag and obj.closed_form_tag + "∘η"
    return ConformalFactor(obj.series.flip(), tag, ev, obj.spec)


def log_h_prime(f, n, x):
    """(ln h)'(x) with h = f^(n-2)."""
    return (n - 2) * f.deriv(1)(x) / f(x)


@dataclass(frozen=True)
class ClassReport:
    in_Cb: bool
    in_Db: bool
    in_CA: bool
    first_k: int
    k_max: int
    cb_ratios: tuple
    ca_norms: dict


def class_membership(f, n, omega=0.0, A=10.0, k_max=8):
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    fs = f.series
    # C_b: |f'(k)/f(k)| <= 1/(n-2) at both ends
    ratios = tuple(abs(float(fs.deriv(1)(x) / fs(x))) for x in (0.0, 1.0))
    in_cb = True if n == 2 else all(r <= (1.0 / (n - 2)) * (1 + 1e-12) + 1e-15 for r in ratios)

    q = potential_from_factor(f, n, omega).series
    first = endpoint_mismatch(q, k_max, 1e-8)

    grid = np.concatenate([GRID, fs.breaks])
    inv = float(np.max(1.0 / fs(grid)))
    norms = {k: float(np.max(np.abs(fs.deriv(k)(grid)))) for k in (0, 1, 2)}
    in_ca = all(norms[k] + inv <= A * (1 + 1e-12) for k in (0, 1, 2))
    return ClassReport(in_cb, first is not None, in_ca, first, k_max, ratios,
                       {"sup_f": norms[0], "sup_df": norms[1], "sup_d2f": norms[2], "sup_inv_f": inv})


def endpoint_mismatch(qs, k_max, rtol):
    """Least k with q^(k)(0) != (-1)^k q^(k)(1), or None up to k_max."""
    d = qs
    for k in range(k_max + 1):
        if k:
            d = d.deriv(1)
        a, b = float(d(0.0)), float(d(1.0))
        scale = max(1.0, float(np.max(np.abs(d(GRID)))))
        if abs(a - (-1) ** k * b) > rtol * scale:
            return k
    return None
