"""Piecewise Chebyshev series on [0, 1].

A function is stored as Chebyshev coefficients on each piece of a partition
``0 = b_0 < b_1 < ... < b_P = 1``.  A single piece is the usual global series.
Breakpoints let compactly supported bumps be represented exactly, which keeps
two factors *identical* on a subinterval instead of equal up to series noise.
"""
import numpy as np
from numpy.polynomial import chebyshev as C

from ._jit import njit

DEFAULT_DEGREE = 64


def _cheb_points(deg):
    k = np.arange(deg + 1)
    return np.cos(np.pi * (k + 0.5) / (deg + 1))


@njit
def cheb_eval_scalar(breaks, coeffs, x):
    """Evaluate a piecewise series at one point (numba kernel)."""
    npc = coeffs.shape[0]
    i = 0
    while i < npc - 1 and x >= breaks[i + 1]:
        i += 1
    a = breaks[i]
    b = breaks[i + 1]
    t = (2.0 * x - a - b) / (b - a)
    d = coeffs.shape[1]
    b1 = 0.0
    b2 = 0.0
    for j in range(d - 1, 0, -1):
        tmp = 2.0 * t * b1 - b2 + coeffs[i, j]
        b2 = b1
        b1 = tmp
    return t * b1 - b2 + coeffs[i, 0]


def _chop(c, rel=1e-14):
    """Zero coefficients at round-off level so derivatives do not amplify them."""
    top = np.max(np.abs(c))
    if top == 0.0:
        return c
    c = c.copy()
    c[np.abs(c) < rel * top] = 0.0
    return c


class ChebSeries:
    """Immutable piecewise Chebyshev series."""

    __slots__ = ("breaks", "coeffs")

    def __init__(self, breaks, coeffs):
        breaks = np.asarray(breaks, dtype=float)
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if breaks.ndim != 1 or len(breaks) != coeffs.shape[0] + 1:
            raise ValueError("breaks must have one more entry than coefficient rows")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("breaks must be strictly increasing")
        breaks = breaks.copy()
        coeffs = coeffs.copy()
        breaks.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("ChebSeries is immutable")

    # construction ---------------------------------------------------------
    @classmethod
    def from_function(cls, fn, degree=DEFAULT_DEGREE, breaks=(0.0, 1.0)):
        """Interpolate ``fn`` (vectorized) at Chebyshev points of each piece."""
        breaks = np.asarray(breaks, dtype=float)
        t = _cheb_points(degree)
        V = C.chebvander(t, degree)
        rows = []
        for a, b in zip(breaks[:-1], breaks[1:]):
            x = 0.5 * (a + b) + 0.5 * (b - a) * t
            vals = np.asarray(fn(x), dtype=float) * np.ones_like(x)
            rows.append(_chop(np.linalg.solve(V, vals)))
        return cls(breaks, np.array(rows))

    @classmethod
    def constant(cls, value, degree=0):
        c = np.zeros((1, degree + 1))
        c[0, 0] = value
        return cls([0.0, 1.0], c)

    # basic properties -------------------------------------------------------
    @property
    def degree(self):
        return self.coeffs.shape[1] - 1

    @property
    def npieces(self):
        return self.coeffs.shape[0]

    def tail_ratio(self, ntail=4):
        """Largest trailing coefficient over the largest coefficient, per piece."""
        worst = 0.0
        for row in self.coeffs:
            top = np.max(np.abs(row))
            if top == 0.0 or len(row) <= ntail:
                continue
            worst = max(worst, np.max(np.abs(row[-ntail:])) / top)
        return worst

    # evaluation -------------------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xs = np.atleast_1d(x)
        idx = np.clip(np.searchsorted(self.breaks, xs, side="right") - 1, 0, self.npieces - 1)
        a = self.breaks[idx]
        b = self.breaks[idx + 1]
        t = (2.0 * xs - a - b) / (b - a)
        c = self.coeffs[idx]
        b1 = np.zeros_like(t)
        b2 = np.zeros_like(t)
        for j in range(c.shape[1] - 1, 0, -1):
            b1, b2 = 2.0 * t * b1 - b2 + c[:, j], b1
        out = t * b1 - b2 + c[:, 0]
        return float(out[0]) if scalar else out

    # calculus ---------------------------------------------------------------
    def deriv(self, k=1):
        if k == 0:
            return self
        d = self.degree
        rows = []
        for (a, b), row in zip(zip(self.breaks[:-1], self.breaks[1:]), self.coeffs):
            r = C.chebder(row, k, scl=2.0 / (b - a)) if d >= k else np.zeros(1)
            out = np.zeros(d + 1)
            out[: len(r)] = r
            rows.append(out)
        return ChebSeries(self.breaks, np.array(rows))

    def antideriv(self):
        """Antiderivative vanishing at 0, continuous across breaks."""
        rows = []
        offset = 0.0
        for (a, b), row in zip(zip(self.breaks[:-1], self.breaks[1:]), self.coeffs):
            r = C.chebint(row, 1, lbnd=-1.0, scl=(b - a) / 2.0)
            r[0] += offset
            offset = C.chebval(1.0, r)
            rows.append(r)
        return ChebSeries(self.breaks, np.array(rows))

    def integral(self):
        return float(self.antideriv()(1.0))

    # transformations -------------------------------------------------------
    def flip(self):
        """The series of x -> self(1 - x)."""
        breaks = 1.0 - self.breaks[::-1]
        sign = (-1.0) ** np.arange(self.degree + 1)
        return ChebSeries(breaks, self.coeffs[::-1] * sign)

    def with_degree(self, degree):
        rows = np.zeros((self.npieces, degree + 1))
        k = min(degree, self.degree) + 1
        rows[:, :k] = self.coeffs[:, :k]
        return ChebSeries(self.breaks, rows)

    def map(self, fn, other=None, degree=None):
        """Pointwise ``fn(self(x))`` or ``fn(self(x), other(x))`` refit on the
        union of breakpoints."""
        breaks = self.breaks if other is None else union_breaks(self.breaks, other.breaks)
        deg = degree if degree is not None else max(self.degree, 0 if other is None else other.degree)
        if other is None:
            return ChebSeries.from_function(lambda x: fn(self(x)), deg, breaks)
        return ChebSeries.from_function(lambda x: fn(self(x), other(x)), deg, breaks)

    def __add__(self, other):
        if isinstance(other, ChebSeries):
            if np.array_equal(self.breaks, other.breaks):
                d = max(self.degree, other.degree)
                return ChebSeries(self.breaks, self.with_degree(d).coeffs + other.with_degree(d).coeffs)
            return self.map(np.add, other)
        c = self.coeffs.copy()
        c[:, 0] += other
        return ChebSeries(self.breaks, c)

    __radd__ = __add__

    def __neg__(self):
        return ChebSeries(self.breaks, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, ChebSeries):
            return multiply(self, other)
        return ChebSeries(self.breaks, self.coeffs * other)

    __rmul__ = __mul__

    def __repr__(self):
        return f"ChebSeries(pieces={self.npieces}, degree={self.degree})"


def union_breaks(b1, b2, tol=1e-14):
    b = np.union1d(b1, b2)
    keep = np.concatenate([[True], np.diff(b) > tol])
    return b[keep]


def multiply(s1, s2, max_degree=256):
    """Product with degree up to ``d1 + d2`` (capped), exact for polynomials."""
    deg = min(s1.degree + s2.degree, max(max_degree, s1.degree, s2.degree))
    if np.array_equal(s1.breaks, s2.breaks):
        rows = []
        for r1, r2 in zip(s1.coeffs, s2.coeffs):
            r = C.chebmul(r1, r2)[: deg + 1]
            out = np.zeros(deg + 1)
            out[: len(r)] = r
            rows.append(out)
        return ChebSeries(s1.breaks, np.array(rows))
    return s1.map(np.multiply, s2, degree=deg)
