"""Large-z expansion of the Weyl functions and the eigenvalue asymptotes.

With r = u'/u for the solution decaying into the interval, the Riccati
equation r' = q + z - r^2 and the ansatz r = -t - sum_j beta_j / t^(j+1)
(z = t^2) give::

    beta_0 = q / 2
    beta_{j+1} = beta_j' / 2 - (1/2) sum_{l=0}^{j-1} beta_l beta_{j-1-l}

so that -M(t^2) ~ t + sum_j beta_j(0) / t^(j+1).  The gammas are the same
recursion applied to q(1 - x) and describe N.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import OrderError
from .geometry import GRID, endpoint_mismatch, log_h_prime
from .series import multiply

MAX_ORDER = 10
DEFAULT_ORDER = 6


@dataclass(frozen=True)
class ExpansionCoefficients:
    betas: tuple
    gammas: tuple
    order_B: int

    def beta0(self, j):
        return float(self.betas[j](0.0))

    def gamma0(self, j):
        return float(self.gammas[j](0.0))


def _recursion(qs, B, max_degree=160):
    betas = [qs * 0.5]
    for j in range(B):
        nxt = betas[j].deriv(1) * 0.5
        for l in range(j):
            nxt = nxt - multiply(betas[l], betas[j - 1 - l], max_degree) * 0.5
        betas.append(nxt)
    return tuple(betas)


def simon_coefficients(q, B=DEFAULT_ORDER):
    if not 0 <= B <= MAX_ORDER:
        raise OrderError(f"expansion order must be in [0, {MAX_ORDER}], got {B}")
    qs = q.series if hasattr(q, "series") else q
    return ExpansionCoefficients(_recursion(qs, B), _recursion(qs.flip(), B), B)


def scalar_recursion(c, B):
    """The recursion for a constant potential q = c (all derivatives vanish)."""
    b = [c / 2.0]
    for j in range(B):
        b.append(-0.5 * sum(b[l] * b[j - 1 - l] for l in range(j)))
    return b


def asymptotic_weyl(coeffs, t, B=None):
    if t <= 0:
        raise ValueError("t must be positive")
    B = coeffs.order_B if B is None else B
    if B > coeffs.order_B:
        raise OrderError(f"coefficients only computed to order {coeffs.order_B}")
    m = -t - sum(coeffs.beta0(j) / t ** (j + 1) for j in range(B + 1))
    n = -t - sum(coeffs.gamma0(j) / t ** (j + 1) for j in range(B + 1))
    return m, n


def endpoint_equivalence_test(q, B=DEFAULT_ORDER, rtol=1e-7):
    """First k with q^(k)(0) != (-1)^k q^(k)(1) and the gaps beta_k(0) - gamma_k(0)."""
    if B > MAX_ORDER:
        raise OrderError(f"expansion order must be at most {MAX_ORDER}")
    qs = q.series if hasattr(q, "series") else q
    first = endpoint_mismatch(qs, B, rtol)
    co = simon_coefficients(q, B)
    gaps = [co.beta0(j) - co.gamma0(j) for j in range(B + 1)]
    return first, gaps


def first_gap_index(gaps, scale=1.0, rtol=1e-6):
    for k, g in enumerate(gaps):
        if abs(g) > rtol * max(1.0, scale):
            return k
    return None


def eigenvalue_asymptote(f, n, m, sign):
    """Leading behaviour of the two DN eigenvalues on the m-th block.

    sign '-' is the branch attached to x = 1, sign '+' the one attached to x = 0.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if sign in ("-", -1):
        r = math.sqrt(float(f(1.0)))
        return (m + (n - 2) / 2.0 - log_h_prime(f, n, 1.0) / 4.0) / r
    if sign in ("+", 1):
        r = math.sqrt(float(f(0.0)))
        return (m + (n - 2) / 2.0 + log_h_prime(f, n, 0.0) / 4.0) / r
    raise ValueError("sign must be '-' or '+'")
