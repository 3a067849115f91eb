"""Radial eigenfunction factors built on the confluent hypergeometric limit 0F1.

``psi1`` is the bounded radial profile of the Laplacian eigenfunction on the
N-ball (a rescaled Bessel J), ``psi2`` its growing counterpart on the whole
space (a rescaled Bessel I).  Both are normalized to 1 at the origin with zero
slope there, and both are evaluated through the Maclaurin series of 0F1.

All functions accept floats or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SERIES_TOL = 1e-16
SERIES_TERMS_MAX = 500
# beyond this |r| the psi2 quantities switch to the large-argument expansion
R_ASYM = 50.0


class SeriesTruncationError(ArithmeticError):
    """The 0F1 series did not converge within ``terms_max`` terms."""

    def __init__(self, last_term: float, terms: int):
        super().__init__(
            f"0F1 series not converged after {terms} terms (last |term| = {last_term:.3e})"
        )
        self.last_term = last_term
        self.terms = terms


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class HypParams:
    tau: float
    terms_max: int = SERIES_TERMS_MAX
    tol: float = SERIES_TOL

    def __post_init__(self):
        if not self.tau > -1:
            raise ValueError(f"tau must exceed -1, got {self.tau}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.terms_max < 10:
            raise ValueError("terms_max must be at least 10")

    @classmethod
    def for_dim(cls, N: int, **kw) -> "HypParams":
        """Parameters for the N-dimensional cross-section (tau = N/2 - 1)."""
        if N < 1:
            raise ValueError(f"N must be >= 1, got {N}")
        return cls(tau=N / 2 - 1, **kw)


def _hyp0f1_scalar(b, z, tol, terms_max):
    term = 1.0
    total = 1.0
    for n in range(terms_max):
        term *= z / ((b + n) * (n + 1))
        total += term
        if abs(term) < tol * abs(total) or term == 0.0:
            return total
    raise SeriesTruncationError(abs(term), terms_max)


def hyp0f1(b, z, tol: float = SERIES_TOL, terms_max: int = SERIES_TERMS_MAX):
    """Sum ``sum_n Gamma(b)/Gamma(b+n) * z**n / n!`` for real b > 0.

    Terms are accumulated until the next one drops below ``tol`` times the
    running sum; :class:`SeriesTruncationError` is raised if that does not
    happen within ``terms_max`` terms.
    """
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    if np.ndim(z) == 0:
        return _hyp0f1_scalar(float(b), float(z), tol, terms_max)

    z = np.asarray(z, dtype=float)
    if z.size <= 8:
        # the per-term array loop only pays off for longer inputs
        flat = [_hyp0f1_scalar(float(b), float(v), tol, terms_max) for v in z.ravel()]
        return np.array(flat).reshape(z.shape)
    term = np.ones_like(z)
    total = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for n in range(terms_max):
        term = np.where(active, term * (z / ((b + n) * (n + 1))), 0.0)
        total = total + term
        active &= ~((np.abs(term) < tol * np.abs(total)) | (term == 0.0))
        if not active.any():
            return total
    raise SeriesTruncationError(float(np.max(np.abs(term))), terms_max)


def psi1(r, p: HypParams):
    """Bounded radial profile, ``0F1(; tau+1; -r^2/4)``; ``cos r`` when N = 1."""
    r = _as_float(r)
    return hyp0f1(p.tau + 1, -r * r / 4, p.tol, p.terms_max)


def psi1_prime(r, p: HypParams):
    r = _as_float(r)
    b = p.tau + 1
    return -(r / (2 * b)) * hyp0f1(b + 1, -r * r / 4, p.tol, p.terms_max)


def _asym_log_bessel_i(nu: float, x):
    """``log I_nu(x)`` for large positive x via the Hankel expansion."""
    x = np.asarray(x, dtype=float)
    mu = 4 * nu * nu
    term = np.ones_like(x)
    total = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    for k in range(1, 200):
        nxt = -term * (mu - (2 * k - 1) ** 2) / (k * 8 * x)
        # asymptotic series: stop at the smallest term
        grow = np.abs(nxt) >= prev
        nxt = np.where(grow, 0.0, nxt)
        prev = np.where(grow, 0.0, np.abs(nxt))
        term = nxt
        total = total + term
        if not np.any(np.abs(term) > 1e-17 * np.abs(total)):
            break
    return x - 0.5 * np.log(2 * np.pi * x) + np.log(total)


def _bessel_i_ratio_asym(nu: float, x):
    """``I_nu(x) / I_{nu+1}(x)`` for large x, without forming either factor."""
    return np.exp(_asym_log_bessel_i(nu, x) - _asym_log_bessel_i(nu + 1, x))


def psi2(r, p: HypParams):
    """Growing radial profile ``0F1(; tau+1; r^2/4)`` for r <= 0; ``cosh r`` when N = 1."""
    r = _as_float(r)
    return np.exp(log_psi2(r, p)) if np.any(np.abs(r) > R_ASYM) else (
        hyp0f1(p.tau + 1, r * r / 4, p.tol, p.terms_max)
    )


def psi2_prime(r, p: HypParams):
    r = _as_float(r)
    if np.any(np.abs(r) > R_ASYM):
        return psi2(r, p) / psi2_ratio(r, p)
    b = p.tau + 1
    return (r / (2 * b)) * hyp0f1(b + 1, r * r / 4, p.tol, p.terms_max)


def log_psi2(r, p: HypParams):
    """``log psi2(r)``, finite for any r (psi2 itself overflows near |r| ~ 700)."""
    r = _as_float(r)
    x = np.abs(r)
    big = x > R_ASYM
    if not np.any(big):
        return np.log(hyp0f1(p.tau + 1, r * r / 4, p.tol, p.terms_max))
    tau = p.tau
    xs = np.where(big, x, R_ASYM + 1)
    asym = math.lgamma(tau + 1) - tau * np.log(xs / 2) + _asym_log_bessel_i(tau, xs)
    if np.ndim(r) == 0:
        return float(asym)
    out = np.empty_like(x)
    out[big] = asym[big]
    small = ~big
    if small.any():
        out[small] = np.log(hyp0f1(tau + 1, r[small] ** 2 / 4, p.tol, p.terms_max))
    return out


def psi2_ratio(r, p: HypParams):
    """``psi2(r) / psi2'(r)`` for r < 0; tends to -1 as r -> -inf.

    For |r| <= R_ASYM this is the quotient of two 0F1 series.  Further out it
    equals ``-I_tau(|r|) / I_{tau+1}(|r|)``, evaluated by the large-argument
    expansion so that nothing overflows.
    """
    r = _as_float(r)
    x = np.abs(r)
    big = x > R_ASYM
    b = p.tau + 1
    if np.ndim(r) == 0:
        if big:
            return float(-_bessel_i_ratio_asym(p.tau, x))
        if r == 0:
            return -math.inf
        return (2 * b / r) * (
            hyp0f1(b, r * r / 4, p.tol, p.terms_max) / hyp0f1(b + 1, r * r / 4, p.tol, p.terms_max)
        )
    out = np.empty_like(x)
    if big.any():
        out[big] = -_bessel_i_ratio_asym(p.tau, x[big])
    small = ~big
    if small.any():
        rs = r[small]
        # r -> 0- sends the ratio to -inf; tiny r may overflow to it
        with np.errstate(divide="ignore", over="ignore"):
            out[small] = (2 * b / rs) * (
                hyp0f1(b, rs * rs / 4, p.tol, p.terms_max)
                / hyp0f1(b + 1, rs * rs / 4, p.tol, p.terms_max)
            )
    return out


def _bessel_zero_upper_bound(tau: float) -> float:
    # j_{tau,1} <= sqrt(tau+1) * (sqrt(tau+2) + 1)
    return math.sqrt(tau + 1) * (math.sqrt(tau + 2) + 1)


def bisect(f, a: float, b: float, xtol: float = 1e-12, maxiter: int = 200,
           keep_left: bool = False) -> float:
    """Plain bisection for a sign change of ``f`` on [a, b].

    With ``keep_left`` the left end of the final bracket is returned, which keeps
    the sign of ``f(a)``; otherwise the midpoint.
    """
    fa = f(a)
    fb = f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise BracketError(f"no sign change on [{a}, {b}]")
    for _ in range(maxiter):
        m = 0.5 * (a + b)
        if b - a <= xtol or m in (a, b):
            break
        fm = f(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return a if keep_left else 0.5 * (a + b)


def first_zero_psi1(p: HypParams, xtol: float = 1e-12) -> float:
    """Smallest r > 0 with ``psi1(r) = 0`` (the first zero of J_tau)."""
    guess = _bessel_zero_upper_bound(p.tau)
    step = guess / 64
    a = 0.0
    for _ in range(64 * 4):
        b = a + step
        if psi1(b, p) <= 0:
            return bisect(lambda r: psi1(r, p), a, b, xtol)
        a = b
    raise BracketError(f"psi1 has no zero below {a:.6g} for tau={p.tau}")


def _as_float(r):
    return float(r) if np.ndim(r) == 0 else np.asarray(r, dtype=float)
