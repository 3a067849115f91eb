"""Dispersion curves of the linearized road/field system.

A plane wave ``exp(alpha (x + c t)) * (1, gamma * phi(beta y))`` solves the
linearization around zero when (beta, alpha) lies on two curves at once: the
field curve (a hyperbola for beta >= 0, a half-circle for beta < 0) and the
boundary curve built from ``chi1``/``chi2``.  Each curve is handled here as the
region it bounds, sliced at fixed beta into an interval of admissible alpha.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from .specfun import HypParams, bisect, first_zero_psi1, log_psi2, psi1, psi1_prime, psi2_ratio

DISC_TOL = 1e-14
ROOT_XTOL = 1e-12


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Params:
    """Model parameters.

    d, D: field and boundary diffusivities; mu: rate of leaving the boundary,
    nu: rate of joining it; R: cylinder radius; N: cross-section dimension;
    f0: linearized reaction rate f'(0).
    """

    d: float = 1.0
    D: float = 1.0
    mu: float = 1.0
    nu: float = 1.0
    R: float = 1.0
    N: int = 1
    f0: float = 1.0
    hyp: HypParams = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("d", "D", "mu", "nu", "R", "f0"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a finite positive number, got {v!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N!r}")
        object.__setattr__(self, "hyp", HypParams.for_dim(int(self.N)))

    @property
    def c_kpp(self) -> float:
        return 2 * math.sqrt(self.d * self.f0)

    def replace(self, **kw) -> "Params":
        vals = {k: getattr(self, k) for k in ("d", "D", "mu", "nu", "R", "N", "f0")}
        vals.update(kw)
        return Params(**vals)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("d", "D", "mu", "nu", "R", "N", "f0")}

    # cached geometric constants; Params is immutable so caching is safe
    @cached_property
    def r1(self) -> float:
        return first_zero_psi1(self.hyp)

    @cached_property
    def beta_bar(self) -> float:
        return _beta_bar(self)


@dataclass(frozen=True)
class AlphaInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    def overlaps(self, other: "AlphaInterval") -> bool:
        return max(self.lo, other.lo) <= min(self.hi, other.hi)

    def contains(self, other: "AlphaInterval", tol: float = 0.0) -> bool:
        return self.lo <= other.lo + tol and other.hi <= self.hi + tol


@dataclass(frozen=True)
class CurveSample:
    beta: float
    d_interval: Optional[AlphaInterval]
    D_interval: Optional[AlphaInterval]


# ---------------------------------------------------------------------------
# coupling functions


def _chi1_raw(beta, p: Params):
    r = beta * p.R
    num = p.d * beta * psi1_prime(r, p.hyp)
    den = num + p.nu * psi1(r, p.hyp)
    return -p.mu * num / den, den


def _chi2_raw(beta, p: Params):
    # written through psi2/psi2' so that large |beta R| does not overflow
    q = psi2_ratio(beta * p.R, p.hyp)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -p.mu * p.d * beta / (p.d * beta + p.nu * q)
    return np.where(beta == 0, 0.0, out) if np.ndim(beta) else (0.0 if beta == 0 else out)


def chi1(beta: float, p: Params) -> float:
    """Boundary coupling for beta in [0, beta_bar): -mu d b psi1' / (d b psi1' + nu psi1)."""
    if not 0 <= beta < p.beta_bar:
        raise DomainError(f"chi1 needs 0 <= beta < beta_bar={p.beta_bar:.12g}, got {beta}")
    return float(_chi1_raw(float(beta), p)[0])


def chi2(beta: float, p: Params) -> float:
    """Boundary coupling for beta <= 0; negative, increasing, tends to -mu."""
    if beta > 0:
        raise DomainError(f"chi2 needs beta <= 0, got {beta}")
    return float(_chi2_raw(float(beta), p))


def _beta_bar(p: Params) -> float:
    upper = p.r1 / p.R

    def h(r):
        return p.d * r * psi1_prime(r * p.R, p.hyp) + p.nu * psi1(r * p.R, p.hyp)

    return bisect(h, 0.0, upper, xtol=ROOT_XTOL)


def beta_bar(p: Params) -> float:
    """First positive zero of ``r -> d r psi1'(rR) + nu psi1(rR)``; the pole of chi1."""
    return p.beta_bar


def beta_tilde(c: float, p: Params, D: Optional[float] = None) -> float:
    """Unique beta in (0, beta_bar) with ``c^2 = 4 D chi1(beta)``.

    ``D`` defaults to ``p.D``; the rescaled large-D limit passes ``D=1``.
    """
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    D = p.D if D is None else D
    target = c * c / (4 * D)

    def excess(b):
        val, den = _chi1_raw(b, p)
        return 1.0 if den <= 0 else val - target

    return bisect(excess, 0.0, p.beta_bar, xtol=ROOT_XTOL, keep_left=True)


def beta_hat(c: float, p: Params) -> float:
    """Left end of the field hyperbola for c < c_KPP: sqrt(c_KPP^2 - c^2) / (2d)."""
    ck = p.c_kpp
    if c >= ck:
        return 0.0
    return math.sqrt(ck * ck - c * c) / (2 * p.d)


def rho(c: float, p: Params) -> float:
    """Radius of the field half-circle for beta < 0 (zero when c <= c_KPP)."""
    ck = p.c_kpp
    if c <= ck:
        return 0.0
    return math.sqrt(c * c - ck * ck) / (2 * p.d)


def gamma_coef(beta: float, p: Params) -> float:
    """Amplitude of the field component of the plane wave (positive)."""
    if beta >= p.beta_bar:
        raise DomainError(f"gamma undefined for beta >= beta_bar={p.beta_bar:.12g}")
    r = beta * p.R
    if beta >= 0:
        return p.mu / (p.d * beta * psi1_prime(r, p.hyp) + p.nu * psi1(r, p.hyp))
    q = psi2_ratio(r, p.hyp)
    return p.mu * math.exp(-log_psi2(r, p.hyp)) / (p.d * beta / q + p.nu)


# ---------------------------------------------------------------------------
# vectorized region slices: (lo, hi) arrays, NaN where the slice is empty


def _sqrt_disc(disc, scale):
    disc = np.asarray(disc, dtype=float)
    ok = disc >= -DISC_TOL * scale
    return np.sqrt(np.where(ok, np.maximum(disc, 0.0), 0.0)), ok


def boundary_bounds(c: float, beta, p: Params, D: Optional[float] = None):
    """Alpha range between the boundary-curve branches at each beta.

    For beta >= 0 this is [alpha_D^-, alpha_D^+]; for beta < 0 the lower branch
    is negative and the range is clipped to [0, alpha_D^+].
    """
    D = p.D if D is None else D
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    lo = np.full(beta.shape, np.nan)
    hi = np.full(beta.shape, np.nan)

    pos = (beta >= 0) & (beta < p.beta_bar)
    if pos.any():
        chi, den = _chi1_raw(beta[pos], p)
        s, ok = _sqrt_disc(c * c - 4 * D * chi, c * c)
        ok &= den > 0
        big = c + s
        lo_p = np.where(ok, 2 * chi / big, np.nan)
        hi_p = np.where(ok, big / (2 * D), np.nan)
        lo[pos], hi[pos] = lo_p, hi_p

    neg = beta < 0
    if neg.any():
        chi = _chi2_raw(beta[neg], p)
        s = np.sqrt(c * c - 4 * D * chi)
        lo[neg] = 0.0
        hi[neg] = (c + s) / (2 * D)
    return lo, hi


def field_bounds(c: float, beta, p: Params):
    """Alpha range inside the field curve: hyperbola slice (beta >= 0), half-disk chord (beta < 0)."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    lo = np.full(beta.shape, np.nan)
    hi = np.full(beta.shape, np.nan)
    d = p.d
    ck2 = p.c_kpp ** 2

    pos = beta >= 0
    if pos.any():
        b = beta[pos]
        s, ok = _sqrt_disc(c * c - ck2 + 4 * d * d * b * b, c * c)
        # (c - s)/(2d) rewritten to avoid cancellation when c is large
        lo_p = (ck2 - 4 * d * d * b * b) / (2 * d * (c + s))
        lo[pos] = np.where(ok, np.maximum(lo_p, 0.0), np.nan)
        hi[pos] = np.where(ok, (c + s) / (2 * d), np.nan)

    neg = beta < 0
    if neg.any() and c >= p.c_kpp:
        b = beta[neg]
        r = rho(c, p)
        t, ok = _sqrt_disc(r * r - b * b, max(r * r, 1e-300))
        ctr = c / (2 * d)
        lo[neg] = np.where(ok, ctr - t, np.nan)
        hi[neg] = np.where(ok, ctr + t, np.nan)
    return lo, hi


def _interval(lo, hi) -> Optional[AlphaInterval]:
    lo = float(lo[0])
    hi = float(hi[0])
    if math.isnan(lo) or math.isnan(hi):
        return None
    return AlphaInterval(lo, max(lo, hi))


def alpha_D_interval(c: float, beta: float, p: Params) -> Optional[AlphaInterval]:
    """Admissible alpha on the boundary side at this beta, or None if the slice is empty."""
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    return _interval(*boundary_bounds(c, beta, p))


def alpha_d_interval(c: float, beta: float, p: Params) -> Optional[AlphaInterval]:
    """Admissible alpha on the field side at this beta, or None if the slice is empty."""
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    return _interval(*field_bounds(c, beta, p))


def sample_curves(c: float, p: Params, beta_grid: Iterable[float]) -> list[CurveSample]:
    grid = [float(b) for b in beta_grid]
    if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError("beta grid must be strictly increasing")
    if not grid:
        return []
    dlo, dhi = field_bounds(c, grid, p)
    Dlo, Dhi = boundary_bounds(c, grid, p)
    out = []
    for i, b in enumerate(grid):
        out.append(CurveSample(b, _interval(dlo[i:i + 1], dhi[i:i + 1]),
                               _interval(Dlo[i:i + 1], Dhi[i:i + 1])))
    return out


def curves_csv(samples: Iterable[CurveSample], out=None) -> str:
    """Write samples as CSV (beta, d_lo, d_hi, D_lo, D_hi); empty cells mark empty slices."""
    buf = out if out is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "d_lo", "d_hi", "D_lo", "D_hi"])
    for s in samples:
        row = [fmt(s.beta)]
        for iv in (s.d_interval, s.D_interval):
            row += ["", ""] if iv is None else [fmt(iv.lo), fmt(iv.hi)]
        w.writerow(row)
    return buf.getvalue() if out is None else ""


def fmt(x: float) -> str:
    return format(float(x), ".17g")
