"""Spreading speed as the first tangency between the field and boundary regions.

For each c the two regions of the (beta, alpha) plane are sliced at fixed beta
into alpha intervals; the signed gap ``max(lows) - min(highs)`` is minimized
over beta.  The regions grow with c, so "min gap <= 0" is monotone in c and the
tangency speed is found by bisection.  The same machinery, with different
regions, gives the limit speeds for D -> 0, D -> infinity and R -> infinity.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dispersion import (
    DomainError,
    Params,
    beta_hat,
    beta_tilde,
    boundary_bounds,
    field_bounds,
    gamma_coef,
    rho,
    _chi1_raw,
)
from .specfun import R_ASYM, psi1, psi1_prime, psi2, psi2_prime, psi2_ratio

log = logging.getLogger(__name__)

GRID_SIZE = 512
BETA_XTOL = 1e-12
C_RTOL = 1e-12
C_LO_FACTOR = 1e-6
C_HI_DOUBLINGS = 40
POLE_CUT = 1e-9
# |beta*| below TIE_FRAC * beta_bar counts as the mixed case; see notes on flatness in solve_cstar
TIE_FRAC = 1e-4
CLASSIFY_TOL = 1e-12
POLISH_FRAC = 2e-6
# grid points within this fraction of the gap range count as touching
CLUSTER_FRAC = 1e-2

_GOLDEN = (math.sqrt(5) - 1) / 2


class SolverError(RuntimeError):
    pass


class WaveType(enum.Enum):
    TYPE1 = "Type1"
    TYPE2 = "Type2"
    MIXED = "Mixed"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TangencyResult:
    c_star: float
    beta_star: float
    alpha_star: float
    gamma_star: float
    type: WaveType
    overlap_tol: float

    def record(self, p: Params) -> dict:
        rec = p.as_dict()
        rec.update(
            c_star=self.c_star,
            beta_star=self.beta_star,
            alpha_star=self.alpha_star,
            gamma_star=self.gamma_star,
            type=str(self.type),
        )
        return rec


RECORD_FIELDS = ("d", "D", "mu", "nu", "R", "N", "f0",
                 "c_star", "beta_star", "alpha_star", "gamma_star", "type")


@dataclass(frozen=True)
class LimitSpeeds:
    c0: float
    c_tilde2: float
    c_inf: float


# ---------------------------------------------------------------------------
# region geometries


@dataclass(frozen=True)
class Geometry:
    """A pair of c-dependent regions, given by their beta window and alpha slices.

    ``window(c)`` returns the closed beta range where both slices can be
    nonempty (None if there is none); ``bounds(c, beta)`` returns the
    intersection of the two slices as (lo, hi) arrays, NaN where either slice
    is empty.
    """

    window: Callable[[float], Optional[tuple[float, float]]]
    bounds: Callable[[float, np.ndarray], tuple[np.ndarray, np.ndarray]]


def _combine(a, b):
    lo = np.maximum(a[0], b[0])
    hi = np.minimum(a[1], b[1])
    return lo, hi


def full_geometry(p: Params) -> Geometry:
    top = p.beta_bar * (1 - POLE_CUT)

    def window(c):
        hi = min(beta_tilde(c, p), top)
        lo = -rho(c, p) if c >= p.c_kpp else beta_hat(c, p)
        return (lo, hi) if lo <= hi else None

    def bounds(c, beta):
        return _combine(field_bounds(c, beta, p), boundary_bounds(c, beta, p))

    return Geometry(window, bounds)


def small_D_geometry(p: Params) -> Geometry:
    """D -> 0: the boundary region becomes ``alpha >= chi1(beta)/c`` on [0, beta_bar)."""
    top = p.beta_bar * (1 - POLE_CUT)

    def window(c):
        lo = beta_hat(c, p)
        return (lo, top) if lo <= top else None

    def bounds(c, beta):
        beta = np.atleast_1d(beta)
        chi, den = _chi1_raw(beta, p)
        lo_b = np.where(den > 0, chi / c, np.nan)
        hi_b = np.full(beta.shape, np.inf)
        return _combine(field_bounds(c, beta, p), (lo_b, hi_b))

    return Geometry(window, bounds)


def large_D_geometry(p: Params) -> Geometry:
    """D -> infinity after c = c~ sqrt(D), alpha = a~ / sqrt(D).

    The field region becomes ``a~ >= (f0 -/+ d beta^2)/c~`` (sign by the side of
    beta = 0) and the boundary region is the D = 1 slice.
    """
    top = p.beta_bar * (1 - POLE_CUT)

    def window(c):
        hi = min(beta_tilde(c, p, D=1.0), top)
        # boundary slices never exceed (c + sqrt(c^2 + 4 mu))/2 for beta < 0
        cap = 0.5 * (c + math.sqrt(c * c + 4 * p.mu))
        lo = -math.sqrt(max(0.0, (c * cap - p.f0) / p.d))
        return (lo, hi)

    def bounds(c, beta):
        beta = np.atleast_1d(beta)
        lo_f = np.maximum((p.f0 - np.sign(beta) * p.d * beta * beta) / c, 0.0)
        hi_f = np.full(beta.shape, np.inf)
        return _combine((lo_f, hi_f), boundary_bounds(c, beta, p, D=1.0))

    return Geometry(window, bounds)


def half_space_geometry(p: Params) -> Geometry:
    """R -> infinity (single road on a half-space), beta <= 0 only."""

    def window(c):
        r = rho(c, p)
        return (-r, 0.0) if c >= p.c_kpp else None

    def bounds(c, beta):
        beta = np.atleast_1d(beta)
        chi = p.mu * p.d * beta / (p.nu - p.d * beta)
        hi_b = (c + np.sqrt(c * c - 4 * p.D * chi)) / (2 * p.D)
        return _combine(field_bounds(c, beta, p), (np.zeros(beta.shape), hi_b))

    return Geometry(window, bounds)


# ---------------------------------------------------------------------------
# gap minimization and bisection


def _gap(geom: Geometry, c: float, beta) -> np.ndarray:
    lo, hi = geom.bounds(c, np.atleast_1d(np.asarray(beta, dtype=float)))
    g = np.atleast_1d(lo - hi)
    return np.where(np.isnan(g), np.inf, g)


def _golden(f, a: float, b: float, xtol: float = BETA_XTOL) -> tuple[float, float]:
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(300):
        if b - a <= xtol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    return x, f(x)


def _to_s(beta):
    return math.copysign(beta * beta, beta)


def _to_beta(s):
    return math.copysign(math.sqrt(abs(s)), s)


def _vertex_polish(f, s0: float, h: float) -> float:
    """Refine a minimizer by a least-squares parabola on a symmetric 5-point stencil."""
    if not h > 1e-13 * abs(s0):
        return s0
    k = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    ys = np.array([f(s0 + h * kk) for kk in k])
    if not np.all(np.isfinite(ys)):
        return s0
    slope = k @ ys / 10
    curv = (k * k - 2) @ ys / 14
    if curv <= 0:
        return s0
    shift = -slope / (2 * curv)
    return s0 + shift * h if abs(shift) <= 2 else s0


def min_gap(geom: Geometry, c: float, n: int = GRID_SIZE,
            stop_at_overlap: bool = False) -> tuple[float, float]:
    """Smallest signed gap between the regions over beta, and where it occurs.

    Coarse grid in beta, then golden-section search on the cells around the
    grid minimizer.  The search runs in ``s = sign(beta) beta^2``: both regions
    depend analytically on s across beta = 0, so the gap is quadratic in s at
    a tangency while it can be as flat as beta^4.  Returns (inf, nan) if the
    beta window is empty.  With ``stop_at_overlap`` a nonpositive grid value
    is returned at once, which is all the overlap predicate needs.
    """
    win = geom.window(c)
    if win is None:
        return math.inf, math.nan
    a, b = win
    if a == b:
        g = float(_gap(geom, c, a)[0])
        return g, a
    grid = np.linspace(a, b, n)
    gaps = _gap(geom, c, grid)
    i = int(np.argmin(gaps))
    if not np.isfinite(gaps[i]):
        return math.inf, math.nan
    if stop_at_overlap and gaps[i] <= 0:
        return float(gaps[i]), float(grid[i])

    def f(s):
        return float(_gap(geom, c, _to_beta(s))[0])

    best_s, best_g = _to_s(float(grid[i])), float(gaps[i])
    # two passes: the neighbouring cells, then a widened bracket if the first
    # pass ran into an edge
    lo_i, hi_i = max(i - 1, 0), min(i + 1, n - 1)
    for _ in range(2):
        s_lo, s_hi = _to_s(float(grid[lo_i])), _to_s(float(grid[hi_i]))
        # BETA_XTOL in beta, mapped to s
        s_tol = max(2 * BETA_XTOL * max(abs(grid[lo_i]), abs(grid[hi_i])), BETA_XTOL ** 2)
        s, g = _golden(f, s_lo, s_hi, xtol=s_tol)
        if g < best_g:
            best_s, best_g = s, g
        margin = (s_hi - s_lo) / 8
        if best_s - s_lo > margin and s_hi - best_s > margin:
            break
        lo_i, hi_i = max(lo_i - 1, 0), min(hi_i + 1, n - 1)
    s_lo, s_hi = _to_s(a), _to_s(b)
    h = POLISH_FRAC * (s_hi - s_lo)
    if s_lo + 2 * h < best_s < s_hi - 2 * h:
        s = _vertex_polish(f, best_s, h)
        g = f(s)
        if g <= best_g + 1e-15 * max(1.0, abs(best_g)):
            best_s, best_g = s, g
    return best_g, _to_beta(best_s)


def _overlaps(geom: Geometry, c: float) -> bool:
    return min_gap(geom, c, stop_at_overlap=True)[0] <= 0


def first_touch(geom: Geometry, c_lo: float, c_hi_start: float, rtol: Optional[float] = None) -> float:
    """Smallest c at which the regions overlap, by bisection on a bracket.

    ``c_lo`` must be a non-overlapping speed; the upper end doubles from
    ``c_hi_start`` until the regions overlap.
    """
    rtol = C_RTOL if rtol is None else rtol
    if _overlaps(geom, c_lo):
        raise SolverError(f"regions already overlap at the lower seed c={c_lo:.6g}")
    c_hi = c_hi_start
    for _ in range(C_HI_DOUBLINGS):
        if _overlaps(geom, c_hi):
            break
        c_lo = max(c_lo, c_hi)
        c_hi *= 2
    else:
        raise SolverError(f"no overlap up to c={c_hi:.6g}")
    while c_hi - c_lo > rtol * c_hi:
        mid = math.sqrt(c_lo * c_hi) if c_hi > 4 * c_lo else 0.5 * (c_lo + c_hi)
        if _overlaps(geom, mid):
            c_hi = mid
        else:
            c_lo = mid
    # the overlapping end, so that a tangency point exists there
    return c_hi


# ---------------------------------------------------------------------------
# public API


def regions_overlap(c: float, p: Params) -> bool:
    """True iff the field and boundary regions share a point at speed c."""
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    return _overlaps(full_geometry(p), c)


def gap_profile(c: float, p: Params, n: int = GRID_SIZE) -> tuple[np.ndarray, np.ndarray]:
    """Signed gap on a uniform beta grid over the current window (for diagnostics)."""
    geom = full_geometry(p)
    win = geom.window(c)
    if win is None:
        return np.array([]), np.array([])
    grid = np.linspace(win[0], win[1], n)
    return grid, _gap(geom, c, grid)


def solve_cstar(p: Params) -> TangencyResult:
    """Spreading speed c* and the tangency point of the two regions.

    Near the mixed case (beta* = 0) the gap grows only like |beta|^3 around
    the minimizer, so beta* is resolved to roughly 1e-5 there even though
    the search itself runs to 1e-12.
    """
    geom = full_geometry(p)
    ck = p.c_kpp
    c_star = first_touch(geom, C_LO_FACTOR * ck, ck)
    g, beta = min_gap(geom, c_star)
    lo, hi = geom.bounds(c_star, beta)
    alpha = 0.5 * (float(lo[0]) + float(hi[0]))
    # the touching set should be a single cluster of beta values
    _, gaps = gap_profile(c_star, p)
    finite = gaps[np.isfinite(gaps)]
    if finite.size:
        tol = g + CLUSTER_FRAC * (finite.max() - finite.min())
        n_clusters = _count_runs(gaps <= tol)
        if n_clusters > 1:
            log.warning("tangency at c*=%.12g is not unique: %d clusters", c_star, n_clusters)
    tie = TIE_FRAC * p.beta_bar
    if beta > tie:
        kind = WaveType.TYPE1
    elif beta < -tie:
        kind = WaveType.TYPE2
    else:
        kind = WaveType.MIXED
    return TangencyResult(
        c_star=c_star,
        beta_star=beta,
        alpha_star=alpha,
        gamma_star=gamma_coef(beta, p),
        type=kind,
        overlap_tol=C_RTOL * c_star,
    )


def classify_type(p: Params) -> WaveType:
    """Wave type from the sign of ``2d/D - (1 - N nu/(mu R))``."""
    lhs = 2 * p.d / p.D
    rhs = 1 - p.N * p.nu / (p.mu * p.R)
    if abs(lhs - rhs) <= CLASSIFY_TOL * max(1.0, abs(lhs)):
        return WaveType.MIXED
    return WaveType.TYPE1 if lhs > rhs else WaveType.TYPE2


def r_max(p: Params) -> tuple[float, float]:
    """Radius maximizing c* and the maximal speed; only defined for D > 2d."""
    if p.D <= 2 * p.d:
        raise DomainError("R_M exists only when D > 2d")
    R_M = p.N * p.D * p.nu / ((p.D - 2 * p.d) * p.mu)
    c_M = p.D * p.c_kpp / math.sqrt(4 * p.d * (p.D - p.d))
    return R_M, c_M


def limit_c0(p: Params) -> float:
    """Speed of the semi-degenerate problem without boundary diffusion (D -> 0)."""
    ck = p.c_kpp
    return first_touch(small_D_geometry(p), C_LO_FACTOR * ck, ck)


def limit_ctilde(p: Params) -> float:
    """``lim c*(D)/sqrt(D)`` as D -> infinity."""
    ck = p.c_kpp
    return first_touch(large_D_geometry(p), C_LO_FACTOR * ck, ck)


def limit_cinf(p: Params) -> float:
    """Half-space speed with a single road (R -> infinity)."""
    ck = p.c_kpp
    if p.D <= 2 * p.d:
        return ck
    return first_touch(half_space_geometry(p), ck, ck)


def limit_speeds(p: Params) -> LimitSpeeds:
    return LimitSpeeds(limit_c0(p), limit_ctilde(p), limit_cinf(p))


def residuals(res: TangencyResult, p: Params) -> tuple[float, float, float]:
    """Residuals of the three plane-wave equations at a solver output."""
    c, a, b, g = res.c_star, res.alpha_star, res.beta_star, res.gamma_star
    d, D, mu, nu, f0 = p.d, p.D, p.mu, p.nu, p.f0
    r = b * p.R
    if b >= 0:
        s1, s1p = psi1(r, p.hyp), psi1_prime(r, p.hyp)
        e1 = -d * a * a + d * b * b + c * a - f0
        e2 = -D * a * a + c * a - (nu * g * s1 - mu)
        e3 = d * g * b * s1p - (mu - nu * g * s1)
    else:
        q = psi2_ratio(r, p.hyp)
        chi = -mu * d * b / (d * b + nu * q)
        e1 = -d * a * a - d * b * b + c * a - f0
        e2 = -D * a * a + c * a - chi
        if abs(r) <= R_ASYM:
            s2, s2p = psi2(r, p.hyp), psi2_prime(r, p.hyp)
            e3 = d * g * b * s2p - (mu - nu * g * s2)
        else:
            # psi2 itself overflows out here; compare gamma with its defining formula
            e3 = g - gamma_coef(b, p)
    return e1, e2, e3


def _count_runs(mask: np.ndarray) -> int:
    if not mask.any():
        return 0
    return int(mask[0]) + int(np.count_nonzero(mask[1:] & ~mask[:-1]))


def tangency_clusters(c: float, p: Params, tol: float, n: int = GRID_SIZE) -> int:
    """Number of connected runs of grid points where the gap is within ``tol`` of touching."""
    _, gaps = gap_profile(c, p, n)
    return _count_runs(gaps <= tol)
