"""Explicit finite-difference solver for the strip bounded by two roads (N = 1).

Unknowns: ``v`` on the strip ``[-L, L] x [-R, R]``, ``u`` on the top road
(y = R) and ``u_til`` on the bottom road (y = -R).  The field is coupled to the
roads through the Robin condition ``d dv/dn = mu u - nu v``, imposed with ghost
nodes; the x-ends of the truncated domain carry homogeneous Neumann conditions.

With the trapezoidal rule as discrete integral, the scheme conserves
``int v + int u + int u_til`` exactly when the reaction is switched off.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

from .dispersion import Params, fmt

log = logging.getLogger(__name__)

CFL_SAFETY = 0.4
EDGE_GUARD = 0.1


class Reaction(enum.Enum):
    LOGISTIC = "logistic"
    ZERO = "zero"


class CFLError(ValueError):
    def __init__(self, dt: float, bound: float):
        super().__init__(f"dt={dt:.6g} violates the stability bound dt <= {bound:.6g}")
        self.dt = dt
        self.bound = bound


class BlowUpError(ArithmeticError):
    def __init__(self, t: float):
        super().__init__(f"non-finite values in the solution at t={t:.6g}")
        self.t = t


class DomainTooSmallError(RuntimeError):
    def __init__(self, t: float, x: float, L: float):
        super().__init__(
            f"front reached x={x:.4g} (edge guard at {(1 - EDGE_GUARD) * L:.4g}) at t={t:.4g}; "
            "increase L or reduce t_end"
        )
        self.t = t


@dataclass(frozen=True)
class SimConfig:
    p: Params
    L: float = 150.0
    nx: int = 2400
    ny: int = 40
    dt: Optional[float] = None  # None -> largest stable step
    t_end: float = 50.0
    reaction: Reaction = Reaction.LOGISTIC
    level: float = 0.5
    output_every: float = 0.5
    bump_width: float = 2.0

    def __post_init__(self):
        if self.p.N != 1:
            object.__setattr__(self, "p", self.p.replace(N=1))
        if isinstance(self.reaction, str):
            object.__setattr__(self, "reaction", Reaction(self.reaction))
        if not (self.L > 0 and self.t_end > 0 and self.output_every > 0):
            raise ValueError("L, t_end and output_every must be positive")
        if self.nx < 3 or self.ny < 3:
            raise ValueError("need at least 3 grid points in each direction")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if not 0 < self.bump_width < self.L / 4:
            raise ValueError("bump must be supported strictly inside |x| < L/4")
        if self.dt is None:
            object.__setattr__(self, "dt", self.dt_max)
        elif not self.dt > 0:
            raise ValueError("dt must be positive")
        elif self.dt > self.dt_max * (1 + 1e-12):
            raise CFLError(self.dt, self.dt_max)

    @property
    def dx(self) -> float:
        return 2 * self.L / (self.nx - 1)

    @property
    def dy(self) -> float:
        return 2 * self.p.R / (self.ny - 1)

    @property
    def dt_max(self) -> float:
        h2 = min(self.dx, self.dy) ** 2
        return CFL_SAFETY * h2 / (2 * max(self.p.d, self.p.D))

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(-self.p.R, self.p.R, self.ny)


@dataclass
class SimState:
    v: np.ndarray  # (nx, ny); column ny-1 is y = R
    u: np.ndarray  # top road
    u_til: np.ndarray  # bottom road
    t: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.v.copy(), self.u.copy(), self.u_til.copy(), self.t)


def bump_state(cfg: SimConfig, amplitude: float = 1.0) -> SimState:
    """Compactly supported bump in v around x = 0, empty roads."""
    x = cfg.x
    w = cfg.bump_width
    prof = np.where(np.abs(x) < w, np.cos(np.pi * x / (2 * w)) ** 2, 0.0) * amplitude
    v = np.repeat(prof[:, None], cfg.ny, axis=1)
    return SimState(v, np.zeros(cfg.nx), np.zeros(cfg.nx))


def uniform_state(cfg: SimConfig, v: float, u: float, u_til: Optional[float] = None) -> SimState:
    u_til = u if u_til is None else u_til
    return SimState(np.full((cfg.nx, cfg.ny), float(v)), np.full(cfg.nx, float(u)),
                    np.full(cfg.nx, float(u_til)))


@numba.njit(cache=True)
def _euler_kernel(v, u, ut, v_out, u_out, ut_out, kx, ky, kr, kD, dt, mu, nu, rdt):
    """Fused update: 5-point Laplacian, Robin ghost rows, Neumann x-ends, roads.

    ``rdt`` is ``f0 * dt`` for the logistic reaction and 0 to switch it off.
    """
    nx, ny = v.shape
    for i in range(nx):
        im = i - 1 if i > 0 else 1
        ip = i + 1 if i < nx - 1 else nx - 2
        ft = mu * u[i] - nu * v[i, ny - 1]
        fb = mu * ut[i] - nu * v[i, 0]
        for j in range(ny):
            c = v[i, j]
            jm = j - 1 if j > 0 else 1
            jp = j + 1 if j < ny - 1 else ny - 2
            acc = kx * (v[ip, j] + v[im, j] - 2 * c) + ky * (v[i, jp] + v[i, jm] - 2 * c)
            if j == ny - 1:
                acc += kr * ft
            if j == 0:
                acc += kr * fb
            v_out[i, j] = c + acc + rdt * c * (1.0 - c)
        u_out[i] = u[i] + kD * (u[ip] + u[im] - 2 * u[i]) - dt * ft
        ut_out[i] = ut[i] + kD * (ut[ip] + ut[im] - 2 * ut[i]) - dt * fb


class Stepper:
    """Explicit Euler update with preallocated work arrays.

    The default backend is a compiled loop; ``backend="numpy"`` selects a
    vectorized reference implementation of the same scheme.
    """

    def __init__(self, cfg: SimConfig, backend: str = "numba"):
        if backend not in ("numba", "numpy"):
            raise ValueError(f"unknown backend {backend!r}")
        self.cfg = cfg
        self.backend = backend
        p = cfg.p
        self._lap = np.empty((cfg.nx, cfg.ny))
        self._tmp = np.empty((cfg.nx, cfg.ny))
        self._road = np.empty(cfg.nx)
        self._u2 = np.empty(cfg.nx)
        self._ut2 = np.empty(cfg.nx)
        self.kx = p.d * cfg.dt / cfg.dx ** 2
        self.ky = p.d * cfg.dt / cfg.dy ** 2
        self.kr = 2 * cfg.dt / cfg.dy  # ghost-node flux weight, already divided by d
        self.kD = p.D * cfg.dt / cfg.dx ** 2
        self.rdt = p.f0 * cfg.dt if cfg.reaction is Reaction.LOGISTIC else 0.0

    def __call__(self, s: SimState) -> SimState:
        """Advance ``s`` in place by one step and return it."""
        if self.backend == "numpy":
            return self._numpy_step(s)
        p = self.cfg.p
        v_out = self._lap
        _euler_kernel(s.v, s.u, s.u_til, v_out, self._u2, self._ut2,
                      self.kx, self.ky, self.kr, self.kD, self.cfg.dt, p.mu, p.nu, self.rdt)
        # swap buffers instead of copying back
        self._lap, s.v = s.v, v_out
        self._u2, s.u = s.u, self._u2
        self._ut2, s.u_til = s.u_til, self._ut2
        s.t += self.cfg.dt
        return s

    def _numpy_step(self, s: SimState) -> SimState:
        cfg = self.cfg
        p = cfg.p
        v, u, ut = s.v, s.u, s.u_til
        lap = self._lap
        dt = cfg.dt

        # x-direction second differences, Neumann ends via mirrored ghost
        lap[1:-1] = v[2:] + v[:-2]
        lap[1:-1] -= 2 * v[1:-1]
        lap[0] = 2 * (v[1] - v[0])
        lap[-1] = 2 * (v[-2] - v[-1])
        lap *= self.kx

        # y-direction; the two boundary rows use the Robin ghost node
        tmp = self._tmp
        tmp[:, 1:-1] = v[:, 2:] + v[:, :-2]
        tmp[:, 1:-1] -= 2 * v[:, 1:-1]
        tmp[:, 0] = 2 * (v[:, 1] - v[:, 0])
        tmp[:, -1] = 2 * (v[:, -2] - v[:, -1])
        tmp *= self.ky
        lap += tmp
        flux_top = p.mu * u - p.nu * v[:, -1]
        flux_bot = p.mu * ut - p.nu * v[:, 0]
        lap[:, -1] += self.kr * flux_top
        lap[:, 0] += self.kr * flux_bot

        if self.rdt:
            np.multiply(v, 1.0 - v, out=tmp)
            tmp *= self.rdt
            lap += tmp

        road = self._road
        for w, flux in ((u, flux_top), (ut, flux_bot)):
            road[1:-1] = w[2:] + w[:-2]
            road[1:-1] -= 2 * w[1:-1]
            road[0] = 2 * (w[1] - w[0])
            road[-1] = 2 * (w[-2] - w[-1])
            road *= self.kD
            road -= dt * flux
            w += road

        v += lap
        s.t += dt
        return s


def step(s: SimState, cfg: SimConfig) -> SimState:
    """One explicit Euler step; returns a new state and leaves ``s`` untouched."""
    out = Stepper(cfg)(s.copy())
    if not (np.isfinite(out.v).all() and np.isfinite(out.u).all() and np.isfinite(out.u_til).all()):
        raise BlowUpError(out.t)
    return out


def front_position(s: SimState, level: float, x: np.ndarray) -> Optional[float]:
    """Rightmost x where ``max_y v`` reaches ``level``, linearly interpolated."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    m = s.v.max(axis=1)
    idx = np.flatnonzero(m >= level)
    if idx.size == 0:
        return None
    i = int(idx[-1])
    if i == len(x) - 1:
        return float(x[-1])
    frac = (m[i] - level) / (m[i] - m[i + 1])
    return float(x[i] + frac * (x[i + 1] - x[i]))


def mass_total(s: SimState, cfg: SimConfig) -> float:
    """Trapezoidal ``int int v + int u + int u_til``."""
    x, y = cfg.x, cfg.y
    field_mass = np.trapezoid(np.trapezoid(s.v, y, axis=1), x)
    return float(field_mass + np.trapezoid(s.u, x) + np.trapezoid(s.u_til, x))


@dataclass
class FrontTrace:
    times: list = field(default_factory=list)
    front_x: list = field(default_factory=list)  # None where no column reaches the level
    mass: list = field(default_factory=list)
    v_center: list = field(default_factory=list)
    u_center: list = field(default_factory=list)
    speed_fit: Optional[float] = None
    fit_window: Optional[tuple[float, float]] = None
    level: float = 0.5
    extra_speeds: dict = field(default_factory=dict)
    final_state: Optional[SimState] = field(default=None, repr=False)

    @property
    def has_front(self) -> bool:
        return self.speed_fit is not None

    def mass_drift(self) -> float:
        m0 = self.mass[0]
        return max(abs(m - m0) for m in self.mass) / abs(m0)

    def to_csv(self, out=None) -> str:
        buf = out if out is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "front_x", "mass", "v_center", "u_center"])
        for row in zip(self.times, self.front_x, self.mass, self.v_center, self.u_center):
            t, fx, m, vc, uc = row
            w.writerow([fmt(t), "" if fx is None else fmt(fx), fmt(m), fmt(vc), fmt(uc)])
        return buf.getvalue() if out is None else ""


def fit_speed(times, fronts, t_from: float, x_max: float) -> Optional[float]:
    """Least-squares slope of front position against time over ``t >= t_from``."""
    pts = [(t, xf) for t, xf in zip(times, fronts) if t >= t_from and xf is not None and xf < x_max]
    if len(pts) < 3:
        return None
    t, xf = np.array(pts).T
    return float(np.polyfit(t, xf, 1)[0])


def run(cfg: SimConfig, state: Optional[SimState] = None,
        callback: Optional[Callable[[SimState], None]] = None,
        levels: tuple[float, ...] = ()) -> FrontTrace:
    """Integrate to ``cfg.t_end``, sampling the front every ``cfg.output_every``.

    The speed is fitted over the second half of the run.  Raises
    :class:`DomainTooSmallError` if the front enters the outer tenth of the
    domain, :class:`BlowUpError` on non-finite values.  ``callback`` sees the
    live state at every sample; ``levels`` adds extra front levels, whose
    fitted speeds are stored in ``trace.extra_speeds``.
    """
    s = bump_state(cfg) if state is None else state.copy()
    x = cfg.x
    ic = cfg.nx // 2
    jc = cfg.ny // 2
    stepper = Stepper(cfg)
    trace = FrontTrace(level=cfg.level)
    extra = {lv: [] for lv in levels}
    edge = (1 - EDGE_GUARD) * cfg.L
    n_steps = math.ceil(cfg.t_end / cfg.dt - 1e-9)

    def record():
        if not (np.isfinite(s.v).all() and np.isfinite(s.u).all() and np.isfinite(s.u_til).all()):
            raise BlowUpError(s.t)
        xf = front_position(s, cfg.level, x)
        if xf is not None and xf >= edge:
            raise DomainTooSmallError(s.t, xf, cfg.L)
        trace.times.append(s.t)
        trace.front_x.append(xf)
        trace.mass.append(mass_total(s, cfg))
        trace.v_center.append(float(s.v[ic, jc]))
        trace.u_center.append(float(s.u[ic]))
        for lv, xs in extra.items():
            xs.append(front_position(s, lv, x))
        if callback is not None:
            callback(s)

    record()
    next_out = cfg.output_every
    for k in range(1, n_steps + 1):
        stepper(s)
        if s.t >= next_out - 0.5 * cfg.dt or k == n_steps:
            record()
            next_out += cfg.output_every

    t_from = 0.5 * cfg.t_end
    trace.speed_fit = fit_speed(trace.times, trace.front_x, t_from, edge)
    trace.fit_window = (t_from, trace.times[-1])
    trace.extra_speeds = {lv: fit_speed(trace.times, xs, t_from, edge) for lv, xs in extra.items()}
    trace.final_state = s
    if trace.speed_fit is None:
        log.info("no front detected at level %g", cfg.level)
    return trace
