"""2D Craik-Leibovich vorticity dynamics in the shifted variable.

The evolved field is the vorticity ``omega`` of ``v = v_phys + V_s``; it obeys

    d(omega)/dt = -J(psi, omega - lap(phi_s)),   psi = lap^-1 omega,

where ``phi_s`` is the stream function of the Stokes drift.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .spectral import (
    FieldError,
    Grid2D,
    ScalarField2D,
    VectorField2D,
    _check_zero_mean,
    integrate_domain,
    inv_laplacian,
    l2_inner,
    laplacian,
    velocity_from_stream,
)

__all__ = [
    "SolverError",
    "StokesDrift",
    "FlowState",
    "MonitorRecord",
    "RunResult",
    "cl_rhs",
    "step_rk4",
    "run",
    "energy",
    "casimir",
    "physical_velocity",
    "monitor",
    "cfl_number",
    "write_monitors_csv",
]

CFL_WARN = 0.5


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class StokesDrift:
    phi_s: ScalarField2D
    curl_cache: ScalarField2D = field(init=False, repr=False)

    def __post_init__(self):
        _check_zero_mean(self.phi_s, "drift stream function")
        object.__setattr__(self, "curl_cache", laplacian(self.phi_s))

    @classmethod
    def zero(cls, grid: Grid2D) -> "StokesDrift":
        return cls(ScalarField2D.zeros(grid))

    @property
    def grid(self) -> Grid2D:
        return self.phi_s.grid

    def velocity(self) -> VectorField2D:
        return velocity_from_stream(self.phi_s)


@dataclass(frozen=True, eq=False)
class FlowState:
    omega: ScalarField2D
    t: float = 0.0

    def __post_init__(self):
        _check_zero_mean(self.omega, "vorticity")
        if not math.isfinite(self.t):
            raise SolverError(f"non-finite time {self.t}")

    @property
    def grid(self) -> Grid2D:
        return self.omega.grid

    def stream(self) -> ScalarField2D:
        return inv_laplacian(self.omega)


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    energy: float
    casimirs: tuple[float, ...]
    enstrophy_relative: float


class RunResult(NamedTuple):
    final: FlowState
    records: list
    max_cfl: float
    steps: int
    observations: list


def _check_grids(state: FlowState, drift: StokesDrift) -> None:
    if state.grid != drift.grid:
        raise FieldError(f"grid mismatch: state {state.grid} vs drift {drift.grid}")


def _rhs_hat(ops, wh: np.ndarray, curl_s_hat: np.ndarray) -> np.ndarray:
    psi_h = -ops.inv_k2 * wh
    out = ops.jacobian_hat(psi_h, wh - curl_s_hat)
    out *= -1.0
    out[0, 0] = 0.0
    return out


def cl_rhs(state: FlowState, drift: StokesDrift) -> ScalarField2D:
    _check_grids(state, drift)
    ops = state.grid.ops
    return ScalarField2D.from_spectral(
        state.grid, _rhs_hat(ops, state.omega.spectral, drift.curl_cache.spectral))


def _cfl_hat(ops, grid: Grid2D, wh: np.ndarray, dt: float) -> float:
    psi_h = -ops.inv_k2 * wh
    ux = ops.inverse(-ops.iky * psi_h)
    uy = ops.inverse(ops.ikx * psi_h)
    speed = float(np.sqrt(ux * ux + uy * uy).max())
    return speed * dt / min(grid.dx, grid.dy)


def cfl_number(state: FlowState, dt: float) -> float:
    """Advective CFL number ``max|perp_grad psi| dt / min cell size``."""
    return _cfl_hat(state.grid.ops, state.grid, state.omega.spectral, dt)


def _rk4_hat(ops, wh, curl_s_hat, dt):
    k1 = _rhs_hat(ops, wh, curl_s_hat)
    k2 = _rhs_hat(ops, wh + 0.5 * dt * k1, curl_s_hat)
    k3 = _rhs_hat(ops, wh + 0.5 * dt * k2, curl_s_hat)
    k4 = _rhs_hat(ops, wh + dt * k3, curl_s_hat)
    new = wh + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new[0, 0] = 0.0
    return new


def _finite_or_raise(wh: np.ndarray, t: float, step: int) -> None:
    if not np.all(np.isfinite(wh)):
        raise SolverError(f"non-finite vorticity at step {step} (t={t:.6g})")


def step_rk4(state: FlowState, drift: StokesDrift, dt: float) -> FlowState:
    if not dt > 0:
        raise SolverError(f"dt must be positive, got {dt}")
    _check_grids(state, drift)
    ops = state.grid.ops
    cfl = _cfl_hat(ops, state.grid, state.omega.spectral, dt)
    if cfl > CFL_WARN:
        warnings.warn(f"CFL number {cfl:.3f} exceeds {CFL_WARN}", RuntimeWarning, stacklevel=2)
    new = _rk4_hat(ops, state.omega.spectral, drift.curl_cache.spectral, dt)
    _finite_or_raise(new, state.t + dt, 1)
    return FlowState(ScalarField2D.from_spectral(state.grid, new), state.t + dt)


def energy(state: FlowState) -> float:
    """Kinetic energy of the shifted field, ``-1/2 int(psi omega) dA``."""
    return -0.5 * l2_inner(state.stream(), state.omega)


def _relative_vorticity(state: FlowState, drift: StokesDrift) -> ScalarField2D:
    _check_grids(state, drift)
    return state.omega - drift.curl_cache


def casimir(state: FlowState, drift: StokesDrift, f: int | Callable) -> float:
    """``int f(omega - lap phi_s) dA``; ``f`` is a power ``k`` in 1..8 or a
    vectorised callable."""
    q = _relative_vorticity(state, drift)
    if callable(f):
        return integrate_domain(q.map(f))
    if isinstance(f, bool) or not isinstance(f, (int, np.integer)) or not 1 <= f <= 8:
        raise ValueError(f"casimir power must be an integer in [1, 8], got {f!r}")
    if f == 1:
        # read off the k=0 coefficient so a pinned mean gives exactly 0
        return integrate_domain(q)
    return float(np.sum(q.values ** int(f))) * q.grid.cell_area


def physical_velocity(state: FlowState, drift: StokesDrift) -> VectorField2D:
    _check_grids(state, drift)
    return velocity_from_stream(state.stream() - drift.phi_s)


def monitor(state: FlowState, drift: StokesDrift, powers: Sequence = (1, 2, 3)) -> MonitorRecord:
    q = _relative_vorticity(state, drift)
    return MonitorRecord(
        t=state.t,
        energy=energy(state),
        casimirs=tuple(casimir(state, drift, k) for k in powers),
        enstrophy_relative=l2_inner(q, q),
    )


def run(state0: FlowState, drift: StokesDrift, dt: float, t_end: float, monitor_stride: int = 1,
        casimir_powers: Sequence = (1, 2, 3), observer: Callable | None = None) -> RunResult:
    """Fixed-step RK4 from ``state0.t`` to ``t_end``.

    Monitors (and ``observer(state)`` if given) are sampled at the start, every
    ``monitor_stride`` steps and at the final time.  The last step is shortened
    when ``t_end - t0`` is not a multiple of ``dt``.
    """
    if not dt > 0:
        raise SolverError(f"dt must be positive, got {dt}")
    if not t_end >= state0.t:
        raise SolverError(f"t_end={t_end} precedes the initial time {state0.t}")
    if monitor_stride < 1:
        raise SolverError(f"monitor_stride must be >= 1, got {monitor_stride}")
    _check_grids(state0, drift)
    grid = state0.grid
    ops = grid.ops
    curl_s_hat = drift.curl_cache.spectral
    span = t_end - state0.t
    n_steps = max(0, math.ceil(span / dt - 1e-9))

    records, observations = [], []

    def sample(state):
        records.append(monitor(state, drift, casimir_powers))
        if observer is not None:
            observations.append(observer(state))

    sample(state0)
    wh = np.array(state0.omega.spectral)
    wh[0, 0] = 0.0
    max_cfl = 0.0
    warned = False
    state = state0
    for n in range(1, n_steps + 1):
        h = dt if n < n_steps else span - (n_steps - 1) * dt
        cfl = _cfl_hat(ops, grid, wh, h)
        max_cfl = max(max_cfl, cfl)
        if cfl > CFL_WARN and not warned:
            warnings.warn(f"CFL number {cfl:.3f} exceeds {CFL_WARN} at step {n}",
                          RuntimeWarning, stacklevel=2)
            warned = True
        wh = _rk4_hat(ops, wh, curl_s_hat, h)
        _finite_or_raise(wh, state0.t + n * dt, n)
        if n % monitor_stride == 0 or n == n_steps:
            t = t_end if n == n_steps else state0.t + n * dt
            state = FlowState(ScalarField2D.from_spectral(grid, wh.copy()), t)
            sample(state)
    return RunResult(state, records, max_cfl, n_steps, observations)


def write_monitors_csv(records: Sequence[MonitorRecord], path, powers: Sequence | None = None) -> None:
    k = len(records[0].casimirs) if records else 0
    names = [f"casimir_{p}" for p in powers] if powers is not None else [f"casimir_{i + 1}" for i in range(k)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["t", "energy", *names, "enstrophy_relative"]) + "\n")
        for r in records:
            row = [r.t, r.energy, *r.casimirs, r.enstrophy_relative]
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
