"""Time stepping: Crank-Nicolson diffusion steps with a Gauss-Seidel inner
solver, and the forward plant that combines deposition, disturbance, and the
probe schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _stencils
from .disturbance import DisturbanceGen
from .errors import SolverError
from .grid import (
    BoundaryCondition,
    Field3,
    Grid3,
    SensorSet,
    SurfaceFrame,
    restrict_to_surface,
)
from .source import ProbeSchedule, ProbeState, probe_at, shift_source


@dataclass(frozen=True)
class MaterialProps:
    """Homogeneous material constants; diffusivity is derived, never stored."""

    rho: float   # kg/m^3
    k: float     # W/(m K)
    cp: float    # J/(kg K)

    def __post_init__(self):
        if min(self.rho, self.k, self.cp) <= 0.0:
            raise ValueError("material constants must be strictly positive")

    @property
    def volumetric_heat_capacity(self) -> float:
        return self.rho * self.cp

    @property
    def diffusivity(self) -> float:
        """a = k / (rho cp), m^2/s."""
        return self.k / (self.rho * self.cp)


@dataclass
class SolverParams:
    dt: float                      # s
    gs_tol: float = 1e-6           # K, residual sup-norm target
    gs_max_iters: int = 500
    ordering: str = "lexicographic"   # or "red-black"

    def __post_init__(self):
        if self.dt <= 0.0 or self.gs_tol <= 0.0:
            raise ValueError("dt and gs_tol must be positive")
        if self.ordering not in ("lexicographic", "red-black"):
            raise ValueError(f"unknown sweep ordering {self.ordering!r}")


def step_heat(
    fld: Field3,
    diffusivity: float,
    forcing: Field3 | None,
    bc: BoundaryCondition,
    params: SolverParams,
    residual_log: list | None = None,
) -> Field3:
    """One Crank-Nicolson step of d/dt x = a lap(x) + f.

    Solves (I - (a dt/2) lap) x+ = (I + (a dt/2) lap) x + dt f by Gauss-Seidel
    sweeps until the residual sup-norm drops below ``gs_tol``. Dirichlet face
    nodes are pinned to their face values throughout. Appends the residual
    after each sweep to ``residual_log`` when given.
    """
    grid = fld.grid
    codes, vals = bc.compiled()
    pinned = bc.pinned_mask(grid)
    lam = np.array([diffusivity * params.dt / (2.0 * h * h) for h in grid.spacing])

    x_old = fld.values.copy()
    bc.pin(x_old)

    lap = np.empty_like(x_old)
    inv_h2 = np.array([1.0 / h**2 for h in grid.spacing])
    _stencils.laplacian_kernel(x_old, codes, vals, inv_h2, lap)
    rhs = x_old + (diffusivity * params.dt / 2.0) * lap
    if forcing is not None:
        rhs += params.dt * forcing.values

    x = x_old.copy()
    res = _stencils.cn_residual_inf(x, rhs, codes, lam, pinned)
    if residual_log is not None:
        residual_log.append(res)
    it = 0
    while res >= params.gs_tol:
        if it >= params.gs_max_iters:
            raise SolverError(
                f"Gauss-Seidel did not reach {params.gs_tol} K within "
                f"{params.gs_max_iters} sweeps (residual {res:.3e} K)",
                residual=res,
            )
        if params.ordering == "lexicographic":
            _stencils.gs_sweep_lex(x, rhs, codes, lam, pinned)
        else:
            _stencils.gs_sweep_rb(x, rhs, codes, lam, pinned, 0)
            _stencils.gs_sweep_rb(x, rhs, codes, lam, pinned, 1)
        res = _stencils.cn_residual_inf(x, rhs, codes, lam, pinned)
        if residual_log is not None:
            residual_log.append(res)
        it += 1
    return Field3(grid, x)


@dataclass(frozen=True)
class ThermalModel:
    """Static pieces shared by the plant and any observer built on it."""

    grid: Grid3
    bc: BoundaryCondition
    material: MaterialProps
    source: Field3                 # normalized deposition, 1/m^3
    sensors: SensorSet
    dirac_scaling: bool = False    # 1/cell-volume injection instead of Kronecker

    def deposition_rate(self, probe: ProbeState) -> Field3 | None:
        """Temperature rate (K/s) deposited by the probe at one instant."""
        if probe.u == 0.0:
            return None
        shifted = shift_source(self.source, probe.p, self.grid)
        shifted.values *= probe.u / self.material.volumetric_heat_capacity
        return shifted


@dataclass
class PlantState:
    x: Field3
    probe: ProbeState
    t: float = 0.0


def step_plant(
    state: PlantState,
    model: ThermalModel,
    schedule: ProbeSchedule,
    dist_gen: DisturbanceGen | None,
    params: SolverParams,
) -> PlantState:
    """Advance the plant one step; forcing is evaluated at the midpoint
    t + dt/2 to preserve the integrator's second order."""
    t_mid = state.t + params.dt / 2.0
    probe_mid = probe_at(schedule, t_mid)
    forcing = model.deposition_rate(probe_mid)
    if dist_gen is not None:
        w = dist_gen.sample(t_mid)
        if forcing is None:
            forcing = w
        else:
            forcing.values += w.values
    x_new = step_heat(state.x, model.material.diffusivity, forcing, model.bc, params)
    t_new = state.t + params.dt
    return PlantState(x_new, probe_at(schedule, t_new), t_new)


@dataclass
class PlantTrajectory:
    """Recorded run: per-step frames, powers, and (optionally) full fields."""

    times: list = field(default_factory=list)
    frames: list = field(default_factory=list)        # SurfaceFrame
    powers: list = field(default_factory=list)        # u at the frame time (W)
    fields: list | None = None                        # np.ndarray snapshots

    def field_at(self, k: int) -> np.ndarray:
        if self.fields is None:
            raise ValueError("trajectory was recorded without full fields")
        return self.fields[k]


def run_plant(
    model: ThermalModel,
    schedule: ProbeSchedule,
    dist_gen: DisturbanceGen | None,
    params: SolverParams,
    t_end: float,
    initial_temp: float = 300.0,
    keep_fields: bool = True,
    frame_noise_std: float = 0.0,
    seed: int = 0,
    on_step=None,
) -> PlantTrajectory:
    """Run the plant from a uniform initial field and record every step.

    Deterministic for a fixed (inputs, seed); sensor noise, when enabled, is
    drawn from a dedicated generator so the field evolution is untouched.
    """
    n_steps = int(round(t_end / params.dt))
    rng = np.random.default_rng(seed) if frame_noise_std > 0.0 else None

    traj = PlantTrajectory(fields=[] if keep_fields else None)
    x0 = Field3.full(model.grid, initial_temp)
    model.bc.pin(x0.values)
    state = PlantState(x0, probe_at(schedule, 0.0), 0.0)

    def record(st: PlantState):
        frame = restrict_to_surface(st.x, model.sensors, st.t)
        if rng is not None:
            frame.values = frame.values + rng.normal(
                0.0, frame_noise_std, frame.values.shape
            )
        traj.times.append(st.t)
        traj.frames.append(frame)
        traj.powers.append(st.probe.u)
        if traj.fields is not None:
            traj.fields.append(st.x.values.copy())
        if on_step is not None:
            on_step(st, frame)

    record(state)
    for k in range(n_steps):
        state = step_plant(state, model, schedule, dist_gen, params)
        state.t = (k + 1) * params.dt  # avoid accumulation drift
        record(state)
    return traj
