"""Scenario configuration: JSON ingestion (bench units: cm / s / W / K),
validation with field paths, and assembly into SI-unit model objects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .disturbance import DisturbanceSpec
from .errors import ConfigurationError, SchedulingError
from .grid import BoundaryCondition, FaceBC, Grid3, SensorSet
from .solver import MaterialProps, SolverParams
from .source import CutSegment, ProbeSchedule, SourceSpec

CM = 0.01


@dataclass
class ObserverSettings:
    a0_factor: float = 2.0        # initial guess = factor * true diffusivity
    gain: float = 50.0            # diagonal feedback gain
    adaptation_gain: float = 0.5  # per-frame fraction of the gap closed
    adapt: bool = True
    beta: float = 100.0           # RTC sharpening
    history_len: int = 7
    frame_decimation: int = 1     # estimator consumes every N-th frame
    eps_lap_rel: float | None = None   # None: estimator default (1% of max)
    tau_rtc: float | None = None       # None: estimator default (1/(10M))
    bound_check: bool = False

    def __post_init__(self):
        if self.a0_factor <= 0.0:
            raise ConfigurationError("observer.a0_factor must be positive")
        if self.gain <= 0.0:
            raise ConfigurationError("observer.gain must be positive")
        if not 0.0 <= self.adaptation_gain < 1.0:
            raise ConfigurationError(
                "observer.adaptation_gain is a per-frame fraction in [0, 1)"
            )
        if self.frame_decimation < 1:
            raise ConfigurationError("observer.frame_decimation must be >= 1")


@dataclass
class OutputSettings:
    field_dump_every: int = 0     # TF3D dump period in steps; 0 disables
    write_frames: bool = False


@dataclass
class ScenarioConfig:
    grid: Grid3
    bc: BoundaryCondition
    material: MaterialProps
    source: SourceSpec
    schedule: ProbeSchedule
    disturbance: DisturbanceSpec
    observer: ObserverSettings
    solver: SolverParams
    initial_temp: float = 300.0   # K
    horizon: float = 2.0          # s
    sensors_every: int = 1
    sensor_noise_std: float = 0.0  # K
    seed: int = 0
    outputs: OutputSettings = field(default_factory=OutputSettings)

    def sensor_set(self) -> SensorSet:
        return SensorSet.top_face(self.grid, self.sensors_every)


def _get(cfg: dict, path: str, default=None, required: bool = False):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigurationError(f"config field '{path}' is missing")
            return default
        node = node[part]
    return node


def _positive(value, path: str) -> float:
    value = float(value)
    if not value > 0.0 or not np.isfinite(value):
        raise ConfigurationError(f"config field '{path}' must be positive, got {value}")
    return value


def _face_bc(spec: dict, path: str) -> FaceBC:
    kind = _get(spec, "kind", required=True)
    if kind == "dirichlet":
        value = spec.get("value_K")
        if value is None:
            raise ConfigurationError(f"config field '{path}.value_K' is missing")
        return FaceBC("dirichlet", float(value))
    if kind == "neumann":
        return FaceBC("neumann", ghost=spec.get("ghost", "mirror"))
    raise ConfigurationError(f"config field '{path}.kind' must be neumann or dirichlet")


def parse_config(cfg: dict) -> ScenarioConfig:
    domain_cm = _get(cfg, "domain_cm", required=True)
    if len(domain_cm) != 3:
        raise ConfigurationError("config field 'domain_cm' must have 3 entries")
    dx_cm = _positive(_get(cfg, "dx_cm", required=True), "dx_cm")
    origin_cm = _get(cfg, "origin_cm")
    if origin_cm is None:
        # Default frame: x from 0, y centered, z from -depth up to the top at 0.
        origin_cm = [0.0, -domain_cm[1] / 2.0, -domain_cm[2]]
    extents = tuple(_positive(d, "domain_cm") * CM for d in domain_cm)
    grid = Grid3(extents, (dx_cm * CM,) * 3, tuple(o * CM for o in origin_cm))

    bfc = _get(cfg, "boundary", default={})
    if "faces" in bfc:
        faces = []
        from .grid import FACES
        for name in FACES:
            fspec = bfc["faces"].get(name)
            if fspec is None:
                raise ConfigurationError(f"config field 'boundary.faces.{name}' is missing")
            faces.append(_face_bc(fspec, f"boundary.faces.{name}"))
        bc = BoundaryCondition(tuple(faces))
    else:
        top = _face_bc(bfc.get("top", {"kind": "neumann"}), "boundary.top")
        sides = _face_bc(
            bfc.get("sides", {"kind": "dirichlet", "value_K": _get(cfg, "initial_temp_K", 300.0)}),
            "boundary.sides",
        )
        bc = BoundaryCondition.box(top=top, others=sides)

    mat = _get(cfg, "material", required=True)
    material = MaterialProps(
        rho=_positive(_get(mat, "rho_kg_m3", required=True), "material.rho_kg_m3"),
        k=_positive(_get(mat, "k_W_mK", required=True), "material.k_W_mK"),
        cp=_positive(_get(mat, "cp_J_kgK", required=True), "material.cp_J_kgK"),
    )

    source = SourceSpec(sigma=_positive(_get(cfg, "source.sigma_cm", 0.1), "source.sigma_cm") * CM)

    raw_sched = _get(cfg, "schedule", required=True)
    segments = []
    for n, seg in enumerate(raw_sched):
        try:
            segments.append(CutSegment(
                t_start=float(seg["t_start_s"]),
                t_end=float(seg["t_end_s"]),
                start=tuple(float(v) * CM for v in seg["start_cm"]),
                velocity=tuple(float(v) * CM for v in seg["velocity_cm_s"]),
                power=float(seg["power_W"]),
            ))
        except KeyError as exc:
            raise ConfigurationError(f"config field 'schedule[{n}].{exc.args[0]}' is missing")
    schedule = ProbeSchedule(tuple(segments))
    try:
        schedule.validate_inside(grid)
    except SchedulingError as exc:
        raise SchedulingError(f"schedule infeasible (A5): {exc}") from exc

    dist = _get(cfg, "disturbance", default={})
    disturbance = DisturbanceSpec(
        eps_w2=float(dist.get("eps_w2", 0.0)),
        c_w=float(dist.get("c_w", 0.0)),
        n_modes=int(dist.get("n_modes", 6)),
        temporal_freqs=tuple(dist.get("temporal_freqs_hz", (0.7, 1.3, 2.1))),
        seed=int(dist.get("seed", _get(cfg, "seed", 0))),
        fill=float(dist.get("fill", 0.8)),
    )

    obs = _get(cfg, "observer", default={})
    observer = ObserverSettings(
        a0_factor=float(obs.get("a0_factor", 2.0)),
        gain=float(obs.get("gain", 50.0)),
        adaptation_gain=float(obs.get("adaptation_gain", 0.5)),
        adapt=bool(obs.get("adapt", True)),
        beta=float(obs.get("beta", 100.0)),
        history_len=int(obs.get("history_len", 7)),
        frame_decimation=int(obs.get("frame_decimation", 1)),
        eps_lap_rel=obs.get("eps_lap_rel"),
        tau_rtc=obs.get("tau_rtc"),
        bound_check=bool(obs.get("bound_check", False)),
    )

    sol = _get(cfg, "solver", default={})
    solver = SolverParams(
        dt=_positive(_get(cfg, "dt_s", required=True), "dt_s"),
        gs_tol=float(sol.get("gs_tol_K", 1e-6)),
        gs_max_iters=int(sol.get("gs_max_iters", 500)),
        ordering=sol.get("ordering", "lexicographic"),
    )

    sens = _get(cfg, "sensors", default={})
    out = _get(cfg, "outputs", default={})
    return ScenarioConfig(
        grid=grid,
        bc=bc,
        material=material,
        source=source,
        schedule=schedule,
        disturbance=disturbance,
        observer=observer,
        solver=solver,
        initial_temp=float(_get(cfg, "initial_temp_K", 300.0)),
        horizon=_positive(_get(cfg, "horizon_s", required=True), "horizon_s"),
        sensors_every=int(sens.get("every", 1)),
        sensor_noise_std=float(sens.get("noise_std_K", 0.0)),
        seed=int(_get(cfg, "seed", 0)),
        outputs=OutputSettings(
            field_dump_every=int(out.get("field_dump_every", 0)),
            write_frames=bool(out.get("write_frames", False)),
        ),
    )


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario JSON file; raises ConfigurationError /
    SchedulingError with the offending field path."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(cfg)


def bundled_config_path(name: str = "two_cut_porcine.json") -> Path:
    """Filesystem path of a config shipped with the package."""
    return Path(resources.files("thermobs").joinpath("configs", name))


def load_bundled(name: str = "two_cut_porcine.json") -> ScenarioConfig:
    return load_config(bundled_config_path(name))
