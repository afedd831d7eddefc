"""Experiment harness: plant simulation, observer replay, adaptation-gain
sweeps, error metrics, and file exports.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .estimation import FrameHistory, estimate_diffusivity
from .config import ScenarioConfig
from .disturbance import make_disturbance
from .errors import ConfigurationError, EstimateUnavailable, SolverError
from .grid import Field3, restrict_to_surface
from .observer import GainSchedule, ObserverState, gain_lower_bound, step_observer, update_abar
from .solver import PlantTrajectory, ThermalModel, run_plant
from .source import build_source, probe_at

log = logging.getLogger(__name__)


@dataclass
class MetricsRow:
    """One line of the run CSV; all error metrics compare against the plant."""

    t: float
    abar: float            # adapted diffusivity (m^2/s)
    ahat: float | None     # corrected windowed estimate (m^2/s)
    ahat_raw: float | None
    valid_fraction: float | None
    err_inf: float         # max node |x - xhat| (K)
    err_l2: float          # volume-weighted L2 of the error (K m^(3/2))
    param_err: float       # |abar - a| / a
    c_gamma: float | None = None
    gain_bound: float | None = None
    bound_satisfied: bool | None = None


@dataclass
class RunResult:
    config: ScenarioConfig
    rows: list
    estimates: list
    observer: ObserverState
    trajectory: PlantTrajectory


def build_model(config: ScenarioConfig) -> ThermalModel:
    return ThermalModel(
        grid=config.grid,
        bc=config.bc,
        material=config.material,
        source=build_source(config.source, config.grid),
        sensors=config.sensor_set(),
    )


def simulate_plant(config: ScenarioConfig, keep_fields: bool = True) -> PlantTrajectory:
    """Run the plant once; observers replay the recorded frames."""
    model = build_model(config)
    dist = make_disturbance(config.disturbance, config.grid)
    return run_plant(
        model,
        config.schedule,
        dist,
        config.solver,
        config.horizon,
        initial_temp=config.initial_temp,
        keep_fields=keep_fields,
        frame_noise_std=config.sensor_noise_std,
        seed=config.seed,
    )


def run_observer(
    config: ScenarioConfig,
    traj: PlantTrajectory,
    adaptation_gain: float | None = None,
    adapt: bool | None = None,
    a0_factor: float | None = None,
    rows_sink: list | None = None,
) -> RunResult:
    """Replay recorded plant frames through one observer.

    ``adaptation_gain`` is the per-frame fraction of the estimate gap closed
    (the sweep variable); internally it maps to the continuous-time rate
    L / dt consumed by the integral update. ``rows_sink`` receives metric rows
    as they are produced, so callers can flush partial output on failure.
    """
    obs_cfg = config.observer
    l_sample = obs_cfg.adaptation_gain if adaptation_gain is None else adaptation_gain
    do_adapt = obs_cfg.adapt if adapt is None else adapt
    a0f = obs_cfg.a0_factor if a0_factor is None else a0_factor
    if not 0.0 <= l_sample < 1.0:
        raise ConfigurationError(
            f"adaptation gain must be a per-frame fraction in [0, 1), got {l_sample}"
        )

    model = build_model(config)
    params = config.solver
    a_true = config.material.diffusivity
    a0 = a0f * a_true
    gains = GainSchedule(
        g=obs_cfg.gain,
        adaptation_rate=l_sample / params.dt,
        bound_check=obs_cfg.bound_check,
    )
    obs = ObserverState(
        xhat=Field3.full(config.grid, config.initial_temp), abar=a0, a0=a0
    )
    model.bc.pin(obs.xhat.values)

    decim = obs_cfg.frame_decimation
    history = FrameHistory(length=obs_cfg.history_len, period=decim * params.dt)
    vols = config.grid.node_volumes()
    dist_spec = config.disturbance

    rows: list[MetricsRow] = [] if rows_sink is None else rows_sink
    estimates = []
    n = len(traj.times)
    for k in range(n):
        t_k = traj.times[k]
        y = traj.frames[k]
        if k % decim == 0:
            history.push(y.values, t_k, traj.powers[k])

        est = None
        if do_adapt and k % decim == 0:
            try:
                est = estimate_diffusivity(
                    history,
                    model.sensors.delta_eta,
                    beta=obs_cfg.beta,
                    tau_rtc=obs_cfg.tau_rtc,
                    eps_lap_rel=(0.01 if obs_cfg.eps_lap_rel is None
                                 else obs_cfg.eps_lap_rel),
                )
            except EstimateUnavailable:
                est = None
        if est is not None:
            estimates.append(est)
            if l_sample > 0.0:
                obs = update_abar(obs, est.ahat, gains.adaptation_rate, params.dt)

        err = traj.field_at(k) - obs.xhat.values
        err_inf = float(np.abs(err).max())
        err_l2 = float(np.sqrt(np.sum(err * err * vols)))

        c_gamma = bound = satisfied = None
        if gains.bound_check:
            yhat = restrict_to_surface(obs.xhat, model.sensors).values
            report = gain_lower_bound(
                y.values - yhat,
                t_k, obs.abar, dist_spec.eps_w2, dist_spec.c_w,
                config.grid, model.sensors, gains=gains.g,
            )
            c_gamma = report.c_gamma
            bound = (None if report.vacuous
                     else float(report.bounds[report.argmax_sensor]))
            satisfied = report.satisfied
            if satisfied is False:
                log.warning("gain bound violated at t=%.3f s: floor %.3g", t_k, bound)

        rows.append(MetricsRow(
            t=t_k, abar=obs.abar,
            ahat=None if est is None else est.ahat,
            ahat_raw=None if est is None else est.ahat_raw,
            valid_fraction=None if est is None else est.valid_fraction,
            err_inf=err_inf, err_l2=err_l2,
            param_err=abs(obs.abar - a_true) / a_true,
            c_gamma=c_gamma, gain_bound=bound, bound_satisfied=satisfied,
        ))

        if k + 1 < n:
            probe_mid = probe_at(config.schedule, t_k + params.dt / 2.0)
            obs = step_observer(obs, y, probe_mid, model, gains, params)

    return RunResult(config, rows, estimates, obs, traj)


def run_experiment(
    config: ScenarioConfig,
    outdir=None,
    traj: PlantTrajectory | None = None,
    **observer_overrides,
) -> RunResult:
    """Plant plus observer; writes metrics/metadata (and optional dumps) when
    ``outdir`` is given. Deterministic for a fixed (config, seed). A solver
    failure still flushes the rows produced so far before propagating."""
    t0 = time.perf_counter()
    if traj is None:
        traj = simulate_plant(config)
    partial: list = []
    try:
        result = run_observer(config, traj, rows_sink=partial, **observer_overrides)
    except SolverError:
        if outdir is not None and partial:
            outdir = Path(outdir)
            outdir.mkdir(parents=True, exist_ok=True)
            fileio.write_metrics_csv(outdir / "metrics_partial.csv", partial)
        raise
    if outdir is not None:
        write_outputs(result, Path(outdir))
        _write_metadata(result, Path(outdir), time.perf_counter() - t0)
    return result


def sweep(
    config: ScenarioConfig,
    adaptation_gains,
    outdir=None,
) -> dict[float, RunResult]:
    """One observer run per adaptation gain over a shared plant trajectory."""
    gains = list(adaptation_gains)
    if not gains:
        raise ConfigurationError("sweep needs at least one adaptation gain")
    traj = simulate_plant(config)
    results = {}
    for l_sample in gains:
        results[l_sample] = run_observer(config, traj, adaptation_gain=l_sample)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        lines = [fileio.METRICS_HEADER, "L," + ",".join(fileio.METRICS_COLUMNS)]
        for l_sample, result in results.items():
            for row in result.rows:
                cells = [fileio.format_float(l_sample)]
                for col in fileio.METRICS_COLUMNS:
                    v = getattr(row, col)
                    if isinstance(v, bool):
                        cells.append(str(int(v)))
                    else:
                        cells.append(fileio.format_float(v) if v is not None else "")
                lines.append(",".join(cells))
        (outdir / "sweep_metrics.csv").write_text("\n".join(lines) + "\n")
    return results


def write_outputs(result: RunResult, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    fileio.write_metrics_csv(outdir / "metrics.csv", result.rows)
    cfg = result.config
    if cfg.outputs.write_frames:
        frames_dir = outdir / "frames"
        frames_dir.mkdir(exist_ok=True)
        sensors = cfg.sensor_set()
        for k, frame in enumerate(result.trajectory.frames):
            fileio.write_frame_csv(
                frames_dir / f"frame_{k:06d}.csv",
                frame.values, frame.t, result.trajectory.powers[k],
                sensors.delta_eta,
            )
    every = cfg.outputs.field_dump_every
    if every > 0 and result.trajectory.fields is not None:
        dumps = outdir / "fields"
        dumps.mkdir(exist_ok=True)
        for k in range(0, len(result.trajectory.times), every):
            fileio.write_tf3d(
                dumps / f"plant_{k:06d}.tf3d",
                result.trajectory.field_at(k),
                result.trajectory.times[k],
            )


def _write_metadata(result: RunResult, outdir: Path, elapsed: float) -> None:
    cfg = result.config
    dist = make_disturbance(cfg.disturbance, cfg.grid)
    pairs = [
        ("grid_nodes", "x".join(str(n) for n in cfg.grid.node_counts)),
        ("dx_m", fileio.format_float(cfg.grid.spacing[0])),
        ("dt_s", fileio.format_float(cfg.solver.dt)),
        ("horizon_s", fileio.format_float(cfg.horizon)),
        ("diffusivity_m2_s", fileio.format_float(cfg.material.diffusivity)),
        ("a0_factor", fileio.format_float(cfg.observer.a0_factor)),
        ("gain", fileio.format_float(cfg.observer.gain)),
        ("adaptation_gain", fileio.format_float(cfg.observer.adaptation_gain)),
        ("eps_w2_budget", fileio.format_float(cfg.disturbance.eps_w2)),
        ("eps_w2_certified", fileio.format_float(dist.eps_certified)),
        ("c_w_budget", fileio.format_float(cfg.disturbance.c_w)),
        ("c_w_certified", fileio.format_float(dist.cw_certified)),
        ("seed", str(cfg.seed)),
        ("elapsed_s", f"{elapsed:.3f}"),
    ]
    fileio.write_run_metadata(outdir / "run_metadata.csv", pairs)


def slice_field(values: np.ndarray, grid, plane: str) -> np.ndarray:
    """Extract a 2D slice like "z=0" / "y=0.5" (coordinates in cm)."""
    try:
        axis_name, _, coord = plane.partition("=")
        axis = {"x": 0, "y": 1, "z": 2}[axis_name.strip()]
        coord_m = float(coord) * 0.01
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"bad slice spec {plane!r}: use e.g. z=0") from exc
    lo = grid.origin[axis]
    hi = lo + grid.extents[axis]
    if not lo - 1e-12 <= coord_m <= hi + 1e-12:
        raise ConfigurationError(
            f"slice plane {plane!r} lies outside the grid [{lo / 0.01} cm, "
            f"{hi / 0.01} cm]"
        )
    idx = int(round((coord_m - lo) / grid.spacing[axis]))
    return np.take(values, idx, axis=axis)


def export_heatmap(values2d: np.ndarray, path, vmin=None, vmax=None) -> None:
    """Linear grayscale PGM of a 2D temperature slice."""
    values2d = np.asarray(values2d)
    if vmin is None:
        vmin = float(values2d.min())
    if vmax is None:
        vmax = float(values2d.max())
    fileio.write_pgm(path, values2d, vmin, vmax)
