"""Command-line harness.

Subcommands: ``simulate`` (plant only), ``observe`` (plant + observer),
``estimate`` (offline diffusivity estimation from saved frames), ``sweep``
(adaptation-gain comparison), ``slice`` (heatmap export from a TF3D dump).
Exit codes: 0 success, 2 configuration error, 3 solver error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiment, fileio
from .estimation import FrameHistory, estimate_diffusivity
from .config import load_config
from .disturbance import make_disturbance
from .solver import run_plant
from .errors import (
    ConfigurationError,
    ConstructionError,
    EstimateUnavailable,
    SchedulingError,
    SolverError,
)

CONFIG_EXIT = 2
SOLVER_EXIT = 3


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    outdir = Path(args.out)
    frames_dir = outdir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    sensors = cfg.sensor_set()
    counter = {"k": 0}

    def stream(state, frame):
        # Frames hit the disk as the run progresses, so a solver failure
        # still leaves the partial trajectory behind.
        k = counter["k"]
        fileio.write_frame_csv(
            frames_dir / f"frame_{k:06d}.csv",
            frame.values, frame.t, state.probe.u, sensors.delta_eta,
        )
        counter["k"] = k + 1

    model = experiment.build_model(cfg)
    dist = make_disturbance(cfg.disturbance, cfg.grid)
    traj = run_plant(
        model, cfg.schedule, dist, cfg.solver, cfg.horizon,
        initial_temp=cfg.initial_temp,
        keep_fields=args.dump_every > 0,
        frame_noise_std=cfg.sensor_noise_std,
        seed=cfg.seed,
        on_step=stream,
    )
    if args.dump_every > 0:
        fields_dir = outdir / "fields"
        fields_dir.mkdir(exist_ok=True)
        for k in range(0, len(traj.times), args.dump_every):
            fileio.write_tf3d(
                fields_dir / f"plant_{k:06d}.tf3d", traj.field_at(k), traj.times[k]
            )
    print(f"simulated {len(traj.times)} states -> {outdir}")
    return 0


def _cmd_observe(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.L is not None:
        overrides["adaptation_gain"] = args.L
    if args.no_adapt:
        overrides["adapt"] = False
    result = experiment.run_experiment(cfg, outdir=args.out, **overrides)
    last = result.rows[-1]
    print(
        f"observed {len(result.rows)} states; final err_inf={last.err_inf:.4g} K, "
        f"param_err={last.param_err:.4g} -> {args.out}"
    )
    return 0


def _load_frame_sequence(frames_dir: Path, delta_eta_opt):
    """Yield (values, t, u, delta_eta) from frame CSVs or TF3D top slices.

    TF3D dumps carry no probe power or sensor pitch: the probe is assumed
    idle and --delta-eta must be given.
    """
    csvs = sorted(frames_dir.glob("frame_*.csv"))
    if csvs:
        for path in csvs:
            yield fileio.read_frame_csv(path)
        return
    dumps = sorted(frames_dir.glob("*.tf3d"))
    if not dumps:
        raise ConfigurationError(f"no frame CSVs or TF3D dumps under {frames_dir}")
    if delta_eta_opt is None:
        raise ConfigurationError("--delta-eta is required for TF3D input")
    for path in dumps:
        values, t = fileio.read_tf3d(path)
        yield values[:, :, -1], t, 0.0, delta_eta_opt


def _cmd_estimate(args) -> int:
    frames_dir = Path(args.frames)
    delta_eta = None
    history = None
    lines = 0
    prev_t = None
    for vals, t, u, de in _load_frame_sequence(frames_dir, args.delta_eta):
        if history is None:
            delta_eta = de
            history = FrameHistory(length=args.history, period=1.0)
            history.push(vals, t, u)
            prev_t = t
            continue
        if len(history) == 1:
            history.period = t - prev_t
        history.push(vals, t, u)
        try:
            est = estimate_diffusivity(history, delta_eta, beta=args.beta)
        except EstimateUnavailable:
            continue
        print(
            f"t={est.t:.4f} s  ahat={est.ahat:.6e} m^2/s  "
            f"raw={est.ahat_raw:.6e}  valid={est.valid_fraction:.2e}"
        )
        lines += 1
    if lines == 0:
        print("no estimation window found (probe never idle long enough)")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    gains = [float(v) for v in args.L.split(",")]
    results = experiment.sweep(cfg, gains, outdir=args.out)
    for l_sample, result in results.items():
        last = result.rows[-1]
        print(f"L={l_sample:g}: final err_inf={last.err_inf:.4g} K, "
              f"param_err={last.param_err:.4g}")
    return 0


def _cmd_slice(args) -> int:
    values, t = fileio.read_tf3d(args.dump)
    # Reconstruct grid geometry from the sidecar-free dump: the slice spec is
    # interpreted on the config's grid when given, else on node indices.
    if args.config:
        grid = load_config(args.config).grid
        plane = experiment.slice_field(values, grid, args.plane)
    else:
        axis_name, _, idx = args.plane.partition("=")
        axis = {"x": 0, "y": 1, "z": 2}.get(axis_name.strip())
        if axis is None:
            raise ConfigurationError(f"bad slice spec {args.plane!r}")
        plane = np.take(values, int(idx), axis=axis)
    vmin, vmax = (None, None)
    if args.range:
        vmin, vmax = (float(v) for v in args.range.split(","))
    experiment.export_heatmap(plane, args.out, vmin, vmax)
    print(f"wrote {args.out} (field time {t:.4f} s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermobs",
        description="Electrosurgical heating simulation and surface-feedback "
                    "temperature estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the plant and save frames")
    p.add_argument("config")
    p.add_argument("--out", default="out_simulate")
    p.add_argument("--dump-every", type=int, default=0,
                   help="TF3D full-field dump period in steps (0 = off)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("observe", help="run plant + adaptive observer")
    p.add_argument("config")
    p.add_argument("--L", type=float, default=None,
                   help="override the per-frame adaptation gain")
    p.add_argument("--no-adapt", action="store_true")
    p.add_argument("--out", default="out_observe")
    p.set_defaults(func=_cmd_observe)

    p = sub.add_parser("estimate", help="offline diffusivity estimation from "
                                        "saved frame CSVs or TF3D dumps")
    p.add_argument("frames")
    p.add_argument("--beta", type=float, default=100.0)
    p.add_argument("--history", type=int, default=7)
    p.add_argument("--delta-eta", type=float, default=None,
                   help="sensor pitch in m (required for TF3D input)")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("sweep", help="compare adaptation gains on one plant run")
    p.add_argument("config")
    p.add_argument("--L", required=True, help="comma-separated gains, e.g. 0,0.1,0.5")
    p.add_argument("--out", default="out_sweep")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("slice", help="export a grayscale heatmap from a TF3D dump")
    p.add_argument("dump")
    p.add_argument("--plane", required=True, help="e.g. z=0 (cm, with --config) "
                                                  "or z=40 (node index without)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--range", default=None, help="vmin,vmax in K")
    p.set_defaults(func=_cmd_slice)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, SchedulingError, ConstructionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return CONFIG_EXIT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return SOLVER_EXIT


if __name__ == "__main__":
    sys.exit(main())
