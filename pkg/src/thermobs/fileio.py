"""On-disk formats: TF3D field dumps, surface-frame CSVs, metrics CSVs, and
grayscale PGM heatmaps with a sidecar describing the temperature range.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

TF3D_MAGIC = b"TF3D"

# 32-byte header: magic (4), three u32 node counts (12), f64 timestamp (8),
# 8 reserved zero bytes.
_TF3D_HEADER = struct.Struct("<4s3Id8x")
assert _TF3D_HEADER.size == 32


def write_tf3d(path, values: np.ndarray, t: float) -> None:
    """Flat binary of float64 values, row-major (z fastest), 32-byte header."""
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 3:
        raise ConfigurationError("TF3D dumps hold 3D fields")
    n1, n2, n3 = values.shape
    with open(path, "wb") as fh:
        fh.write(_TF3D_HEADER.pack(TF3D_MAGIC, n1, n2, n3, float(t)))
        fh.write(values.tobytes())


def read_tf3d(path) -> tuple[np.ndarray, float]:
    with open(path, "rb") as fh:
        header = fh.read(_TF3D_HEADER.size)
        magic, n1, n2, n3, t = _TF3D_HEADER.unpack(header)
        if magic != TF3D_MAGIC:
            raise ConfigurationError(f"{path}: not a TF3D dump")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n1 * n2 * n3:
        raise ConfigurationError(f"{path}: truncated TF3D payload")
    return data.reshape(n1, n2, n3).copy(), t


def format_float(x) -> str:
    """Shortest round-trip float formatting; stable across runs."""
    if x is None:
        return ""
    if isinstance(x, float) and np.isnan(x):
        return ""
    return repr(float(x))


def write_frame_csv(path, values: np.ndarray, t: float, u: float, delta_eta: float) -> None:
    """One thermographer frame as CSV with its timestamp, probe power, and
    sensor pitch in header comments."""
    lines = [
        "# thermobs surface frame v1",
        f"# t_s={format_float(t)}",
        f"# u_W={format_float(u)}",
        f"# delta_eta_m={format_float(delta_eta)}",
    ]
    for row in np.asarray(values):
        lines.append(",".join(format_float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_frame_csv(path) -> tuple[np.ndarray, float, float, float]:
    """Returns (values, t, u, delta_eta)."""
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                meta[key.strip()] = val.strip()
            continue
        rows.append([float(v) for v in line.split(",")])
    try:
        t = float(meta["t_s"])
        u = float(meta["u_W"])
        de = float(meta["delta_eta_m"])
    except KeyError as exc:
        raise ConfigurationError(f"{path}: missing frame header {exc}") from exc
    return np.array(rows), t, u, de


METRICS_COLUMNS = (
    "t", "abar", "ahat", "ahat_raw", "valid_fraction",
    "err_inf", "err_l2", "param_err",
    "c_gamma", "gain_bound", "bound_satisfied",
)
METRICS_HEADER = "# thermobs metrics schema v1"


def write_metrics_csv(path, rows) -> None:
    """Frozen, versioned column schema; blank cells for absent values."""
    lines = [METRICS_HEADER, ",".join(METRICS_COLUMNS)]
    for row in rows:
        cells = []
        for col in METRICS_COLUMNS:
            v = getattr(row, col)
            if isinstance(v, bool):
                cells.append(str(int(v)))
            elif v is None:
                cells.append("")
            else:
                cells.append(format_float(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_run_metadata(path, pairs) -> None:
    """Key-value CSV with scenario parameters, certified bounds, timings."""
    lines = ["# thermobs run metadata v1", "key,value"]
    for key, value in pairs:
        lines.append(f"{key},{value}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_pgm(path, values: np.ndarray, vmin: float, vmax: float) -> None:
    """8-bit grayscale PGM with a linear temperature-to-intensity map over
    [vmin, vmax]; the range goes into a sidecar next to the image."""
    if not vmax > vmin:
        raise ConfigurationError(f"heatmap range must satisfy vmin < vmax, got "
                                 f"[{vmin}, {vmax}]")
    values = np.asarray(values, dtype=np.float64)
    scaled = np.clip((values - vmin) / (vmax - vmin), 0.0, 1.0)
    img = np.round(255.0 * scaled).astype(np.uint8)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())
    sidecar = path.with_suffix(path.suffix + ".range.txt")
    sidecar.write_text(
        f"intensity 0 = {format_float(vmin)} K\n"
        f"intensity 255 = {format_float(vmax)} K\nmap = linear\n"
    )
