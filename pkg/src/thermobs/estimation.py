"""Surface-only diffusivity estimation: noise-robust temporal and spatial
differentiators over thermographer frames, the rate-of-thermal-change (RTC)
attention field, confidence masking, and the depth-flow correction factor.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    ConfigurationError,
    InsufficientHistory,
    NoConfidentSensors,
    WindowInactive,
)

log = logging.getLogger(__name__)

# Surface-only estimates see no depthward flow; on the insulated-top surface
# cell the lateral stencil carries 4 of the 5 active one-sided couplings, so
# the apparent diffusivity is 5/4 of the true value (see
# insulated_cell_ratio). Raw estimates are scaled by the inverse.
DEPTH_CORRECTION = 4.0 / 5.0


def insulated_cell_ratio(d_lateral, d_down) -> float:
    """Apparent-over-true diffusivity for a surface cell with insulated top.

    ``d_lateral`` holds the four one-sided lateral second differences and
    ``d_down`` the single downward one (the top side contributes nothing
    through an insulated face). A lateral-only estimator divides the full
    energy balance by the lateral part, so with all five couplings equal the
    ratio is exactly 5/4.
    """
    lateral = float(np.sum(d_lateral))
    return (lateral + d_down) / lateral


def _solve_filter(moments, nyquist_flat, length) -> np.ndarray:
    """Filter taps from moment conditions plus Nyquist flatness conditions.

    ``moments`` is a list of (power, target): sum_j j^p c_j = target over taps
    j = offsets. ``nyquist_flat`` adds sum_j (-1)^j j^p c_j = 0 for
    p = 0..nyquist_flat-1, pinning a high-order zero at the Nyquist frequency.
    """
    j = np.arange(length, dtype=np.float64)
    rows, rhs = [], []
    for p, target in moments:
        rows.append(j**p)
        rhs.append(target)
    sign = (-1.0) ** j
    for p in range(nyquist_flat):
        rows.append(sign * j**p)
        rhs.append(0.0)
    a = np.array(rows)
    b = np.array(rhs)
    if a.shape[0] != length:
        raise ValueError("filter constraint system is not square")
    return np.linalg.solve(a, b)


def backward_derivative_taps(length: int = 7) -> np.ndarray:
    """One-sided first-derivative taps c_j for samples x[k], x[k-1], ...

    d/dt x[k] ~ (1/dt) sum_j c_j x[k-j]. Exact on polynomials of degree <= 2
    (moment conditions) with a high-order zero at the Nyquist frequency
    (noise robustness); both properties are what the tests certify.
    """
    if length < 5:
        raise ConfigurationError("backward derivative length must be >= 5")
    moments = [(0, 0.0), (1, -1.0), (2, 0.0)]
    return _solve_filter(moments, length - 3, length)


def centered_second_derivative_taps(length: int = 5) -> np.ndarray:
    """Centered second-derivative taps over offsets -(L-1)/2 .. (L-1)/2.

    Exact on polynomials of degree <= 3 and zero at the Nyquist frequency,
    so single-pixel checkerboard noise is rejected outright.
    """
    if length != 5:
        raise ConfigurationError("only the length-5 spatial kernel is supported")
    half = (length - 1) // 2
    j = np.arange(-half, half + 1, dtype=np.float64)
    sign = (-1.0) ** (j + half)
    a = np.array([j**0, j**1, j**2, j**3, sign])
    b = np.array([0.0, 0.0, 2.0, 0.0, 0.0])
    return np.linalg.solve(a, b)


_TIME_TAPS = backward_derivative_taps(7)
_SPACE_TAPS = centered_second_derivative_taps(5)


class FrameHistory:
    """Ring buffer of the most recent surface frames with their probe powers.

    Frames must arrive on a uniform clock; a deviation beyond 1 ns from the
    configured period is rejected.
    """

    def __init__(self, length: int = 7, period: float = 0.02):
        if length < 2:
            raise ConfigurationError("history length must be >= 2")
        if period <= 0.0:
            raise ConfigurationError("sampling period must be positive")
        self.length = length
        self.period = period
        self._frames: deque = deque(maxlen=length)
        self._times: deque = deque(maxlen=length)
        self._powers: deque = deque(maxlen=length)

    def push(self, values: np.ndarray, t: float, u: float) -> None:
        values = np.asarray(values, dtype=np.float64)
        if self._times and abs((t - self._times[-1]) - self.period) > 1e-9:
            raise ConfigurationError(
                f"frame at t={t} breaks the uniform period {self.period} s"
            )
        if self._frames and values.shape != self._frames[-1].shape:
            raise ConfigurationError("frame shape changed mid-stream")
        self._frames.append(values)
        self._times.append(t)
        self._powers.append(u)

    def __len__(self) -> int:
        return len(self._frames)

    @property
    def full(self) -> bool:
        return len(self._frames) == self.length

    @property
    def latest_time(self) -> float:
        return self._times[-1]

    @property
    def powers(self) -> np.ndarray:
        return np.array(self._powers)

    def stacked(self) -> np.ndarray:
        return np.stack(self._frames)   # (length, rows, cols), oldest first


def nr_time_derivative(history: FrameHistory) -> np.ndarray:
    """Noise-robust backward time derivative of the frame stack (K/s)."""
    if not history.full:
        raise InsufficientHistory(
            f"need {history.length} frames, have {len(history)}"
        )
    taps = _TIME_TAPS if history.length == 7 else backward_derivative_taps(history.length)
    stack = history.stacked()[::-1]   # newest first, matching tap index j
    return np.tensordot(taps, stack, axes=(0, 0)) / history.period


def nr_surface_laplacian(frame: np.ndarray, delta_eta: float) -> np.ndarray:
    """Noise-robust surface Laplacian (K/m^2): length-5 second-derivative
    kernels applied along both lattice axes and summed, reflected padding at
    the borders."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2 or min(frame.shape) < 5:
        raise ConfigurationError(
            f"surface frame must be at least 5x5, got {frame.shape}"
        )
    d11 = ndimage.correlate1d(frame, _SPACE_TAPS, axis=0, mode="reflect")
    d22 = ndimage.correlate1d(frame, _SPACE_TAPS, axis=1, mode="reflect")
    return (d11 + d22) / delta_eta**2


@dataclass
class RtcField:
    """Attention weights over the sensor lattice; nonnegative, sums to 1."""

    weights: np.ndarray
    beta: float
    degenerate: bool = False


def rtc(rate_field: np.ndarray, beta: float = 100.0) -> RtcField:
    """Rate-of-thermal-change attention: exponentiate beta |rate|, subtract
    the minimum, normalize to unit sum.

    Exponentials are shifted by the maximum before evaluation, which leaves
    the normalized weights unchanged while avoiding overflow at large beta.
    A (near-)constant rate field has no preferred pixel; the normalizing sum
    of the shifted exponentials falls below 1e-12 and uniform weights are
    returned instead.
    """
    if beta < 1.0:
        raise ConfigurationError(f"rtc sharpening beta must be >= 1, got {beta}")
    a = beta * np.abs(np.asarray(rate_field, dtype=np.float64))
    e = np.exp(a - a.max())
    w = e - e.min()
    s = w.sum()
    if s < 1e-12:
        m = w.size
        return RtcField(np.full(w.shape, 1.0 / m), beta, degenerate=True)
    return RtcField(w / s, beta)


@dataclass
class DiffusivityEstimate:
    """One windowed estimate; ``ahat`` carries the 4/5 depth correction."""

    ahat: float           # m^2/s
    ahat_raw: float       # m^2/s
    valid_fraction: float
    t: float              # s of the newest frame in the window


def estimate_diffusivity(
    history: FrameHistory,
    delta_eta: float,
    beta: float = 100.0,
    eps_lap: float | None = None,
    tau_rtc: float | None = None,
    eps_lap_rel: float = 0.01,
) -> DiffusivityEstimate:
    """Attention-weighted surface diffusivity estimate from one frame window.

    Valid only while the probe is off: every frame in the window must have
    zero power, otherwise the deposition term would contaminate the pure
    diffusion balance. Per-sensor ratios (time derivative over surface
    Laplacian) are kept only where the Laplacian magnitude exceeds ``eps_lap``
    (default: 1% of the window's largest magnitude) and the RTC weight
    exceeds ``tau_rtc`` (default: 1/(10 M)); surviving weights are
    renormalized before averaging.
    """
    if not history.full:
        raise InsufficientHistory(
            f"need {history.length} frames, have {len(history)}"
        )
    if np.any(history.powers != 0.0):
        raise WindowInactive("probe power is nonzero inside the history window")

    dt_field = nr_time_derivative(history)
    stack = history.stacked()
    laps = np.stack([nr_surface_laplacian(f, delta_eta) for f in stack])
    lap = laps[-1]

    if eps_lap is None:
        eps_lap = eps_lap_rel * float(np.abs(laps).max())
    if tau_rtc is None:
        tau_rtc = 1.0 / (10.0 * lap.size)

    weights = rtc(dt_field, beta).weights
    mask = (np.abs(lap) > eps_lap) & (weights > tau_rtc)
    valid_fraction = float(mask.mean())
    if not mask.any():
        raise NoConfidentSensors(
            "no sensor passed the curvature and attention thresholds"
        )

    w = weights[mask]
    w = w / w.sum()
    ratios = dt_field[mask] / lap[mask]
    raw = float(np.sum(w * ratios))
    return DiffusivityEstimate(
        ahat=DEPTH_CORRECTION * raw,
        ahat_raw=raw,
        valid_fraction=valid_fraction,
        t=history.latest_time,
    )
