"""Synthesis of the heat-input disturbance: a smooth random field, certified
at construction to stay inside an L2-norm budget and a 1/2-Hölder spatial
smoothness budget for every time.

The construction is a sum of separable cosine modes (zero normal derivative on
all faces) with bounded sinusoidal amplitude envelopes. White noise is out of
scope by design; thermographer sensor noise is handled separately at the
surface-frame level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError
from .grid import Field3, Grid3


@dataclass(frozen=True)
class DisturbanceSpec:
    """Budgets and shape parameters for the synthesized disturbance.

    ``eps_w2`` bounds the spatial L2 norm (rate units times m^(3/2)); ``c_w``
    bounds the 1/2-Hölder coefficient (rate units times m^(-1/2)). ``fill``
    sets the fraction of the L2 budget the certified worst case may use.
    """

    eps_w2: float
    c_w: float
    n_modes: int = 6
    temporal_freqs: tuple = (0.7, 1.3, 2.1)   # Hz
    seed: int = 0
    fill: float = 0.8
    max_mode_index: int = 4

    def __post_init__(self):
        if self.eps_w2 < 0.0 or self.c_w < 0.0:
            raise ConstructionError("disturbance bounds must be nonnegative")
        if self.n_modes < 1:
            raise ConstructionError("need at least one spatial mode")
        if not 0.0 < self.fill <= 1.0:
            raise ConstructionError("fill must lie in (0, 1]")


class DisturbanceGen:
    """Sampler for w(t); immutable after construction, sampling is pure.

    ``eps_certified`` and ``cw_certified`` are the construction-time upper
    bounds on the discrete L2 norm and the Hölder quotient; both hold for
    every t, not just sampled instants.
    """

    def __init__(self, spec, grid, modes, amps, freqs, phases, eps_cert, cw_cert):
        self.spec = spec
        self.grid = grid
        self._modes = modes          # (n_modes, n1, n2, n3)
        self._amps = amps            # (n_modes,)
        self._freqs = freqs          # Hz
        self._phases = phases
        self.eps_certified = eps_cert
        self.cw_certified = cw_cert

    @property
    def time_lipschitz(self) -> float:
        """Lipschitz constant of t -> w(t) in the sup norm."""
        return float(np.sum(self._amps * 2.0 * np.pi * self._freqs))

    def envelopes(self, t: float) -> np.ndarray:
        return self._amps * np.cos(2.0 * np.pi * self._freqs * t + self._phases)

    def sample(self, t: float) -> Field3:
        if self._modes.shape[0] == 0:
            return Field3.zeros(self.grid)
        vals = np.tensordot(self.envelopes(t), self._modes, axes=(0, 0))
        return Field3(self.grid, vals)


def _mode_field(grid: Grid3, kvec) -> np.ndarray:
    parts = []
    for ax in range(3):
        rel = (np.arange(grid.node_counts[ax]) * grid.spacing[ax]) / grid.extents[ax]
        parts.append(np.cos(np.pi * kvec[ax] * rel))
    return parts[0][:, None, None] * parts[1][None, :, None] * parts[2][None, None, :]


def _mode_holder_bound(grid: Grid3, kvec) -> float:
    """Exact 1/2-Hölder coefficient bound for a unit-amplitude cosine mode.

    |phi(p) - phi(q)| <= min(2, G ||p-q||) with G the gradient bound, so the
    Hölder quotient never exceeds sqrt(2 G) (attained at distance 2/G) or
    G sqrt(D) when the domain diameter D is smaller than that.
    """
    g = math.pi * math.sqrt(sum((kvec[ax] / grid.extents[ax]) ** 2 for ax in range(3)))
    if g == 0.0:
        return 0.0
    d_star = 2.0 / g
    if d_star <= grid.diameter:
        return math.sqrt(2.0 * g)
    return g * math.sqrt(grid.diameter)


def make_disturbance(spec: DisturbanceSpec, grid: Grid3) -> DisturbanceGen:
    """Build a generator whose samples provably satisfy both budgets.

    Mode amplitudes are scaled so the triangle-inequality worst case of the
    L2 norm equals ``fill * eps_w2``; the per-mode Hölder coefficients are then
    summed and checked against ``c_w``. A violated Hölder budget raises rather
    than silently shrinking the field.
    """
    rng = np.random.default_rng(spec.seed)
    kmax = spec.max_mode_index
    all_k = [(i, j, k) for i in range(kmax + 1) for j in range(kmax + 1)
             for k in range(kmax + 1)]
    if spec.n_modes > len(all_k):
        raise ConstructionError(
            f"n_modes={spec.n_modes} exceeds the {len(all_k)} distinct modes "
            f"with index <= {kmax}"
        )
    picks = rng.choice(len(all_k), size=spec.n_modes, replace=False)
    kvecs = [all_k[p] for p in picks]

    modes = np.stack([_mode_field(grid, kv) for kv in kvecs])
    amps = rng.uniform(0.5, 1.0, spec.n_modes)
    freqs = np.array([spec.temporal_freqs[m % len(spec.temporal_freqs)]
                      for m in range(spec.n_modes)])
    phases = rng.uniform(0.0, 2.0 * np.pi, spec.n_modes)

    if spec.eps_w2 == 0.0:
        amps = np.zeros(spec.n_modes)
        return DisturbanceGen(spec, grid, modes, amps, freqs, phases, 0.0, 0.0)

    w_vol = grid.node_volumes()
    mode_l2 = np.array([math.sqrt(float(np.sum(m * m * w_vol))) for m in modes])
    worst_l2 = float(np.sum(amps * mode_l2))
    amps = amps * (spec.fill * spec.eps_w2 / worst_l2)
    eps_cert = spec.fill * spec.eps_w2

    holder = np.array([_mode_holder_bound(grid, kv) for kv in kvecs])
    cw_cert = float(np.sum(amps * holder))
    if cw_cert > spec.c_w:
        raise ConstructionError(
            f"Hölder budget violated: certified coefficient {cw_cert:.4g} "
            f"exceeds the bound c_w={spec.c_w:.4g} "
            f"(eps_w2={spec.eps_w2:.4g} with these modes is infeasible)"
        )
    return DisturbanceGen(spec, grid, modes, amps, freqs, phases, eps_cert, cw_cert)


def sample_disturbance(gen: DisturbanceGen, t: float) -> Field3:
    """Module-level alias for :meth:`DisturbanceGen.sample`."""
    return gen.sample(t)
