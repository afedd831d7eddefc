"""Uniform Cartesian grids, 3D scalar fields, boundary conditions, and the
surface sensor geometry with its sampling / pointwise-injection maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _stencils
from .errors import ConfigurationError

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")


@dataclass(frozen=True)
class Grid3:
    """Node-centered uniform grid over a box, boundary nodes included.

    ``extents`` are the physical box lengths per axis (m), ``spacing`` the node
    spacing per axis (m), ``origin`` the coordinate of node (0, 0, 0). Node
    counts are intervals + 1 and the extents must be integer multiples of the
    spacing.
    """

    extents: tuple[float, float, float]   # m
    spacing: tuple[float, float, float]   # m
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    node_counts: tuple[int, int, int] = field(init=False)

    def __post_init__(self):
        counts = []
        for ax in range(3):
            ext, h = self.extents[ax], self.spacing[ax]
            if h <= 0.0 or ext <= 0.0:
                raise ConfigurationError(
                    f"axis {ax}: extent and spacing must be positive, got "
                    f"extent={ext}, spacing={h}"
                )
            n_int = ext / h
            if abs(n_int - round(n_int)) > 1e-9 * max(1.0, n_int):
                raise ConfigurationError(
                    f"axis {ax}: extent {ext} is not a multiple of spacing {h}"
                )
            counts.append(int(round(n_int)) + 1)
            if counts[-1] < 2:
                raise ConfigurationError(f"axis {ax}: fewer than 2 nodes")
        object.__setattr__(self, "node_counts", tuple(counts))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.node_counts

    @property
    def n_nodes(self) -> int:
        n1, n2, n3 = self.node_counts
        return n1 * n2 * n3

    @property
    def volume(self) -> float:
        """m(Omega), the physical box volume in m^3."""
        return self.extents[0] * self.extents[1] * self.extents[2]

    @property
    def diameter(self) -> float:
        return float(np.sqrt(sum(e * e for e in self.extents)))

    def axis_coords(self, ax: int) -> np.ndarray:
        return self.origin[ax] + self.spacing[ax] * np.arange(self.node_counts[ax])

    def coord(self, idx) -> np.ndarray:
        return np.array(
            [self.origin[ax] + self.spacing[ax] * idx[ax] for ax in range(3)]
        )

    def node_coords_flat(self) -> np.ndarray:
        """(N, 3) coordinates of every node, C order."""
        xs = self.axis_coords(0)
        ys = self.axis_coords(1)
        zs = self.axis_coords(2)
        gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def node_volumes(self) -> np.ndarray:
        """Trapezoid cell volumes per node; sums exactly to m(Omega)."""
        ws = []
        for ax in range(3):
            w = np.full(self.node_counts[ax], self.spacing[ax])
            w[0] *= 0.5
            w[-1] *= 0.5
            ws.append(w)
        return ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]

    def contains(self, p, tol: float = 1e-12) -> bool:
        for ax in range(3):
            lo = self.origin[ax]
            hi = lo + self.extents[ax]
            if p[ax] < lo - tol or p[ax] > hi + tol:
                return False
        return True

    def nearest_index(self, p) -> tuple[int, int, int]:
        idx = []
        for ax in range(3):
            i = int(round((p[ax] - self.origin[ax]) / self.spacing[ax]))
            idx.append(min(max(i, 0), self.node_counts[ax] - 1))
        return tuple(idx)


@dataclass
class Field3:
    """Scalar values over every node of a :class:`Grid3` (shape n1 x n2 x n3)."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.node_counts:
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid "
                f"{self.grid.node_counts}"
            )

    @classmethod
    def zeros(cls, grid: Grid3) -> "Field3":
        return cls(grid, np.zeros(grid.node_counts))

    @classmethod
    def full(cls, grid: Grid3, value: float) -> "Field3":
        return cls(grid, np.full(grid.node_counts, float(value)))

    def copy(self) -> "Field3":
        return Field3(self.grid, self.values.copy())

    def integral(self) -> float:
        """Volume-weighted sum (trapezoid weights)."""
        return float(np.sum(self.values * self.grid.node_volumes()))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2 * self.grid.node_volumes())))


@dataclass(frozen=True)
class FaceBC:
    """One face of the box: zero-flux Neumann or fixed-value Dirichlet.

    ``ghost`` selects the Neumann discretisation: "mirror" reflects the first
    interior neighbour through the boundary node (second order), "copy"
    repeats the boundary value (first order, one-sided vertical coupling).
    """

    kind: str                 # "neumann" | "dirichlet"
    value: float = 0.0        # K, Dirichlet only
    ghost: str = "mirror"     # Neumann only

    def __post_init__(self):
        if self.kind not in ("neumann", "dirichlet"):
            raise ConfigurationError(f"unknown face kind {self.kind!r}")
        if self.ghost not in ("mirror", "copy"):
            raise ConfigurationError(f"unknown ghost policy {self.ghost!r}")
        if not np.isfinite(self.value):
            raise ConfigurationError("dirichlet face value must be finite")

    def code(self) -> int:
        if self.kind == "dirichlet":
            return _stencils.DIRICHLET
        if self.ghost == "mirror":
            return _stencils.NEUMANN_MIRROR
        return _stencils.NEUMANN_COPY


@dataclass(frozen=True)
class BoundaryCondition:
    """Per-face tags in the order (x-, x+, y-, y+, z-, z+)."""

    faces: tuple[FaceBC, FaceBC, FaceBC, FaceBC, FaceBC, FaceBC]

    @classmethod
    def all_neumann(cls, ghost: str = "mirror") -> "BoundaryCondition":
        return cls(tuple(FaceBC("neumann", ghost=ghost) for _ in range(6)))

    @classmethod
    def box(cls, top: FaceBC, others: FaceBC) -> "BoundaryCondition":
        """Top face is z+ (maximal z); the remaining five get ``others``."""
        return cls((others, others, others, others, others, top))

    def compiled(self) -> tuple[np.ndarray, np.ndarray]:
        codes = np.array([f.code() for f in self.faces], dtype=np.int64)
        vals = np.array([f.value for f in self.faces], dtype=np.float64)
        return codes, vals

    def pinned_mask(self, grid: Grid3) -> np.ndarray:
        """Nodes lying on any Dirichlet face."""
        mask = np.zeros(grid.node_counts, dtype=np.bool_)
        sel = [
            (0, slice(None), slice(None)),
            (-1, slice(None), slice(None)),
            (slice(None), 0, slice(None)),
            (slice(None), -1, slice(None)),
            (slice(None), slice(None), 0),
            (slice(None), slice(None), -1),
        ]
        for f, s in zip(self.faces, sel):
            if f.kind == "dirichlet":
                mask[s] = True
        return mask

    def pin(self, values: np.ndarray) -> None:
        """Write Dirichlet face values into ``values`` in place."""
        sel = [
            (0, slice(None), slice(None)),
            (-1, slice(None), slice(None)),
            (slice(None), 0, slice(None)),
            (slice(None), -1, slice(None)),
            (slice(None), slice(None), 0),
            (slice(None), slice(None), -1),
        ]
        for f, s in zip(self.faces, sel):
            if f.kind == "dirichlet":
                values[s] = f.value


def laplacian(fld: Field3, bc: BoundaryCondition) -> Field3:
    """7-point Laplacian of ``fld`` with ghost values taken from ``bc``.

    Mirror ghosts for zero-flux Neumann faces, the fixed face value for
    Dirichlet faces. Second-order accurate in the interior and exact on
    polynomials of total degree <= 2 away from boundaries.
    """
    grid = fld.grid
    codes, vals = bc.compiled()
    inv_h2 = np.array([1.0 / h**2 for h in grid.spacing])
    out = np.empty_like(fld.values)
    _stencils.laplacian_kernel(fld.values, codes, vals, inv_h2, out)
    return Field3(grid, out)


@dataclass(frozen=True, eq=False)
class SensorSet:
    """Thermographer sampling sites: a uniform sub-lattice of the top face.

    The top face is the maximal-z plane of the grid (the plane where the
    scenario places eta_3 = 0). ``every`` decimates the lattice, so the sensor
    pitch is ``every`` grid spacings.
    """

    grid: Grid3
    i1: np.ndarray        # node indices along x
    i2: np.ndarray        # node indices along y
    every: int = 1

    @classmethod
    def top_face(cls, grid: Grid3, every: int = 1) -> "SensorSet":
        if every < 1:
            raise ConfigurationError("sensor decimation must be >= 1")
        n1, n2, _ = grid.node_counts
        return cls(grid, np.arange(0, n1, every), np.arange(0, n2, every), every)

    @property
    def top_index(self) -> int:
        return self.grid.node_counts[2] - 1

    @property
    def rows(self) -> int:
        return len(self.i1)

    @property
    def cols(self) -> int:
        return len(self.i2)

    @property
    def count(self) -> int:
        return self.rows * self.cols

    @property
    def delta_eta(self) -> float:
        """Sensor pitch (m); equal along both surface axes when spacings match."""
        return self.every * self.grid.spacing[0]

    def coords(self) -> np.ndarray:
        """(M, 3) physical sensor coordinates, row-major over (i1, i2)."""
        xs = self.grid.axis_coords(0)[self.i1]
        ys = self.grid.axis_coords(1)[self.i2]
        z = self.grid.axis_coords(2)[self.top_index]
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])


@dataclass
class SurfaceFrame:
    """One thermographer frame: temperatures (K) on the sensor lattice."""

    values: np.ndarray    # (rows, cols)
    t: float = 0.0        # s

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ConfigurationError("surface frame must be 2D")


def restrict_to_surface(fld: Field3, sensors: SensorSet, t: float = 0.0) -> SurfaceFrame:
    """Sample the field at the sensor nodes (pure sampling, no interpolation)."""
    if sensors.grid.node_counts != fld.grid.node_counts:
        raise ConfigurationError("sensor set was built for a different grid")
    vals = fld.values[sensors.i1[:, None], sensors.i2[None, :], sensors.top_index]
    return SurfaceFrame(vals.copy(), t)


def inject_pointwise(
    rate: Field3,
    sensors: SensorSet,
    residual,
    gains,
    dirac_scaling: bool = False,
) -> Field3:
    """Add per-sensor feedback ``g_i * residual_i`` to the rate field.

    The Dirac injection is discretised in Kronecker form: the product lands on
    the single sensor node, with no volume scaling. ``dirac_scaling=True``
    switches to the continuum-consistent 1/cell-volume form.
    """
    res = residual.values if isinstance(residual, SurfaceFrame) else np.asarray(residual)
    if res.shape != (sensors.rows, sensors.cols):
        raise ConfigurationError(
            f"residual shape {res.shape} does not match sensor lattice "
            f"({sensors.rows}, {sensors.cols})"
        )
    g = np.broadcast_to(np.asarray(gains, dtype=np.float64), res.shape)
    if np.any(g < 0.0):
        raise ValueError("observer gains must be nonnegative")
    add = g * res
    if dirac_scaling:
        h = sensors.grid.spacing
        add = add / (h[0] * h[1] * h[2])
    out = rate.copy()
    out.values[sensors.i1[:, None], sensors.i2[None, :], sensors.top_index] += add
    return out
