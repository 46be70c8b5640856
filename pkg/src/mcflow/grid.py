"""Discrete domains and nodal calculus.

Two grid families are supported:

* :class:`RadialGrid` -- radially symmetric balls and annuli in R^N, reduced
  to a uniform grid in the radius.
* :class:`TensorGrid2D` -- a uniform tensor grid in the plane with a boolean
  mask selecting the nodes that lie inside the domain.

Fields live on nodes.  Every node carries a quadrature weight (the volume of
its dual cell), so integrals are plain weighted sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = [
    "RadialGrid",
    "TensorGrid2D",
    "ScalarField",
    "FluxField",
    "unit_ball_volume",
    "gradient",
    "divergence_radial",
    "divergence_2d",
    "divergence",
    "integrate",
    "integrate_ball",
]


def unit_ball_volume(N: int) -> float:
    """Lebesgue measure of the unit ball of R^N."""
    if N < 1:
        raise ValueError(f"dimension must be >= 1, got {N}")
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform radial grid on the ball ``r_inner = 0`` or an annulus.

    Node ``i`` sits at ``r_inner + i*h``.  The outer node is always a
    Dirichlet node; the inner node is a Dirichlet node for annuli and the
    (free) origin for balls.
    """

    dimension: int
    r_inner: float
    r_outer: float
    node_count: int
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dimension}")
        if self.r_inner < 0 or not self.r_outer > self.r_inner:
            raise ValueError("need 0 <= r_inner < r_outer")
        if self.node_count < 3:
            raise ValueError("node_count must be >= 3")
        nodes = np.linspace(self.r_inner, self.r_outer, self.node_count)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def ball(cls, dimension: int, radius: float, node_count: int) -> "RadialGrid":
        return cls(dimension, 0.0, radius, node_count)

    @classmethod
    def annulus(cls, dimension: int, r_inner: float, r_outer: float, node_count: int) -> "RadialGrid":
        if r_inner <= 0:
            raise ValueError("annulus needs r_inner > 0")
        return cls(dimension, r_inner, r_outer, node_count)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.node_count,)

    @property
    def spacing(self) -> float:
        return (self.r_outer - self.r_inner) / (self.node_count - 1)

    @property
    def has_origin(self) -> bool:
        return self.r_inner == 0.0

    @property
    def omega(self) -> float:
        return unit_ball_volume(self.dimension)

    @property
    def faces(self) -> np.ndarray:
        """Midpoints between consecutive nodes."""
        r = self.nodes
        return 0.5 * (r[1:] + r[:-1])

    @property
    def face_areas(self) -> np.ndarray:
        """Surface measure of the sphere through each face midpoint."""
        N = self.dimension
        return N * self.omega * self.faces ** (N - 1)

    @property
    def cell_edges(self) -> np.ndarray:
        return np.concatenate([[self.r_inner], self.faces, [self.r_outer]])

    @property
    def weights(self) -> np.ndarray:
        """Exact volume of each dual cell; sums to the domain volume."""
        e = self.cell_edges
        return self.omega * (e[1:] ** self.dimension - e[:-1] ** self.dimension)

    @property
    def volume(self) -> float:
        return self.omega * (self.r_outer**self.dimension - self.r_inner**self.dimension)

    @property
    def boundary_nodes(self) -> np.ndarray:
        if self.has_origin:
            return np.array([self.node_count - 1])
        return np.array([0, self.node_count - 1])

    @property
    def free(self) -> np.ndarray:
        """Boolean mask of nodes that are not pinned by Dirichlet data."""
        m = np.ones(self.node_count, dtype=bool)
        m[self.boundary_nodes] = False
        return m

    @property
    def boundary_normals(self) -> np.ndarray:
        """Outward radial normal (+1 or -1) at each boundary node."""
        return np.where(self.boundary_nodes == self.node_count - 1, 1.0, -1.0)

    @property
    def boundary_measures(self) -> np.ndarray:
        N = self.dimension
        return N * self.omega * self.nodes[self.boundary_nodes] ** (N - 1)

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def sample(self, fn) -> "ScalarField":
        return ScalarField(self, fn(self.nodes))


@dataclass(frozen=True, eq=False)
class TensorGrid2D:
    """Uniform planar grid; ``mask[i, j]`` marks node (x_j, y_i) inside the domain.

    Nodes outside the mask that touch it through a grid edge are the boundary
    nodes, where Dirichlet data is imposed.  The outermost ring of the array
    must lie outside the mask so every boundary node exists.
    """

    mask: np.ndarray
    spacing: float
    origin: tuple[float, float] = (0.0, 0.0)
    boundary_index: np.ndarray = field(init=False, repr=False)
    boundary_normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2 or min(mask.shape) < 3:
            raise ValueError("mask must be a 2D array with both sides >= 3")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any():
            raise ValueError("mask must not touch the outer ring of the grid")
        if not mask.any():
            raise ValueError("mask selects no nodes")
        _, ncomp = ndimage.label(mask)
        if ncomp != 1:
            raise ValueError(f"masked region must be connected, found {ncomp} components")
        if mask.sum() > 1:
            nb = _neighbour_count(mask)
            if (nb[mask] == 0).any():
                raise ValueError("every interior node needs an interior neighbour")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

        # staircase normals: sum of outward unit normals of the faces shared with the mask
        nx_ = np.zeros(mask.shape)
        ny_ = np.zeros(mask.shape)
        pad = np.pad(mask, 1)
        left = pad[1:-1, :-2]
        right = pad[1:-1, 2:]
        down = pad[:-2, 1:-1]
        up = pad[2:, 1:-1]
        outside = ~mask
        nx_ += np.where(outside & left, 1.0, 0.0) - np.where(outside & right, 1.0, 0.0)
        ny_ += np.where(outside & down, 1.0, 0.0) - np.where(outside & up, 1.0, 0.0)
        touching = outside & (left | right | down | up)
        idx = np.argwhere(touching)
        normals = np.stack([nx_[touching], ny_[touching]], axis=1)
        length = np.linalg.norm(normals, axis=1)
        if (length == 0).any():
            bad = idx[length == 0][0]
            raise ValueError(f"boundary node {tuple(bad)} has no well-defined outward normal")
        normals = normals / length[:, None]
        object.__setattr__(self, "boundary_index", idx)
        object.__setattr__(self, "boundary_normals", normals)

    @classmethod
    def rectangle(cls, nx: int, ny: int, spacing: float) -> "TensorGrid2D":
        """Rectangle whose boundary is the outer ring of an ``ny x nx`` node array."""
        if nx < 3 or ny < 3:
            raise ValueError("nx, ny must be >= 3")
        mask = np.zeros((ny, nx), dtype=bool)
        mask[1:-1, 1:-1] = True
        return cls(mask, spacing)

    @classmethod
    def disk(cls, n: int, radius: float) -> "TensorGrid2D":
        """Staircase approximation of the disk of given radius centred at the origin."""
        if n < 5:
            raise ValueError("n must be >= 5")
        h = 2 * radius / (n - 1)
        # one extra ring so the mask never touches the array edge
        m = n + 2
        x0 = -radius - h
        c = x0 + h * np.arange(m)
        X, Y = np.meshgrid(c, c)
        mask = X**2 + Y**2 < radius**2 * (1 - 1e-12)
        return cls(mask, h, origin=(x0, x0))

    @property
    def ny(self) -> int:
        return self.mask.shape[0]

    @property
    def nx(self) -> int:
        return self.mask.shape[1]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mask.shape

    @property
    def dimension(self) -> int:
        return 2

    @property
    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + self.spacing * np.arange(self.nx)
        y = self.origin[1] + self.spacing * np.arange(self.ny)
        return np.meshgrid(x, y)

    @property
    def weights(self) -> np.ndarray:
        return np.where(self.mask, self.spacing**2, 0.0)

    @property
    def volume(self) -> float:
        return float(self.mask.sum()) * self.spacing**2

    @property
    def free(self) -> np.ndarray:
        return self.mask

    @property
    def boundary_measures(self) -> np.ndarray:
        b = self.boundary_index
        pad = np.pad(self.mask, 1)
        i, j = b[:, 0] + 1, b[:, 1] + 1
        faces = pad[i, j - 1].astype(int) + pad[i, j + 1] + pad[i - 1, j] + pad[i + 1, j]
        return faces * self.spacing

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def sample(self, fn) -> "ScalarField":
        X, Y = self.coordinates
        return ScalarField(self, fn(X, Y))


def _neighbour_count(mask: np.ndarray) -> np.ndarray:
    pad = np.pad(mask, 1).astype(int)
    return pad[1:-1, :-2] + pad[1:-1, 2:] + pad[:-2, 1:-1] + pad[2:, 1:-1]


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: RadialGrid | TensorGrid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 0:
            v = np.full(self.grid.shape, float(v))
        if v.shape != self.grid.shape:
            raise ValueError(f"field has shape {v.shape}, grid expects {self.grid.shape}")
        if not np.isfinite(v).all():
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class FluxField:
    """Vector field on the nodes: shape ``(n,)`` radially, ``(ny, nx, 2)`` in 2D."""

    grid: RadialGrid | TensorGrid2D
    components: np.ndarray

    def __post_init__(self):
        c = np.array(self.components, dtype=float)
        expected = self.grid.shape if isinstance(self.grid, RadialGrid) else self.grid.shape + (2,)
        if c.shape != expected:
            raise ValueError(f"flux has shape {c.shape}, grid expects {expected}")
        if not np.isfinite(c).all():
            raise ValueError("flux components must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @property
    def magnitude(self) -> np.ndarray:
        if isinstance(self.grid, RadialGrid):
            return np.abs(self.components)
        return np.hypot(self.components[..., 0], self.components[..., 1])


def gradient(u: ScalarField) -> FluxField:
    """Nodal gradient by centred differences, second-order one-sided at the ends.

    On a ball the origin uses the even reflection u(-h) = u(h), so the radial
    derivative vanishes there.
    """
    grid = u.grid
    if isinstance(grid, RadialGrid):
        g = np.gradient(u.values, grid.spacing, edge_order=2)
        if grid.has_origin:
            g[0] = 0.0
        return FluxField(grid, g)
    gy, gx = np.gradient(u.values, grid.spacing, edge_order=2)
    return FluxField(grid, np.stack([gx, gy], axis=-1))


def divergence_radial(F: FluxField, N: int | None = None) -> ScalarField:
    """r^(1-N) d/dr (r^(N-1) F) for a radial field, written as F' + (N-1) F / r.

    At the origin the regular limit N F'(0) is used; F must vanish there.
    """
    grid = F.grid
    if not isinstance(grid, RadialGrid):
        raise TypeError("divergence_radial needs a radial field")
    N = grid.dimension if N is None else N
    if N < 2:
        raise ValueError("N must be >= 2")
    h = grid.spacing
    c = F.components
    dF = np.gradient(c, h, edge_order=2)
    r = grid.nodes
    out = np.empty_like(c)
    if grid.has_origin:
        scale = max(1.0, float(np.max(np.abs(c))))
        if abs(c[0]) > 1e-12 * scale:
            raise ValueError("radial field is singular at the origin (F(0) != 0)")
        out[0] = N * c[1] / h  # odd extension: F'(0) ~ (F(h) - F(-h)) / 2h
        out[1:] = dF[1:] + (N - 1) * c[1:] / r[1:]
    else:
        out[:] = dF + (N - 1) * c / r
    return ScalarField(grid, out)


def divergence_2d(F: FluxField) -> ScalarField:
    grid = F.grid
    if not isinstance(grid, TensorGrid2D):
        raise TypeError("divergence_2d needs a planar field")
    h = grid.spacing
    dFx = np.gradient(F.components[..., 0], h, axis=1, edge_order=2)
    dFy = np.gradient(F.components[..., 1], h, axis=0, edge_order=2)
    return ScalarField(grid, dFx + dFy)


def divergence(F: FluxField) -> ScalarField:
    if isinstance(F.grid, RadialGrid):
        return divergence_radial(F)
    return divergence_2d(F)


def integrate(g: ScalarField) -> float:
    """Volume integral over the domain using the dual-cell weights."""
    return float(np.sum(g.values * g.grid.weights))


def integrate_ball(g: ScalarField, grid: RadialGrid | None = None) -> float:
    """Integral of a radial function over the ball or annulus of its grid."""
    grid = g.grid if grid is None else grid
    if not isinstance(grid, RadialGrid):
        raise TypeError("integrate_ball needs a radial grid")
    if g.grid is not grid:
        g = ScalarField(grid, g.values)
    return integrate(g)
