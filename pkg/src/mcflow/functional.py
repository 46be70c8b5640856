"""Energies, fluxes, PDE residuals and norms on the grids.

The regularised energy of a field u is

    E_p(u) = int sqrt(1 + |grad u|^2) + (p-1)/p int |grad u|^p - int f u,

plus, for diagnostics, the boundary term int_{dOmega} |u - datum|.  It is
discretised conservatively: on radial grids a finite-volume scheme with one
difference quotient per face, on planar grids P1 elements on the two
triangles of every grid square.  The discrete Euler-Lagrange equations of the
same discrete energy are what the solver drives to zero, so energy, residual
and Newton all see one and the same discretisation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .grid import (
    FluxField,
    RadialGrid,
    ScalarField,
    TensorGrid2D,
    gradient,
)
from .nonlinearity import NonlinearTerm, hp

__all__ = [
    "EnergyBreakdown",
    "flux_of",
    "energy",
    "residual",
    "total_variation",
    "marcinkiewicz_norm",
    "lp_norm",
    "sup_norm",
    "level_set_volume",
    "discretization",
]

# |g| floor for the p-term curvature, which is infinite at g = 0 when p < 2
_GRAD_FLOOR = 1e-12


def _area_density(sq):
    return np.sqrt(1.0 + sq) - 1.0


def _area_delta(sq_old, sq_new):
    # sqrt(1+a) - sqrt(1+b) without cancellation
    return (sq_new - sq_old) / (np.sqrt(1.0 + sq_new) + np.sqrt(1.0 + sq_old))


def _pow_delta(mag_old, mag_new, p):
    out = mag_new**p - mag_old**p
    both = (mag_old > 0) & (mag_new > 0)
    a, b = mag_old[both], mag_new[both]
    out[both] = a**p * np.expm1(p * (np.log(b) - np.log(a)))
    return out


class RadialOperator:
    """Finite-volume discretisation on a :class:`RadialGrid`.

    Face ``k`` joins nodes ``k`` and ``k+1``; its weight is the sphere area at
    the face midpoint times the spacing, and the node weights are the exact
    dual-cell volumes.  The scheme is exact for the fluxes ``r`` and
    ``r**(1-N)``.
    """

    def __init__(self, grid: RadialGrid):
        self.grid = grid
        self.h = grid.spacing
        self.face_weight = grid.face_areas * grid.spacing
        self.volume = grid.weights
        self.free = grid.free

    def face_gradients(self, u: np.ndarray) -> np.ndarray:
        return np.diff(u) / self.h

    def pinned_volume_offset(self) -> float:
        # sum of face weights differs from |Omega| by O(h^2); energies add |Omega| exactly
        return self.grid.volume

    def density(self, u, p):
        g = self.face_gradients(u)
        sq = g * g
        area = _area_density(sq)
        pterm = np.abs(g) ** p * ((p - 1) / p) if p is not None else np.zeros_like(g)
        return area, pterm, np.abs(g)

    def internal_force(self, u, p):
        g = self.face_gradients(u)
        F = g / np.sqrt(1.0 + g * g)
        if p is not None:
            F = F + (p - 1) * np.sign(g) * np.abs(g) ** (p - 1)
        AF = self.grid.face_areas * F
        out = np.zeros_like(u)
        out[:-1] -= AF
        out[1:] += AF
        return out

    def hessian(self, u, p):
        g = self.face_gradients(u)
        d = (1.0 + g * g) ** -1.5
        if p is not None:
            d = d + (p - 1) ** 2 * np.maximum(np.abs(g), _GRAD_FLOOR) ** (p - 2)
        w = self.grid.face_areas * d / self.h
        n = u.size
        main = np.zeros(n)
        main[:-1] += w
        main[1:] += w
        return sparse.diags([main, -w, -w], [0, 1, -1], format="csr")

    def banded_hessian(self, u, p, idx):
        """Upper banded form of the Hessian restricted to contiguous free nodes."""
        g = self.face_gradients(u)
        d = (1.0 + g * g) ** -1.5
        if p is not None:
            d = d + (p - 1) ** 2 * np.maximum(np.abs(g), _GRAD_FLOOR) ** (p - 2)
        w = self.grid.face_areas * d / self.h
        main = np.zeros(u.size)
        main[:-1] += w
        main[1:] += w
        ab = np.zeros((2, idx.size))
        ab[1] = main[idx]
        ab[0, 1:] = -w[idx[:-1]]
        return ab

    def energy_change(self, u, d, t, p):
        """E_int(u + t d) - E_int(u), evaluated face by face."""
        g = self.face_gradients(u)
        dg = self.face_gradients(d)
        gn = g + t * dg
        out = _area_delta(g * g, gn * gn)
        if p is not None:
            out = out + (p - 1) / p * _pow_delta(np.abs(g), np.abs(gn), p)
        return float(np.sum(self.face_weight * out))

    @cached_property
    def _load_stencil(self):
        grid = self.grid
        n = grid.node_count
        h = self.h
        N = grid.dimension
        r = grid.nodes
        edges = grid.cell_edges
        xg, wg = np.polynomial.legendre.leggauss(6)
        lo, hi = edges[:-1], edges[1:]
        x = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * xg[None, :]
        wq = 0.5 * (hi - lo)[:, None] * wg[None, :] * N * grid.omega * x ** (N - 1)
        t = (x - r[:, None]) / h
        wl = np.sum(wq * t * (t - 1) / 2, axis=1)
        wc = np.sum(wq * (1 - t * t), axis=1)
        wr = np.sum(wq * t * (t + 1) / 2, axis=1)
        left = np.arange(n) - 1
        right = np.arange(n) + 1
        # quadratic interpolation only where the whole stencil is made of free nodes
        free = grid.free
        usable = free.copy()
        usable[1:-1] &= free[:-2] & free[2:]
        usable[-1] = False
        if grid.has_origin:
            usable[0] = free[1]
            left[0] = 1  # even reflection across the origin
        else:
            usable[0] = False
        lumped = ~usable
        wl[lumped] = 0.0
        wr[lumped] = 0.0
        wc[lumped] = grid.weights[lumped]
        left = np.clip(left, 0, n - 1)
        right = np.clip(right, 0, n - 1)
        return left, right, wl, wc, wr

    def load(self, s: np.ndarray) -> np.ndarray:
        """Integral of the piecewise-quadratic interpolant of s over each dual cell."""
        left, right, wl, wc, wr = self._load_stencil
        return wl * s[left] + wc * s + wr * s[right]

    def boundary_penalty(self, u, datum):
        b = self.grid.boundary_nodes
        return float(np.sum(np.abs(u[b] - datum[b]) * self.grid.boundary_measures))

    def limit_flux_sup(self, u):
        g = self.face_gradients(u)
        return float(np.max(np.abs(g) / np.sqrt(1 + g * g))) if g.size else 0.0


class PlanarOperator:
    """P1 finite elements on a :class:`TensorGrid2D` with lumped source."""

    def __init__(self, grid: TensorGrid2D):
        self.grid = grid
        self.h = grid.spacing
        ny, nx = grid.shape
        idx = np.arange(ny * nx).reshape(ny, nx)
        a = idx[:-1, :-1].ravel()
        b = idx[:-1, 1:].ravel()
        c = idx[1:, :-1].ravel()
        d = idx[1:, 1:].ravel()
        # triangle (a, b, c): grad = ((u_b-u_a)/h, (u_c-u_a)/h); triangle (d, c, b): ((u_d-u_c)/h, (u_d-u_b)/h)
        self.tri = np.concatenate([np.stack([a, b, c], 1), np.stack([d, c, b], 1)])
        gx = np.concatenate([np.stack([-np.ones_like(a), np.ones_like(a), 0 * a], 1),
                             np.stack([np.ones_like(a), -np.ones_like(a), 0 * a], 1)]) / self.h
        gy = np.concatenate([np.stack([-np.ones_like(a), 0 * a, np.ones_like(a)], 1),
                             np.stack([np.ones_like(a), 0 * a, -np.ones_like(a)], 1)]) / self.h
        self.Dx = gx.astype(float)
        self.Dy = gy.astype(float)
        m = self.tri.shape[0]
        rows = np.repeat(np.arange(m), 3)
        cols = self.tri.ravel()
        n = ny * nx
        self.Gx = sparse.csr_matrix((self.Dx.ravel(), (rows, cols)), shape=(m, n))
        self.Gy = sparse.csr_matrix((self.Dy.ravel(), (rows, cols)), shape=(m, n))
        self.area = 0.5 * self.h**2
        self.face_weight = np.full(m, self.area)
        self.volume = grid.weights.ravel()
        self.free = grid.mask.ravel()

    def grads(self, u):
        u = u.ravel()
        return self.Gx @ u, self.Gy @ u

    def pinned_volume_offset(self) -> float:
        return self.grid.volume

    def density(self, u, p):
        gx, gy = self.grads(u)
        sq = gx * gx + gy * gy
        mag = np.sqrt(sq)
        pterm = (p - 1) / p * mag**p if p is not None else np.zeros_like(mag)
        return _area_density(sq), pterm, mag

    def _flux_coeff(self, sq, p):
        c = 1.0 / np.sqrt(1.0 + sq)
        if p is not None:
            mag = np.sqrt(sq)
            c = c + (p - 1) * np.where(mag > 0, np.maximum(mag, _GRAD_FLOOR) ** (p - 2), 0.0)
        return c

    def internal_force(self, u, p):
        gx, gy = self.grads(u)
        c = self._flux_coeff(gx * gx + gy * gy, p) * self.area
        return (self.Gx.T @ (c * gx) + self.Gy.T @ (c * gy)).reshape(u.shape)

    def hessian(self, u, p):
        gx, gy = self.grads(u)
        sq = gx * gx + gy * gy
        s = 1.0 + sq
        # Hessian of sqrt(1+|G|^2): (I (1+|G|^2) - G G^T) / (1+|G|^2)^(3/2)
        hxx = (s - gx * gx) / s**1.5
        hyy = (s - gy * gy) / s**1.5
        hxy = -gx * gy / s**1.5
        if p is not None:
            mag = np.maximum(np.sqrt(sq), _GRAD_FLOOR)
            base = (p - 1) * mag ** (p - 2)
            nx_, ny_ = gx / mag, gy / mag
            hxx = hxx + base * (1 + (p - 2) * nx_ * nx_)
            hyy = hyy + base * (1 + (p - 2) * ny_ * ny_)
            hxy = hxy + base * (p - 2) * nx_ * ny_
        a = self.area
        Gx, Gy = self.Gx, self.Gy
        Hxx = sparse.diags(a * hxx)
        Hyy = sparse.diags(a * hyy)
        Hxy = sparse.diags(a * hxy)
        H = Gx.T @ Hxx @ Gx + Gy.T @ Hyy @ Gy + Gx.T @ Hxy @ Gy + Gy.T @ Hxy @ Gx
        return H.tocsr()

    def energy_change(self, u, d, t, p):
        gx, gy = self.grads(u)
        dx, dy = self.grads(d)
        nx_, ny_ = gx + t * dx, gy + t * dy
        sq0 = gx * gx + gy * gy
        sq1 = nx_ * nx_ + ny_ * ny_
        out = _area_delta(sq0, sq1)
        if p is not None:
            out = out + (p - 1) / p * _pow_delta(np.sqrt(sq0), np.sqrt(sq1), p)
        return float(np.sum(self.area * out))

    def load(self, s):
        return (self.grid.weights * np.asarray(s).reshape(self.grid.shape)).ravel()

    def boundary_penalty(self, u, datum):
        b = self.grid.boundary_index
        ur = u.reshape(self.grid.shape)
        dr = datum.reshape(self.grid.shape)
        diff = np.abs(ur[b[:, 0], b[:, 1]] - dr[b[:, 0], b[:, 1]])
        return float(np.sum(diff * self.grid.boundary_measures))

    def limit_flux_sup(self, u):
        gx, gy = self.grads(u)
        sq = gx * gx + gy * gy
        return float(np.max(np.sqrt(sq / (1 + sq))))


_OPERATORS: dict[int, object] = {}


def discretization(grid):
    """Discrete energy operator for ``grid`` (cached per grid object)."""
    key = id(grid)
    op = _OPERATORS.get(key)
    if op is None or op.grid is not grid:
        op = RadialOperator(grid) if isinstance(grid, RadialGrid) else PlanarOperator(grid)
        if len(_OPERATORS) > 64:
            _OPERATORS.clear()
        _OPERATORS[key] = op
    return op


@dataclass(frozen=True)
class EnergyBreakdown:
    area_term: float
    p_term: float
    source_term: float
    boundary_penalty: float

    @property
    def total(self) -> float:
        return self.area_term + self.p_term - self.source_term + self.boundary_penalty


def flux_of(u: ScalarField) -> FluxField:
    """z = grad u / sqrt(1 + |grad u|^2), node by node."""
    G = gradient(u)
    c = G.components
    if isinstance(u.grid, RadialGrid):
        return FluxField(u.grid, c / np.sqrt(1.0 + c * c))
    sq = np.sum(c * c, axis=-1, keepdims=True)
    return FluxField(u.grid, c / np.sqrt(1.0 + sq))


def energy(u: ScalarField, f_eff: ScalarField, p: float, datum: ScalarField | None = None) -> EnergyBreakdown:
    """Discrete regularised energy split into its four parts.

    The area term is |Omega| + sum(weight * (sqrt(1+|g|^2) - 1)), so it equals
    |Omega| exactly for u = 0 and is never smaller.
    """
    if not 1 < p <= 2:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    op = discretization(u.grid)
    area, pterm, _ = op.density(u.values, p)
    w = op.face_weight
    src = float(op.load(f_eff.values) @ u.values.ravel())
    dat = np.zeros(u.values.size) if datum is None else datum.values.ravel()
    return EnergyBreakdown(
        area_term=op.pinned_volume_offset() + float(np.sum(w * area)),
        p_term=float(np.sum(w * pterm)),
        source_term=src,
        boundary_penalty=op.boundary_penalty(u.values.ravel(), dat),
    )


def residual(u: ScalarField, f: ScalarField, h: NonlinearTerm | None = None, p: float | None = None) -> ScalarField:
    """PDE defect -div(z_p) - h_p(u) f at free nodes, zero at Dirichlet nodes.

    ``z_p`` is the regularised flux grad u/sqrt(1+|grad u|^2) + (p-1)|grad u|^(p-2) grad u.
    With ``p=None`` the p-term is dropped and h is used untruncated, which
    measures how far u is from solving the limit equation.
    """
    h = NonlinearTerm.one() if h is None else h
    if p is not None and not 1 < p <= 2:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    op = discretization(u.grid)
    vals = u.values.ravel()
    free = op.free
    uu = np.clip(vals, 0.0, None) if not h.is_constant else vals
    if h.is_constant:
        hv = np.ones_like(vals)
    elif p is not None:
        hv = hp(h, p, uu)
    else:
        hv = np.ones_like(vals)
        hv[free] = h(uu[free])
    src = op.load((f.values.ravel() * hv).reshape(u.grid.shape) if isinstance(u.grid, TensorGrid2D)
                  else f.values * hv)
    res = np.zeros_like(vals)
    force = op.internal_force(u.values, p).ravel()
    res[free] = (force[free] - src[free]) / op.volume[free]
    return ScalarField(u.grid, res.reshape(u.grid.shape))


def total_variation(u: ScalarField) -> float:
    """int |grad u| from the face (radial) or triangle (planar) gradients."""
    op = discretization(u.grid)
    _, _, mag = op.density(u.values, None)
    return float(np.sum(op.face_weight * mag))


def _weights_and_values(f: ScalarField):
    w = f.grid.weights.ravel()
    v = np.abs(f.values.ravel())
    keep = w > 0
    return w[keep], v[keep]


def level_set_volume(f: ScalarField, t: float) -> float:
    """|{|f| > t}| by quadrature of the indicator."""
    w, v = _weights_and_values(f)
    return float(np.sum(w[v > t]))


def marcinkiewicz_norm(f: ScalarField, N: int | None = None, thresholds: int | None = None) -> float:
    """sup_t t |{|f| > t}|^(1/N).

    By default the supremum is taken exactly over the sampled values: the
    distribution function is a step function, and t |{|f|>t}|^(1/N) is
    maximised as t increases to a sampled value v, where the level set
    becomes {|f| >= v}.  With ``thresholds=k`` a log-spaced sweep of k levels
    between 1e-6 sup|f| and sup|f| is used instead.
    """
    N = f.grid.dimension if N is None else N
    if N != f.grid.dimension:
        raise ValueError(f"N={N} does not match grid dimension {f.grid.dimension}")
    w, v = _weights_and_values(f)
    top = float(v.max(initial=0.0))
    if top == 0.0:
        return 0.0
    if thresholds is not None:
        ts = np.geomspace(top * 1e-6, top, thresholds)
        order = np.argsort(v)
        vs, ws = v[order], w[order]
        tail = np.concatenate([np.cumsum(ws[::-1])[::-1], [0.0]])
        pos = np.searchsorted(vs, ts, side="right")
        return float(np.max(ts * tail[pos] ** (1.0 / N)))
    order = np.argsort(-v, kind="stable")
    vs, ws = v[order], w[order]
    cum = np.cumsum(ws)
    # for tied values the level set {|f| >= v} includes all of them
    last = np.searchsorted(-vs, -vs, side="right") - 1
    return float(np.max(vs * cum[last] ** (1.0 / N)))


def lp_norm(f: ScalarField, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    w, v = _weights_and_values(f)
    return float(np.sum(w * v**p) ** (1.0 / p))


def sup_norm(f: ScalarField) -> float:
    return float(np.max(np.abs(f.values)))
