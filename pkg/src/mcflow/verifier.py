"""Discrete checks of the defining properties of a solution pair (u, z).

A pair solves the problem when |z| <= 1, z pairs with grad u as the area
integrand dictates, -div z = h(u) f inside, and on the boundary either the
trace of u matches the datum or the normal flux saturates against it.  Each
property becomes a nodal residual here.

The normal trace [z, nu] of a merely bounded field has no grid counterpart.
It is modelled by the one-sided difference quotient of u across the last
grid face, pushed through the flux formula.  Every report carries this
caveat in ``normal_trace_model``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import FluxField, RadialGrid, ScalarField, TensorGrid2D, divergence, gradient
from .nonlinearity import NonlinearTerm

__all__ = [
    "BoundaryNode",
    "VerificationReport",
    "verify_pairing",
    "verify_boundary",
    "verify_equation",
    "verify",
]

NORMAL_TRACE_MODEL = "one-sided difference of u across the boundary face through z = g/sqrt(1+g^2)"


@dataclass
class BoundaryNode:
    index: tuple
    trace: float
    z_nu: float
    branch: str
    ok: bool


@dataclass
class VerificationReport:
    flux_bound_excess: float
    pairing_residual: float
    flux_formula_residual: float
    boundary_ok: bool
    equation_residual: float
    boundary_detail: list = field(default_factory=list)
    normal_trace_model: str = NORMAL_TRACE_MODEL

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["boundary_detail"] = [dict(b.__dict__) for b in self.boundary_detail]
        return d


def _interior(grid):
    return np.asarray(grid.free)


def _vectors(u: ScalarField, z: FluxField):
    G = gradient(u).components
    Z = z.components
    if isinstance(u.grid, RadialGrid):
        return G[:, None], Z[:, None]
    return G, Z


def verify_pairing(u: ScalarField, z: FluxField) -> tuple[float, float, float]:
    """(pairing residual, flux formula residual, flux bound excess) at interior nodes.

    z is first projected onto the unit ball; the excess of |z| over 1 is
    returned separately.
    """
    if z.grid is not u.grid:
        raise ValueError("u and z live on different grids")
    G, Z = _vectors(u, z)
    mag = np.sqrt(np.sum(Z * Z, axis=-1))
    excess = float(max(0.0, mag.max(initial=0.0) - 1.0))
    Zp = Z / np.maximum(mag, 1.0)[..., None]
    zz = np.minimum(np.sum(Zp * Zp, axis=-1), 1.0)
    gg = np.sum(G * G, axis=-1)
    root = np.sqrt(1.0 + gg)
    # sqrt(1+|g|^2) - sqrt(1-|z|^2) = (|g|^2 + |z|^2) / (sqrt(1+|g|^2) + sqrt(1-|z|^2))
    rhs = (gg + zz) / (root + np.sqrt(1.0 - zz))
    pairing = np.abs(np.sum(Zp * G, axis=-1) - rhs)
    formula = np.sqrt(np.sum((Zp - G / root[..., None]) ** 2, axis=-1))
    inside = _interior(u.grid)
    return float(pairing[inside].max(initial=0.0)), float(formula[inside].max(initial=0.0)), excess


def _radial_boundary(u, datum, grid: RadialGrid):
    v = np.asarray(u.values)
    h = grid.spacing
    out = []
    for b, nu in zip(grid.boundary_nodes, grid.boundary_normals):
        step = -int(nu)  # towards the interior
        near = [b + step * k for k in (1, 2, 3)]
        trace = float(np.mean(v[near]) - datum[b])
        g = (v[b] - v[b + step]) / h * nu  # radial derivative on the boundary face
        z_nu = float(g / np.sqrt(1 + g * g) * nu)
        out.append(((int(b),), trace, z_nu))
    return out


def _planar_boundary(u, datum, grid: TensorGrid2D):
    v = np.asarray(u.values)
    mask = grid.mask
    h = grid.spacing
    iy, ix = np.nonzero(mask)
    out = []
    for (i, j), nu in zip(grid.boundary_index, grid.boundary_normals):
        d2 = (iy - i) ** 2 + (ix - j) ** 2
        near = np.argsort(d2, kind="stable")[:3]
        trace = float(np.mean(v[iy[near], ix[near]]) - datum[i, j])
        # one-sided difference quotients towards the interior neighbours
        g = np.zeros(2)
        for axis, (di, dj) in enumerate(((0, 1), (1, 0))):
            comp = nu[axis]
            if comp == 0:
                continue
            s = int(np.sign(comp))
            ii, jj = i - s * di, j - s * dj
            if 0 <= ii < mask.shape[0] and 0 <= jj < mask.shape[1] and mask[ii, jj]:
                g[axis] = s * (v[i, j] - v[ii, jj]) / h
        zvec = g / np.sqrt(1 + g @ g)
        out.append(((int(i), int(j)), trace, float(zvec @ nu)))
    return out


def verify_boundary(u: ScalarField, z: FluxField | None = None, grid=None, tol: float = 1e-2,
                    datum: ScalarField | None = None) -> tuple[bool, list[BoundaryNode]]:
    """Weak boundary condition at every boundary node.

    The trace is the mean of u over the three nearest interior nodes minus
    the datum.  A node passes when min(|trace|, |sgn(trace) + z.nu|) <= tol,
    i.e. when the trace vanishes or the outward flux saturates against it.
    z.nu is computed from u (see the module docstring); ``z`` is accepted for
    signature symmetry and only checked for grid consistency.
    """
    grid = u.grid if grid is None else grid
    if not 0 < tol <= 0.1:
        raise ValueError("tol must lie in (0, 0.1]")
    if z is not None and z.grid is not u.grid:
        raise ValueError("u and z live on different grids")
    dat = np.zeros(grid.shape) if datum is None else np.asarray(datum.values)
    raw = _radial_boundary(u, dat, grid) if isinstance(grid, RadialGrid) else _planar_boundary(u, dat, grid)
    nodes = []
    for idx, trace, z_nu in raw:
        attained = abs(trace)
        detached = abs(np.sign(trace) + z_nu) if trace != 0 else abs(z_nu)
        branch = "trace" if attained <= detached else "saturated"
        nodes.append(BoundaryNode(idx, trace, z_nu, branch, min(attained, detached) <= tol))
    return all(n.ok for n in nodes), nodes


def verify_equation(u: ScalarField, z: FluxField, f: ScalarField, h: NonlinearTerm | None = None) -> float:
    """sup over interior nodes of |-div z - h(u) f|."""
    h = NonlinearTerm.one() if h is None else h
    inside = _interior(u.grid)
    uv = np.asarray(u.values)[inside]
    fv = np.asarray(f.values)[inside]
    if h.is_constant:
        hv = np.ones_like(uv)
    else:
        if (uv < 0).any():
            raise ValueError("u is negative at an interior node")
        zero = uv == 0
        if h.is_singular and np.any(zero & (fv > 0)):
            raise ValueError("u vanishes at interior nodes where f > 0 while h(0) is infinite")
        hv = np.zeros_like(uv)
        hv[~zero] = h(uv[~zero])
        if not h.is_singular:
            hv[zero] = h(uv[zero])
    div = np.asarray(divergence(z).values)[inside]
    return float(np.max(np.abs(-div - hv * fv), initial=0.0))


def verify(u: ScalarField, z: FluxField, f: ScalarField, h: NonlinearTerm | None = None,
           tol: float = 1e-2, datum: ScalarField | None = None) -> VerificationReport:
    """Run every check and collect the results."""
    pairing, formula, excess = verify_pairing(u, z)
    ok, detail = verify_boundary(u, z, tol=tol, datum=datum)
    return VerificationReport(
        flux_bound_excess=excess,
        pairing_residual=pairing,
        flux_formula_residual=formula,
        boundary_ok=ok,
        equation_residual=verify_equation(u, z, f, h),
        boundary_detail=detail,
    )
