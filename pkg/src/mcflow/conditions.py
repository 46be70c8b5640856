"""Admissibility constants and smallness thresholds for the datum f."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functional import lp_norm, marcinkiewicz_norm
from .grid import RadialGrid, ScalarField, TensorGrid2D, unit_ball_volume
from .nonlinearity import NonlinearTerm

__all__ = [
    "unit_ball_volume",
    "sobolev_constant_s1",
    "lorentz_constant_s1_tilde",
    "lorentz_constant_sp_tilde",
    "ConditionReport",
    "check_admissibility",
    "cheeger_subdomain_check",
]


def sobolev_constant_s1(N: int) -> float:
    """S1 = (N omega_N^(1/N))^-1, the sharp constant of the W^{1,1} -> L^{N/(N-1)} embedding."""
    if N < 2:
        raise ValueError("N must be >= 2")
    return 1.0 / (N * unit_ball_volume(N) ** (1.0 / N))


def lorentz_constant_s1_tilde(N: int) -> float:
    """S1~ = ((N-1) omega_N^(1/N))^-1."""
    if N < 2:
        raise ValueError("N must be >= 2")
    return 1.0 / ((N - 1) * unit_ball_volume(N) ** (1.0 / N))


def lorentz_constant_sp_tilde(N: int, p: float) -> float:
    """S~_p = p Gamma(1 + N/2)^(1/N) / (sqrt(pi) (N - p)) for 1 <= p < N.

    At p = 1 it reduces to :func:`lorentz_constant_s1_tilde` through a
    different route (Gamma instead of omega_N), which the tests exploit.
    """
    if not 1 <= p < N:
        raise ValueError("need 1 <= p < N")
    return p * math.gamma(1 + N / 2) ** (1.0 / N) / (math.sqrt(math.pi) * (N - p))


@dataclass
class ConditionReport:
    s1_constant: float
    s1_tilde_constant: float
    ln_norm: float
    lninf_norm: float
    h_infinity: float
    threshold_ln: float
    threshold_lninf: float
    margin_ln: float
    margin_lninf: float
    serrin_threshold: float | None = None
    serrin_margin: float | None = None
    serrin_consistent: bool | None = None
    cheeger_violations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: (list(map(list, v)) if k == "cheeger_violations" else v) for k, v in self.__dict__.items()}


def _threshold(constant: float, h_inf: float) -> float:
    return math.inf if h_inf == 0 else 1.0 / (constant * h_inf)


def _constant_value(f: ScalarField) -> float | None:
    w = np.asarray(f.grid.weights) > 0
    vals = np.asarray(f.values)[w]
    if vals.size and np.all(vals == vals[0]):
        return float(vals[0])
    return None


def check_admissibility(f: ScalarField, h=None, grid=None, eps0: float = 0.0) -> ConditionReport:
    """Evaluate all smallness conditions for f (and h) on the grid.

    On a ball with constant datum lambda the Serrin threshold N/R is also
    filled in, together with a flag saying whether its sign agrees with the
    sign of the L^N margin (the two are the same inequality on balls).
    """
    grid = f.grid if grid is None else grid
    if grid is not f.grid:
        f = ScalarField(grid, f.values)
    h = NonlinearTerm.one() if h is None else h
    N = grid.dimension
    s1 = sobolev_constant_s1(N)
    s1t = lorentz_constant_s1_tilde(N)
    ln = lp_norm(f, N)
    lninf = marcinkiewicz_norm(f, N)
    h_inf = h.h_infinity
    t_ln = _threshold(s1, h_inf)
    t_lninf = _threshold(s1t, h_inf)
    rep = ConditionReport(
        s1_constant=s1,
        s1_tilde_constant=s1t,
        ln_norm=ln,
        lninf_norm=lninf,
        h_infinity=h_inf,
        threshold_ln=t_ln,
        threshold_lninf=t_lninf,
        margin_ln=t_ln - ln,
        margin_lninf=t_lninf - lninf,
    )
    if isinstance(grid, RadialGrid) and grid.has_origin:
        R = grid.r_outer
        rep.serrin_threshold = N / R
        lam = _constant_value(f)
        if lam is not None:
            rep.serrin_margin = N / R - abs(lam)
            # ||lam||_N = |lam| omega^(1/N) R, so ||lam||_N < 1/S1 is exactly |lam| < N/R
            rep.serrin_consistent = bool(np.sign(1.0 / s1 - ln) == np.sign(rep.serrin_margin))
    rep.cheeger_violations = cheeger_subdomain_check(f, grid, eps0)
    return rep


def cheeger_subdomain_check(f: ScalarField, grid=None, eps0: float = 0.0) -> list[tuple]:
    """Subdomains A of a fixed family with |int_A f| > (1 - eps0) Per(A).

    Radial grids use the balls (or, on annuli, the annuli r_inner < |x| < r)
    bounded by the dual-cell edges, so both volume and perimeter are exact.
    Planar grids use the axis-aligned squares of whole dual cells contained
    in the mask.  Radial entries are ``(radius, integral, perimeter)``,
    planar entries ``(side, (row, col) of the lower-left node, integral,
    perimeter)``.
    """
    grid = f.grid if grid is None else grid
    if not 0 <= eps0 < 1:
        raise ValueError("eps0 must lie in [0, 1)")
    out = []
    if isinstance(grid, RadialGrid):
        N = grid.dimension
        cum = np.cumsum(np.asarray(f.values) * grid.weights)
        edges = grid.cell_edges[1:]
        per = N * grid.omega * edges ** (N - 1)
        if not grid.has_origin:
            per = per + N * grid.omega * grid.r_inner ** (N - 1)
        bad = np.abs(cum) > (1 - eps0) * per
        for r, c, p in zip(edges[bad], cum[bad], per[bad]):
            out.append((float(r), float(c), float(p)))
        return out
    if not isinstance(grid, TensorGrid2D):
        raise TypeError("unsupported grid")
    hsp = grid.spacing
    mask = grid.mask
    vals = np.where(mask, np.asarray(f.values), 0.0) * hsp * hsp
    sat = np.pad(np.cumsum(np.cumsum(vals, 0), 1), ((1, 0), (1, 0)))
    inside = np.pad(np.cumsum(np.cumsum(mask.astype(int), 0), 1), ((1, 0), (1, 0)))
    ny, nx = mask.shape
    for m in range(1, min(ny, nx) + 1):
        tot = sat[m:, m:] - sat[:-m, m:] - sat[m:, :-m] + sat[:-m, :-m]
        cnt = inside[m:, m:] - inside[:-m, m:] - inside[m:, :-m] + inside[:-m, :-m]
        per = 4 * m * hsp
        bad = (cnt == m * m) & (np.abs(tot) > (1 - eps0) * per)
        for i, j in np.argwhere(bad):
            out.append((m * hsp, (int(i), int(j)), float(tot[i, j]), per))
    return out
