"""Closed-form radial solutions used as test oracles.

Two families are available:

* ``power_singular(alpha, N)``: u(r) = r**-alpha - 1 on the unit ball, an
  unbounded solution whose datum f = (N-1) g_alpha(r) / r sits exactly on the
  Marcinkiewicz threshold;
* ``spherical_cap(lam, R, N)``: the graph of a sphere of radius rho = N/lam
  over B_R, the solution for the constant datum lam.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import FluxField, RadialGrid, ScalarField, unit_ball_volume

__all__ = [
    "RadialExactSolution",
    "g_alpha",
    "exact_solution_eval",
    "f_alpha_marcinkiewicz",
]


def _check_alpha(alpha, N):
    if N < 3:
        raise ValueError("the power family needs N >= 3 (for N = 2 the range 0 < alpha < N-1 "
                         "does not give a datum with the stated Marcinkiewicz norm)")
    if not 0 < alpha < N - 1:
        raise ValueError(f"alpha must lie in (0, N-1) = (0, {N - 1}), got {alpha}")


def g_alpha(r, alpha: float, N: int):
    """Radial factor of the power-family datum, evaluated without overflow.

    With q = r**(alpha+1) / alpha the defining quotient equals
    (1 - c q**2) / (1 + q**2)**1.5 where c = (alpha + 2 - N) / (N - 1).
    Tends to 1 as r -> 0 and equals (1 + r**4)**-1.5 for alpha = 1, N = 3.
    """
    _check_alpha(alpha, N)
    r = np.asarray(r, dtype=float)
    if (r <= 0).any():
        raise ValueError("g_alpha is defined for r > 0")
    q = r ** (alpha + 1) / alpha
    c = (alpha + 2 - N) / (N - 1)
    out = (1 - c * q * q) / (1 + q * q) ** 1.5
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RadialExactSolution:
    kind: str
    N: int
    alpha: float | None = None
    lam: float | None = None
    R: float = 1.0

    def __post_init__(self):
        if self.kind == "power_singular":
            _check_alpha(self.alpha, self.N)
            if self.R != 1.0:
                raise ValueError("the power family lives on the unit ball")
        elif self.kind == "spherical_cap":
            if self.N < 2 or not self.R > 0:
                raise ValueError("need N >= 2 and R > 0")
            if self.lam is None or abs(self.lam) > self.N / self.R:
                raise ValueError(f"spherical cap needs |lam| <= N/R = {self.N / self.R}")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")

    @classmethod
    def power_singular(cls, alpha: float, N: int) -> "RadialExactSolution":
        return cls("power_singular", N, alpha=alpha)

    @classmethod
    def spherical_cap(cls, lam: float, R: float, N: int) -> "RadialExactSolution":
        return cls("spherical_cap", N, lam=lam, R=R)

    @property
    def rho(self) -> float:
        """Sphere radius N/|lam| of the cap (infinite for lam = 0)."""
        return math.inf if not self.lam else self.N / abs(self.lam)

    def _r(self, r):
        r = np.asarray(r, dtype=float)
        lo_ok = (r > 0) if self.kind == "power_singular" else (r >= 0)
        if not (lo_ok & (r <= self.R * (1 + 1e-14))).all():
            raise ValueError(f"r outside the domain of {self.kind}")
        return r

    def u(self, r):
        r = self._r(r)
        if self.kind == "power_singular":
            return r ** -self.alpha - 1
        if not self.lam:
            return np.zeros_like(r)
        rho = self.rho
        sign = math.copysign(1.0, self.lam)
        return sign * (np.sqrt(np.maximum(rho * rho - r * r, 0.0)) - math.sqrt(rho * rho - self.R**2))

    def du(self, r):
        r = self._r(r)
        if self.kind == "power_singular":
            return -self.alpha * r ** (-self.alpha - 1)
        if not self.lam:
            return np.zeros_like(r)
        rho = self.rho
        sign = math.copysign(1.0, self.lam)
        with np.errstate(divide="ignore"):
            return -sign * r / np.sqrt(rho * rho - r * r)

    def f(self, r):
        r = self._r(r)
        if self.kind == "power_singular":
            return (self.N - 1) * g_alpha(r, self.alpha, self.N) / r
        return np.full(r.shape, float(self.lam))

    def z(self, r):
        """Radial component of du / sqrt(1 + du^2), computed without cancellation."""
        r = self._r(r)
        if self.kind == "power_singular":
            q = r ** (self.alpha + 1) / self.alpha
            return -1.0 / np.sqrt(1 + q * q)
        if not self.lam:
            return np.zeros_like(r)
        return -math.copysign(1.0, self.lam) * r / self.rho

    def fields(self, grid: RadialGrid):
        """(u, z, f) sampled on a radial grid."""
        if grid.dimension != self.N:
            raise ValueError("grid dimension does not match the solution")
        r = grid.nodes
        return (ScalarField(grid, self.u(r)), FluxField(grid, self.z(r)), ScalarField(grid, self.f(r)))


def exact_solution_eval(sol: RadialExactSolution, r):
    """(u, u', f, z) at radius r."""
    return sol.u(r), sol.du(r), sol.f(r), sol.z(r)


def f_alpha_marcinkiewicz(alpha: float, N: int) -> float:
    """Exact L^{N,infinity} norm (N-1) omega_N^(1/N) of the power-family datum."""
    _check_alpha(alpha, N)
    return (N - 1) * unit_ball_volume(N) ** (1.0 / N)
