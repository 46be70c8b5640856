"""The zero-order term h(u) and the scalar auxiliary functions around it."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "NonlinearTerm",
    "truncate",
    "excess",
    "v_delta",
    "hp",
    "h_tail_sup",
]

VARIANTS = ("identity_one", "bounded_continuous", "singular_power")


def truncate(k, s):
    """T_k(s) = max(-k, min(s, k))."""
    if not k > 0:
        raise ValueError("k must be positive")
    return np.clip(s, -k, k)


def excess(k, s):
    """G_k(s) = s - T_k(s)."""
    return np.asarray(s) - truncate(k, s)


def v_delta(delta, s):
    """Cut-off equal to 1 on [0, delta], linear on (delta, 2 delta), 0 beyond."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    s = np.asarray(s, dtype=float)
    if (s < 0).any():
        raise ValueError("v_delta is defined for s >= 0")
    out = np.clip((2 * delta - s) / delta, 0.0, 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class NonlinearTerm:
    """A continuous h: [0, inf) -> [0, inf], possibly infinite at 0.

    ``singular_power`` is ``h(s) = coefficient * s**(-gamma) + offset``.
    ``bounded_continuous`` is either a callable or a table (piecewise linear,
    constant beyond the last abscissa).  For callables the caller declares
    ``tail_from``: h is nonincreasing on [tail_from, inf), and ``h_infinity``.
    """

    variant: str = "identity_one"
    coefficient: float = 1.0
    gamma: float = 1.0
    offset: float = 0.0
    s1: float = 1.0
    function: Callable | None = field(default=None, repr=False)
    table: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    tail_from: float | None = None
    h_infinity_declared: float | None = None
    decreasing: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "singular_power":
            if not (self.coefficient > 0 and self.gamma > 0 and self.s1 > 0):
                raise ValueError("singular_power needs coefficient, gamma, s1 > 0")
            if self.offset < 0:
                raise ValueError("offset must be >= 0")
            object.__setattr__(self, "decreasing", True)
        elif self.variant == "bounded_continuous":
            if (self.function is None) == (self.table is None):
                raise ValueError("bounded_continuous needs exactly one of function or table")
            if self.table is not None:
                s, v = (np.asarray(a, dtype=float) for a in self.table)
                if s.ndim != 1 or s.shape != v.shape or s.size < 2:
                    raise ValueError("table must be two 1D arrays of equal length >= 2")
                if s[0] != 0 or np.any(np.diff(s) <= 0):
                    raise ValueError("table abscissae must start at 0 and increase")
                if np.any(v < 0) or not np.isfinite(v).all():
                    raise ValueError("table values must be finite and nonnegative")
                object.__setattr__(self, "table", (s, v))
            elif self.tail_from is None or self.h_infinity_declared is None:
                raise ValueError("callable h needs tail_from and h_infinity_declared")
            h0 = float(self(0.0))
            if not math.isfinite(h0):
                raise ValueError("bounded_continuous h must be finite at 0")
        if self.h_zero == 0:
            # h(0) != 0 is part of the standing assumption; behaviour is unknown otherwise
            raise ValueError("h(0) = 0 is not supported")

    # -- constructors -------------------------------------------------------
    @classmethod
    def one(cls) -> "NonlinearTerm":
        return cls("identity_one")

    @classmethod
    def power(cls, gamma: float, coefficient: float = 1.0, offset: float = 0.0, s1: float = 1.0):
        return cls("singular_power", coefficient=coefficient, gamma=gamma, offset=offset, s1=s1)

    @classmethod
    def from_function(cls, fn, *, tail_from: float, h_infinity: float, decreasing: bool = False,
                      gamma: float = 1.0, s1: float = 1.0):
        return cls("bounded_continuous", function=fn, tail_from=tail_from,
                   h_infinity_declared=h_infinity, decreasing=decreasing, gamma=gamma, s1=s1)

    @classmethod
    def from_table(cls, s, values, *, gamma: float = 1.0, s1: float = 1.0):
        s = np.asarray(s, dtype=float)
        v = np.asarray(values, dtype=float)
        dec = bool(np.all(np.diff(v) <= 0))
        return cls("bounded_continuous", table=(s, v), decreasing=dec, gamma=gamma, s1=s1)

    # -- derived constants ---------------------------------------------------
    @property
    def is_singular(self) -> bool:
        return self.variant == "singular_power"

    @property
    def is_constant(self) -> bool:
        return self.variant == "identity_one"

    @property
    def h_zero(self) -> float:
        if self.is_singular:
            return math.inf
        return float(self(0.0))

    @property
    def h_infinity(self) -> float:
        if self.variant == "identity_one":
            return 1.0
        if self.variant == "singular_power":
            return self.offset
        if self.table is not None:
            return float(self.table[1][-1])
        return float(self.h_infinity_declared)

    @property
    def sigma(self) -> float:
        return max(1.0, self.gamma)

    @property
    def c1(self) -> float:
        """Constant in h(s) <= c1 / s**gamma for s <= s1."""
        if self.variant == "singular_power":
            return self.coefficient + self.offset * self.s1**self.gamma
        # bounded h: c1 = sup_{[0, s1]} h * s1**gamma works
        s = np.linspace(0.0, self.s1, 2049)
        return float(np.max(self(s))) * self.s1**self.gamma

    # -- evaluation -----------------------------------------------------------
    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        if (s_arr < 0).any():
            raise ValueError("h evaluated at a negative argument")
        if self.variant == "identity_one":
            out = np.ones_like(s_arr)
        elif self.variant == "singular_power":
            if (s_arr == 0).any():
                raise ValueError("singular h evaluated at 0")
            out = self.coefficient * s_arr ** (-self.gamma) + self.offset
        elif self.table is not None:
            xs, vs = self.table
            out = np.interp(s_arr, xs, vs)
        else:
            out = np.asarray(self.function(s_arr), dtype=float)
            if out.shape != s_arr.shape:
                out = np.broadcast_to(out, s_arr.shape).copy()
        return out if out.ndim else float(out)


def hp(h: NonlinearTerm, p: float, s):
    """h truncated at level 1/(p-1); the cap is also the value at a singular zero."""
    if not 1 < p <= 2:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    cap = 1.0 / (p - 1)
    s_arr = np.asarray(s, dtype=float)
    if (s_arr < 0).any():
        raise ValueError("h evaluated at a negative argument")
    if h.is_singular:
        out = np.full(s_arr.shape, cap)
        pos = s_arr > 0
        out[pos] = np.minimum(h(s_arr[pos]), cap)
    else:
        out = np.minimum(h(s_arr), cap)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def h_tail_sup(h: NonlinearTerm, k: float, samples: int = 4097) -> float:
    """sup of h over [k, inf)."""
    if not k > 0:
        raise ValueError("k must be positive")
    if h.variant == "identity_one":
        return 1.0
    if h.variant == "singular_power":
        return float(h(k))
    if h.table is not None:
        xs, vs = h.table
        return float(max(h(k), vs[xs >= k].max(initial=-np.inf)))
    if h.tail_from is None:
        raise ValueError("h has no declared tail bound")
    stop = max(k, h.tail_from)
    s = np.linspace(k, stop, samples) if stop > k else np.array([k])
    return float(np.max(h(s)))
