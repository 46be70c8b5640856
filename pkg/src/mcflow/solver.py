"""Continuation solver for the regularised problems and its limit p -> 1+.

For fixed p the discrete problem is the minimisation of a strictly convex
energy, solved by damped Newton with an Armijo line search on the energy.
A decreasing sequence of exponents is walked with warm starts.  A non
constant h is handled by an outer fixed point that freezes the source
f * h_p(u) at the previous iterate.

The reported limit field is a three-point polynomial extrapolation in p-1 of
the last three continuation iterates, which removes the O(p-1) and O((p-1)^2)
parts of the regularisation error.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.sparse import linalg as splinalg

from .conditions import sobolev_constant_s1
from .functional import discretization, flux_of, level_set_volume, lp_norm, total_variation
from .grid import FluxField, RadialGrid, ScalarField
from .nonlinearity import NonlinearTerm, hp, v_delta

__all__ = [
    "SolverConfig",
    "StepRecord",
    "SolveReport",
    "NewtonFailure",
    "StampacchiaResult",
    "default_schedule",
    "solve_fixed_p",
    "continuation_solve",
    "detect_extremal",
    "uniqueness_probe",
    "stampacchia_decay_check",
]

CONVERGED = "converged_subcritical"
BLOWUP = "extremal_blowup"
FAILURE = "newton_failure"


def default_schedule(depth: int = 16) -> tuple[float, ...]:
    """p_k = 1 + 2**-k for k = 1..depth."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return tuple(1.0 + 2.0**-k for k in range(1, depth + 1))


@dataclass(frozen=True)
class SolverConfig:
    p_schedule: tuple[float, ...] = field(default_factory=default_schedule)
    newton_tol: float = 1e-10
    newton_max_iter: int = 60
    damping: float = 0.5
    min_step: float = 2.0**-20
    outer_fixed_point_tol: float = 1e-8
    outer_max_iter: int = 200
    blowup_sup_threshold: float = 1e4
    plateau_tol: float = 1e-4
    extrapolate: bool = True

    def __post_init__(self):
        s = tuple(float(p) for p in self.p_schedule)
        if not s:
            raise ValueError("p_schedule is empty")
        if any(not 1 < p <= 2 for p in s):
            raise ValueError("every exponent must lie in (1, 2]")
        if any(b >= a for a, b in zip(s, s[1:])):
            raise ValueError("p_schedule must be strictly decreasing")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        object.__setattr__(self, "p_schedule", s)

    @classmethod
    def with_depth(cls, depth: int, **kw) -> "SolverConfig":
        return cls(p_schedule=default_schedule(depth), **kw)


class NewtonFailure(RuntimeError):
    """Damped Newton could not reach the tolerance."""

    def __init__(self, message, p=None, residual=None, field=None):
        super().__init__(message)
        self.p = p
        self.residual = residual
        self.field = field


@dataclass
class StepRecord:
    p: float
    sup_norm: float
    tv: float
    energy_p_term: float
    flux_sup: float
    max_residual: float
    newton_iters: int
    outer_iters: int
    truncated_nodes: int
    degenerate_mass: float
    saturated_fraction: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SolveReport:
    steps: list[StepRecord]
    classification: str
    u: ScalarField | None
    z: FluxField | None
    u_last: ScalarField | None
    message: str = ""
    borderline: bool = False

    @property
    def sup_bound(self) -> float:
        """The recorded uniform bound M = max over steps of sup |u_p|."""
        return max((s.sup_norm for s in self.steps), default=0.0)

    @property
    def p_term_bound(self) -> float:
        """Recorded C = max over steps of (p-1) int |grad u_p|^p."""
        return max((s.energy_p_term for s in self.steps), default=0.0)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps])

    def as_dict(self) -> dict:
        return {
            "classification": self.classification,
            "message": self.message,
            "borderline": self.borderline,
            "sup_bound": self.sup_bound,
            "p_term_bound": self.p_term_bound,
            "steps": [s.as_dict() for s in self.steps],
        }


def _flat(a):
    return np.asarray(a, dtype=float).ravel()


def _hessian(op, u, p, free_idx, radial):
    """Hessian restricted to the free nodes and its diagonal."""
    if radial:
        ab = op.banded_hessian(u, p, free_idx)
        return ab, ab[1]
    H = op.hessian(u, p)[free_idx][:, free_idx].tocsc()
    return H, H.diagonal()


def _newton_direction(H, rhs, radial):
    try:
        if radial:
            d = linalg.solveh_banded(H, rhs)
        else:
            d = splinalg.spsolve(H, rhs)
    except (linalg.LinAlgError, RuntimeError):
        return None
    return d if np.isfinite(d).all() else None


def _invert_flux(tau, p, tol_iter=100):
    """Solve g/sqrt(1+g^2) + (p-1)|g|^(p-2) g = tau face by face.

    The map is odd and strictly increasing, so each face is a scalar
    monotone equation.  It is solved by Newton's method in y = log|g|,
    safeguarded by bisection on a bracket derived from the two terms
    separately.  Returns (g, iterations); g may be +-inf when the root lies
    beyond the floating range, and underflows to 0 where the root is below
    the smallest normal number.  The flux value F(g) is returned from the
    logarithmic variable, so it stays exact in both cases.
    """
    tau = np.asarray(tau, dtype=float)
    a = np.abs(tau)
    out = np.zeros_like(a)
    pos = a > 0
    flux = np.zeros_like(a)
    if not pos.any():
        return out, flux, 0
    t = a[pos]
    q = p - 1
    # F(g) >= (p-1) g^(p-1) and, for t < 1, F(g) >= g / sqrt(1+g^2)
    y_hi = np.log(t / q) / q
    area_ok = t < 1
    y_hi[area_ok] = np.minimum(y_hi[area_ok], np.log(t[area_ok]) - 0.5 * np.log1p(-t[area_ok] ** 2))
    # F(g) <= g + (p-1) g^(p-1): one of the terms is at least t/2
    y_lo = np.minimum(np.log(t / 2), np.log(t / (2 * q)) / q)
    y = 0.5 * (y_lo + y_hi)
    it = 0
    for it in range(1, tol_iter + 1):
        L = np.logaddexp(0.0, 2 * y)
        area = np.exp(y - 0.5 * L)
        pt = q * np.exp(np.minimum(q * y, 700.0))
        Fy = area + pt
        dF = np.exp(y - 1.5 * L) + q * pt
        err = Fy - t
        y_lo = np.where(err < 0, y, y_lo)
        y_hi = np.where(err > 0, y, y_hi)
        done = (np.abs(err) <= 4 * np.finfo(float).eps * t) | (y_hi - y_lo <= 1e-15 * np.maximum(1, np.abs(y)))
        if done.all():
            break
        yn = y - err / dF
        bad = ~((yn > y_lo) & (yn < y_hi))
        yn[bad] = 0.5 * (y_lo[bad] + y_hi[bad])
        y = np.where(done, y, yn)
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(y)
        L = np.logaddexp(0.0, 2 * y)
        flux[pos] = np.exp(y - 0.5 * L) + q * np.exp(q * y)
    sgn = np.sign(tau)
    return out * sgn, flux * sgn, it


def _solve_radial(grid: RadialGrid, load: np.ndarray, p: float, boundary: np.ndarray):
    """Exact minimiser of the radial discrete energy in face-gradient coordinates.

    With g_j the difference quotient on face j the energy is
    sum_j A_j h Phi_p(g_j) + h sum_j g_j B_j + const, where B_j is the load
    accumulated from the inner end.  On a ball this is separable:
    A_j F_p(g_j) = -B_j.  On an annulus the flux through the inner sphere is
    an extra unknown c, fixed by the prescribed jump u(r_out) - u(r_in).
    """
    A = grid.face_areas
    h = grid.spacing
    n = grid.node_count
    if grid.has_origin:
        B = np.cumsum(load[:-1])
        g, F, iters = _invert_flux(-B / A, p)
        calls = 1
    else:
        B = np.concatenate([[0.0], np.cumsum(load[1:-1])])
        jump = boundary[-1] - boundary[0]

        def total(c):
            gg, _, _ = _invert_flux((c - B) / A, p)
            return h * np.sum(gg) - jump

        # bracket the inner flux
        lo, hi = float(np.min(B)) - 1.0, float(np.max(B)) + 1.0
        step = max(1.0, abs(hi - lo))
        while total(lo) > 0:
            lo -= step
            step *= 2
        step = max(1.0, abs(hi - lo))
        while total(hi) < 0:
            hi += step
            step *= 2
        c, rres = optimize.brentq(total, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                  maxiter=400, full_output=True)
        g, F, iters = _invert_flux((c - B) / A, p)
        calls = rres.function_calls
    if not np.isfinite(g).all():
        raise NewtonFailure("face gradients exceed the floating point range", p=p,
                            residual=np.inf, field=np.full(n, np.inf))
    u = np.empty(n)
    u[-1] = boundary[-1]
    u[:-1] = boundary[-1] - h * np.cumsum(g[::-1])[::-1]
    if not grid.has_origin:
        u[0] = boundary[0]
    AF = A * F
    force = np.zeros(n)
    force[:-1] -= AF
    force[1:] += AF
    free = grid.free
    res = float(np.max(np.abs((force - load)[free] / grid.weights[free]))) if free.any() else 0.0
    if not np.isfinite(u).all():
        raise NewtonFailure("solution exceeds the floating point range", p=p,
                            residual=np.inf, field=np.full(n, np.inf))
    return u, iters * calls, res


def solve_fixed_p(f_eff: ScalarField, p: float, warm_start: ScalarField, cfg: SolverConfig | None = None,
                  *, return_info: bool = False, method: str = "auto"):
    """Minimise the discrete energy at exponent p with the source frozen.

    On radial grids the default method solves the equivalent scalar face
    equations (see :func:`_solve_radial`); ``method="nodal"`` forces damped
    Newton in nodal values, which is what planar grids always use.

    Dirichlet nodes keep the values of ``warm_start``.  Convergence means the
    nodal residual (force minus load, per unit cell volume) is at most
    ``cfg.newton_tol`` at every free node, or at most the round-off level of
    that node when this is larger.  The round-off level is
    16 eps max|u| H_ii / V_i: the change of the force caused by perturbing u
    in its last bits.  It only matters in the tiny cells next to the origin,
    where the p-term makes H_ii / V_i large.
    """
    cfg = SolverConfig() if cfg is None else cfg
    if not 1 < p <= 2:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    grid = warm_start.grid
    op = discretization(grid)
    radial = isinstance(grid, RadialGrid)
    if radial and not method == "nodal":
        u, iters, res = _solve_radial(grid, _flat(op.load(f_eff.values)), p, _flat(warm_start.values))
        if res > cfg.newton_tol:
            raise NewtonFailure(f"radial solve left residual {res:.3e}", p=p, residual=res, field=u)
        out = ScalarField(grid, u)
        return (out, {"newton_iters": iters, "residual": res}) if return_info else out
    shape = grid.shape
    free_idx = np.flatnonzero(op.free)
    load = _flat(op.load(f_eff.values))
    vol = op.volume[free_idx]
    u = _flat(warm_start.values).copy()
    iters = 0
    res = 0.0
    while free_idx.size:
        g = _flat(op.internal_force(u.reshape(shape), p)) - load
        gf = g[free_idx]
        H, diag = _hessian(op, u.reshape(shape), p, free_idx, radial)
        excess_res = np.abs(gf / vol)
        res = float(np.max(excess_res))
        floor = 16 * np.finfo(float).eps * max(float(np.max(np.abs(u))), 1.0) * diag / vol
        if np.all(excess_res <= np.maximum(cfg.newton_tol, floor)):
            break
        if iters >= cfg.newton_max_iter:
            raise NewtonFailure(f"no convergence in {iters} Newton steps (residual {res:.3e})",
                                p=p, residual=res, field=u.reshape(shape))
        iters += 1
        d_free = _newton_direction(H, -gf, radial)
        slope = float(gf @ d_free) if d_free is not None else 0.0
        if d_free is None or not slope < 0:
            # fall back to diagonally scaled steepest descent
            d_free = -gf / diag
            slope = float(gf @ d_free)
        d = np.zeros_like(u)
        d[free_idx] = d_free
        t = 1.0
        while True:
            dE = op.energy_change(u.reshape(shape), d.reshape(shape), t, p) - t * float(load @ d)
            if dE <= 1e-4 * t * slope:
                break
            t *= cfg.damping
            if t < cfg.min_step:
                raise NewtonFailure(f"line search reached the damping floor (residual {res:.3e})",
                                    p=p, residual=res, field=u.reshape(shape))
        u = u + t * d
    out = ScalarField(grid, u.reshape(shape))
    if return_info:
        return out, {"newton_iters": iters, "residual": res}
    return out


def _source(f_vals, h: NonlinearTerm, p, u_vals):
    if h.is_constant:
        return f_vals
    return f_vals * hp(h, p, np.clip(u_vals, 0.0, None))


def _outer_solve(f: ScalarField, h: NonlinearTerm, p, u_start, u_frozen, cfg):
    """Fixed point u = S_p(f h_p(u)) with adaptive under-relaxation."""
    grid = f.grid
    newton = 0
    if h.is_constant:
        u, info = solve_fixed_p(f, p, u_start, cfg, return_info=True)
        return u, info["newton_iters"], 1, info["residual"]
    theta = 1.0
    prev_inc = math.inf
    cur = u_frozen
    warm = u_start
    for m in range(1, cfg.outer_max_iter + 1):
        s = ScalarField(grid, _source(f.values, h, p, cur.values))
        new, info = solve_fixed_p(s, p, warm, cfg, return_info=True)
        newton += info["newton_iters"]
        inc = float(np.max(np.abs(new.values - cur.values)))
        if inc <= cfg.outer_fixed_point_tol:
            return new, newton, m, info["residual"]
        if inc > 0.9 * prev_inc:
            theta = max(0.5 * theta, 1e-3)
        prev_inc = inc
        cur = ScalarField(grid, cur.values + theta * (new.values - cur.values))
        warm = new
    raise NewtonFailure(f"outer fixed point did not converge in {cfg.outer_max_iter} iterations "
                        f"(last increment {inc:.3e})", p=p, residual=inc, field=cur.values)


def _step_record(u: ScalarField, f: ScalarField, h: NonlinearTerm, p, newton, outer, res) -> StepRecord:
    """Diagnostics of one continuation step; ``res`` is the solver's own residual."""
    op = discretization(u.grid)
    vals = _flat(u.values)
    src = _source(f.values, h, p, u.values)
    free = op.free
    _, _, mag = op.density(u.values, p)
    p_energy = float(np.sum(op.face_weight * mag**p)) * (p - 1)
    truncated = 0
    degenerate = 0.0
    if not h.is_constant:
        pos = np.clip(vals[free], 0.0, None)
        cap = 1.0 / (p - 1)
        with np.errstate(divide="ignore"):
            raw = np.full(pos.shape, math.inf)
            nz = pos > 0
            raw[nz] = h(pos[nz])
            if not h.is_singular:
                raw[~nz] = h(pos[~nz])
        truncated = int(np.count_nonzero(raw > cap))
        # mass of h_p(u) f on {u <= delta}, delta = p - 1, for diagnostics only
        w = op.volume[free] * v_delta(p - 1, pos)
        degenerate = float(np.sum(w * _flat(src)[free]))
    return StepRecord(
        p=p,
        sup_norm=float(np.max(np.abs(vals))),
        tv=total_variation(u),
        energy_p_term=p_energy,
        flux_sup=op.limit_flux_sup(u.values),
        max_residual=res,
        newton_iters=newton,
        outer_iters=outer,
        truncated_nodes=truncated,
        degenerate_mass=degenerate,
        saturated_fraction=float(np.mean(mag / np.sqrt(1 + mag * mag) > 1 - 1e-3)) if mag.size else 0.0,
    )


def _relative_change(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def detect_extremal(steps, cfg: SolverConfig | None = None, final: bool = False) -> str | None:
    """Classify a run from its step history.

    Returns ``extremal_blowup`` when sup|u_p| exceeds the blow-up threshold,
    when it grows at least like (p-1)**-1/2 over the last three steps, or when
    more than half of the faces carry a flux within 1e-3 of saturation while
    the residual stalls.  Returns ``converged_subcritical`` when sup|u_p| and
    the total variation plateau (relative step change at most
    ``cfg.plateau_tol``) or, at the end of the schedule, when their step
    changes contract geometrically.  Otherwise ``None`` (undecided) before the
    end of the schedule, and ``extremal_blowup`` at the end.

    ``steps`` is a sequence of :class:`StepRecord` (or dicts with the same
    keys); fewer than three steps are always undecided unless the threshold
    is exceeded.
    """
    cfg = SolverConfig() if cfg is None else cfg
    rec = [s if isinstance(s, dict) else s.as_dict() for s in steps]
    if not rec:
        return None
    sup = np.array([r["sup_norm"] for r in rec])
    if sup[-1] > cfg.blowup_sup_threshold or not np.isfinite(sup[-1]):
        return BLOWUP
    if len(rec) < 3:
        return None
    eps = np.array([r["p"] - 1 for r in rec])
    tv = np.array([r.get("tv", r["sup_norm"]) for r in rec])
    last_sup, last_eps = sup[-3:], eps[-3:]
    if np.all(last_sup > 0) and np.all(np.diff(last_sup) > 0):
        slopes = np.diff(np.log(last_sup)) / -np.diff(np.log(last_eps))
        if np.all(slopes >= 0.5):
            return BLOWUP
    sat = [r.get("saturated_fraction") for r in rec[-3:]]
    if all(s is not None and s > 0.5 for s in sat):
        res = [r["max_residual"] for r in rec[-3:]]
        if res[-1] >= 0.5 * res[0]:
            return BLOWUP
    ds = [_relative_change(sup[i], sup[i - 1]) for i in range(len(sup) - 2, len(sup))]
    dt = [_relative_change(tv[i], tv[i - 1]) for i in range(len(tv) - 2, len(tv))]
    if ds[-1] <= cfg.plateau_tol and dt[-1] <= cfg.plateau_tol:
        return CONVERGED
    if final:
        contracting = all(
            (a[1] <= 0.75 * a[0]) or a[1] <= cfg.plateau_tol for a in (ds, dt)
        )
        return CONVERGED if contracting else BLOWUP
    return None


def _extrapolate(history):
    """Polynomial extrapolation to p = 1 through the last three iterates."""
    (e0, u0), (e1, u1), (e2, u2) = history[-3:]
    # Lagrange basis at eps = 0
    l0 = e1 * e2 / ((e0 - e1) * (e0 - e2))
    l1 = e0 * e2 / ((e1 - e0) * (e1 - e2))
    l2 = e0 * e1 / ((e2 - e0) * (e2 - e1))
    return l0 * u0 + l1 * u1 + l2 * u2


def continuation_solve(f: ScalarField, h: NonlinearTerm | None = None, cfg: SolverConfig | None = None,
                       *, datum: ScalarField | None = None, initial: ScalarField | None = None) -> SolveReport:
    """Walk the p schedule, warm starting every step, and classify the run.

    ``datum`` gives the Dirichlet values on the boundary nodes (zero by
    default); its values at free nodes are used as the first Newton guess.
    ``initial`` seeds the frozen source of the outer fixed point at the first
    exponent (default: the first guess).
    """
    h = NonlinearTerm.one() if h is None else h
    cfg = SolverConfig() if cfg is None else cfg
    grid = f.grid
    fv = np.asarray(f.values)
    if not h.is_constant and (fv < 0).any():
        raise ValueError("a non-constant h needs f >= 0")
    u = datum if datum is not None else ScalarField(grid, 0.0)
    op = discretization(grid)
    bnd = ~op.free.reshape(grid.shape)
    if initial is not None:
        iv = np.array(initial.values, dtype=float)
        iv[bnd] = u.values[bnd]
        initial = ScalarField(grid, iv)
    if not np.any(fv) and not np.any(u.values[bnd]):
        zero = ScalarField(grid, 0.0)
        return SolveReport([], CONVERGED, zero, flux_of(zero), zero, message="zero datum: u = 0")
    steps: list[StepRecord] = []
    history = []
    classification = None
    message = ""
    frozen = initial if initial is not None else u
    for p in cfg.p_schedule:
        try:
            u, newton, outer, res = _outer_solve(f, h, p, u, frozen, cfg)
        except NewtonFailure as exc:
            message = f"p={p:.10g}: {exc}"
            last = np.max(np.abs(exc.field)) if exc.field is not None else 0.0
            if max(last, steps[-1].sup_norm if steps else 0.0) > cfg.blowup_sup_threshold:
                classification = BLOWUP
            else:
                trial = detect_extremal(steps, cfg) if len(steps) >= 3 else None
                classification = BLOWUP if trial == BLOWUP else FAILURE
            break
        frozen = u
        rec = _step_record(u, f, h, p, newton, outer, res)
        steps.append(rec)
        history.append((p - 1, np.array(u.values)))
        if len(history) > 3:
            history.pop(0)
        verdict = detect_extremal(steps, cfg)
        if verdict == BLOWUP:
            classification = BLOWUP
            message = f"blow-up signature at p={p:.10g}"
            break
    if classification is None:
        classification = detect_extremal(steps, cfg, final=True) or BLOWUP
        if classification == BLOWUP and not message:
            message = "no plateau of the a-priori monitors along the schedule"
    u_last = u if steps else None
    limit = u_last
    if classification == CONVERGED and cfg.extrapolate and len(history) == 3:
        vals = _extrapolate(history)
        vals[bnd] = u_last.values[bnd]
        # round-off negatives of a nonnegative limit are set to zero
        if (fv >= 0).all() and (u_last.values[bnd] >= 0).all():
            vals[(vals < 0) & (vals > -1e-10)] = 0.0
        limit = ScalarField(grid, vals)
    z = flux_of(limit) if limit is not None else None
    flux_sup = steps[-1].flux_sup if steps else 0.0
    return SolveReport(steps, classification, limit, z, u_last, message=message,
                       borderline=flux_sup > 1 - 1e-2)


def uniqueness_probe(f: ScalarField, h: NonlinearTerm, cfg: SolverConfig | None = None,
                     *, datum: ScalarField | None = None) -> float:
    """sup |u - v| for the limits started from u0 = 0 and from u0 = M.

    M is the uniform bound recorded by the first run.
    """
    if not (h.decreasing or h.is_constant):
        raise ValueError("uniqueness_probe needs a nonincreasing h")
    if (np.asarray(f.values) < 0).any():
        raise ValueError("uniqueness_probe needs f >= 0")
    first = continuation_solve(f, h, cfg, datum=datum)
    M = first.sup_bound
    second = continuation_solve(f, h, cfg, datum=datum, initial=ScalarField(f.grid, M))
    for rep in (first, second):
        if rep.classification != CONVERGED:
            raise NewtonFailure(f"probe run ended as {rep.classification}: {rep.message}")
    return float(np.max(np.abs(first.u.values - second.u.values)))


@dataclass
class StampacchiaResult:
    holds: bool
    precondition_met: bool
    pairs: list[tuple[float, float, float, float]]
    note: str = ""

    def __bool__(self):
        return self.holds


def stampacchia_decay_check(u_p: ScalarField, f: ScalarField, N: int | None = None,
                            pairs=None, slack: float = 0.05) -> StampacchiaResult:
    """Check |A_h| <= |A_k|^(1+1/N) S1 / ((h-k)(1 - S1 ||f||_N)) on level pairs.

    A_k = {u > k}.  Each entry of ``pairs`` in the result is
    (k, h, |A_h|, bound).  The default pairs are all (k, h) with k < h taken
    from eight equally spaced levels in (0, sup u).
    """
    N = u_p.grid.dimension if N is None else N
    S1 = sobolev_constant_s1(N)
    fn = lp_norm(f, N)
    q = 1.0 - S1 * fn
    if q <= 0:
        msg = f"precondition violated: S1 ||f||_N = {S1 * fn:.6g} >= 1"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return StampacchiaResult(False, False, [], msg)
    if pairs is None:
        top = float(np.max(u_p.values))
        if top <= 0:
            return StampacchiaResult(True, True, [], "u <= 0: every level set is empty")
        levels = top * np.arange(1, 9) / 9
        pairs = [(a, b) for i, a in enumerate(levels) for b in levels[i + 1:]]
    out = []
    ok = True
    for k, hh in pairs:
        if not hh > k >= 0:
            raise ValueError(f"level pair needs h > k >= 0, got {(k, hh)}")
        Ak = level_set_volume(ScalarField(u_p.grid, np.clip(u_p.values, 0, None)), k)
        Ah = level_set_volume(ScalarField(u_p.grid, np.clip(u_p.values, 0, None)), hh)
        bound = Ak ** (1 + 1 / N) * S1 / ((hh - k) * q)
        out.append((float(k), float(hh), Ah, bound))
        if Ah > (1 + slack) * bound:
            ok = False
    return StampacchiaResult(ok, True, out)
