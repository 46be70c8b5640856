"""Acceptance criteria, one test per criterion.

Each test prints a single ``CRITERION n: PASS|FAIL`` line with the measured
quantities before asserting, so ``pytest -s`` or the captured output shows
the whole table.  Solves shared between criteria are cached per module.
"""
import math
import time
import warnings

import numpy as np
import pytest

from mcflow.conditions import (
    check_admissibility,
    lorentz_constant_s1_tilde,
    lorentz_constant_sp_tilde,
    sobolev_constant_s1,
)
from mcflow.functional import marcinkiewicz_norm
from mcflow.grid import RadialGrid, ScalarField
from mcflow.nonlinearity import NonlinearTerm
from mcflow.oracle import RadialExactSolution
from mcflow.solver import BLOWUP, CONVERGED, SolverConfig, continuation_solve, stampacchia_decay_check, uniqueness_probe
from mcflow.verifier import verify

PLATEAU = 1e-3


def emit(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def power_run():
    grid = RadialGrid.annulus(3, 0.1, 1.0, 4097)
    sol = RadialExactSolution.power_singular(1.0, 3)
    f = ScalarField(grid, sol.f(grid.nodes))
    datum = ScalarField(grid, 9.0 * (1.0 - grid.nodes) / 0.9)
    rep, secs = timed(continuation_solve, f, cfg=SolverConfig.with_depth(16), datum=datum)
    return dict(grid=grid, sol=sol, f=f, datum=datum, rep=rep, secs=secs)


@pytest.fixture(scope="module")
def cap_run():
    grid = RadialGrid.ball(3, 1.0, 2049)
    f = ScalarField(grid, 1.5)
    rep, secs = timed(continuation_solve, f)
    return dict(grid=grid, f=f, rep=rep, secs=secs)


@pytest.fixture(scope="module")
def uniqueness_run():
    grid = RadialGrid.ball(3, 1.0, 2049)
    h = NonlinearTerm.from_function(lambda s: 1 / (1 + s), tail_from=0.0, h_infinity=0.0, decreasing=True)
    f = ScalarField(grid, 1.0)
    diff, secs = timed(uniqueness_probe, f, h)
    rep = continuation_solve(f, h)
    return dict(diff=diff, secs=secs, rep=rep)


@pytest.fixture(scope="module")
def singular_run():
    grid = RadialGrid.ball(3, 1.0, 2049)
    rep, secs = timed(continuation_solve, ScalarField(grid, 1.0), NonlinearTerm.power(0.5))
    return dict(rep=rep, secs=secs)


def test_criterion_1_power_family_reproduction(power_run, capsys):
    rep = power_run["rep"]
    err = float(np.max(np.abs(rep.u.values - power_run["sol"].u(power_run["grid"].nodes))))
    ok = rep.classification == CONVERGED and err <= 1e-3 and power_run["secs"] <= 30
    emit(capsys, 1, ok, f"sup error {err:.3e} (tol 1e-3), {rep.classification}, {power_run['secs']:.2f} s (limit 30 s)")
    assert ok


def test_criterion_2_marcinkiewicz_extremality(capsys):
    t0 = time.perf_counter()
    grid = RadialGrid.annulus(3, 1e-3, 1.0, 2**15)
    f = ScalarField(grid, RadialExactSolution.power_singular(1.0, 3).f(grid.nodes))
    norm = marcinkiewicz_norm(f)
    secs = time.perf_counter() - t0
    target = 2 * (4 * math.pi / 3) ** (1 / 3)
    inv = 1 / lorentz_constant_s1_tilde(3)
    ok = abs(norm - target) <= 2e-2 and abs(norm - inv) <= 2e-2 and secs <= 5
    emit(capsys, 2, ok, f"norm {norm:.5f}, (N-1) omega^(1/N) {target:.5f}, 1/S1~ {inv:.5f} (tol 2e-2), "
                        f"{secs:.3f} s (limit 5 s)")
    assert ok


def test_criterion_3_spherical_cap(cap_run, capsys):
    rep = cap_run["rep"]
    u0 = float(rep.u.values[0])
    exact = 2 - math.sqrt(3)
    flux = rep.steps[-1].flux_sup
    checks = {
        "u(0)": abs(u0 - exact) <= 5e-4,
        "flux_sup": abs(flux - 0.75) <= 1e-3,
        "classification": rep.classification == CONVERGED,
        "runtime": cap_run["secs"] <= 30,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    emit(capsys, 3, ok, f"u(0) {u0:.6f} vs {exact:.6f} (tol 5e-4), flux_sup {flux:.5f} vs 0.75 (tol 1e-3; "
                        f"lam R/N = 0.5), {rep.classification}, {cap_run['secs']:.2f} s"
                        + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert ok


def test_criterion_4_nonexistence_detection(cap_run, capsys):
    grid = RadialGrid.ball(3, 1.0, 2049)
    rep, secs = timed(continuation_solve, ScalarField(grid, 4.0), cfg=SolverConfig.with_depth(16))
    last = rep.steps[-1].sup_norm
    ref = cap_run["rep"].steps[-1].sup_norm
    ok = rep.classification == BLOWUP and last > 10 * ref and secs <= 60
    emit(capsys, 4, ok, f"{rep.classification} at p={rep.steps[-1].p:.6g}, last sup {last:.4g} vs 10 x {ref:.4g}, "
                        f"{secs:.2f} s (limit 60 s)")
    assert ok


def test_criterion_5_threshold_consistency(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    signs_ok = True
    for N in (2, 3, 4):
        # second route through the Gamma function, omega_N = pi^(N/2) / Gamma(1 + N/2)
        s1_gamma = math.gamma(1 + N / 2) ** (1 / N) / (N * math.sqrt(math.pi))
        worst = max(worst, abs(sobolev_constant_s1(N) - s1_gamma),
                    abs(lorentz_constant_s1_tilde(N) - lorentz_constant_sp_tilde(N, 1.0)))
        grid = RadialGrid.ball(N, 1.0, 257)
        for lam in (0.5 * N, N - 0.25, N + 0.25, 2.0 * N, -(N + 0.25)):
            rep = check_admissibility(ScalarField(grid, lam))
            signs_ok &= bool(np.sign(rep.margin_ln) == np.sign(N - abs(lam))) and bool(rep.serrin_consistent)
    secs = time.perf_counter() - t0
    ok = worst <= 1e-10 and signs_ok and secs <= 1
    emit(capsys, 5, ok, f"max formula gap {worst:.2e} (tol 1e-10), margin sign matches |lam| vs N: {signs_ok}, "
                        f"{secs:.3f} s (limit 1 s)")
    assert ok


def test_criterion_6_verifier_suite(power_run, cap_run, capsys):
    lines = []
    ok = True
    for name, run, datum in (("power family", power_run, power_run["datum"]), ("cap", cap_run, None)):
        rep = run["rep"]
        ver = verify(rep.u, rep.z, run["f"], tol=1e-2, datum=datum)
        good = (ver.flux_bound_excess == 0 and ver.pairing_residual <= 1e-10
                and ver.equation_residual <= 1e-3 and ver.boundary_ok)
        ok &= good
        lines.append(f"{name}: excess {ver.flux_bound_excess:.1e}, pairing {ver.pairing_residual:.1e}, "
                     f"equation {ver.equation_residual:.2e}, boundary {ver.boundary_ok}")
    emit(capsys, 6, ok, "; ".join(lines))
    assert ok


def test_criterion_7_uniqueness(uniqueness_run, capsys):
    diff, secs = uniqueness_run["diff"], uniqueness_run["secs"]
    ok = diff <= 1e-6 and secs <= 60
    emit(capsys, 7, ok, f"sup difference {diff:.2e} (tol 1e-6), {secs:.2f} s (limit 60 s)")
    assert ok


def test_criterion_8_singular_nonlinearity(singular_run, capsys):
    rep = singular_run["rep"]
    interior_min = float(rep.u.values[:-1].min())
    counts = rep.series("truncated_nodes")[-4:]
    monotone = bool(np.all(np.diff(counts) <= 0))
    ok = rep.classification == CONVERGED and interior_min > 0 and monotone
    emit(capsys, 8, ok, f"{rep.classification}, min interior u {interior_min:.4g}, "
                        f"truncated nodes over last 4 steps {counts.tolist()}")
    assert ok


def _plateau(series):
    s = np.asarray(series[-4:], dtype=float)
    return float(np.max(np.abs(np.diff(s)) / np.maximum(np.abs(s[1:]), 1e-300)))


def test_criterion_9_property_suites(power_run, cap_run, uniqueness_run, singular_run, capsys):
    runs = {"power family": power_run["rep"], "cap": cap_run["rep"],
            "decreasing h": uniqueness_run["rep"], "singular h": singular_run["rep"]}
    problems = []
    parts = []
    for name, rep in runs.items():
        # the p-term tends to zero with p - 1; its recorded bound C is the running maximum
        pterm = np.maximum.accumulate(rep.series("energy_p_term"))
        changes = {"sup": _plateau(rep.series("sup_norm")), "tv": _plateau(rep.series("tv")),
                   "p-term bound": _plateau(pterm)}
        parts.append(f"{name} " + "/".join(f"{v:.1e}" for v in changes.values()))
        problems += [f"{name} {k} {v:.1e}" for k, v in changes.items() if v > PLATEAU]
        if rep.u.values.min() < -1e-10:
            problems.append(f"{name} min u {rep.u.values.min():.2e}")
    for name, run in (("power family", power_run), ("cap", cap_run)):
        with warnings.catch_warnings():
            # a violated precondition is reported through res.note below
            warnings.simplefilter("ignore", RuntimeWarning)
            res = stampacchia_decay_check(run["rep"].u, run["f"])
        if not res.holds:
            problems.append(f"Stampacchia on {name}: {res.note or 'decay bound exceeded'}")
    ok = not problems
    emit(capsys, 9, ok, "relative changes sup/tv/p-term: " + "; ".join(parts)
                        + (f"; failed: {'; '.join(problems)}" if problems else ""))
    assert ok

