"""Acceptance suite: fifteen criteria at their stated tolerances.

Each test records one PASS/FAIL line in RESULTS; the lines are printed at the
end of the pytest run (see conftest.py) or directly when this file is run as
a script.
"""

import itertools
import subprocess
import sys
import time

import numpy as np
import pytest

from qkzlab import oracles
from qkzlab.contour import QuadratureGrid, integrate, plan_contour
from qkzlab.params import TruncationPolicy, derive
from qkzlab.qspecial import theta
from qkzlab.representation import permutation_matrix
from qkzlab.rmatrix import closed_form_R, solve_R, ybe_residual
from qkzlab.solution import TVIntegrand, build_W, qkz_check
from qkzlab.weight import WeightIndex

RESULTS: dict[int, str] = {}
SEED = 0
FLAG = dict(q=0.6, k=1, L=0.3, spins=(1, 1), N=1)
FLAG_Z = (1.0, 0.7)


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


def rand_c(rng, lo=0.3, hi=3.0):
    return complex(rng.uniform(lo, hi) * np.exp(1j * rng.uniform(-np.pi, np.pi)))


@pytest.fixture(scope="module")
def suite():
    """All oracle reports of the default suite, grouped by identity."""
    jobs = oracles.suite_jobs(np.random.default_rng(SEED))
    out = {}
    for job in jobs:
        for rep in oracles.run_job(job):
            out.setdefault(rep.identity_id, []).append(rep)
    return out


def worst(reports):
    return max(r.residual for r in reports)


def all_pass(reports):
    return bool(reports) and all(r.passed for r in reports)


def test_01_theta_functional_equation():
    rng = np.random.default_rng(SEED)
    p = derive(**FLAG).p
    trunc = TruncationPolicy(tail_tol=1e-18)
    t0 = time.perf_counter()
    res = 0.0
    for _ in range(100):
        z = rand_c(rng)
        th = theta(z, p, trunc)
        res = max(res, abs(theta(p * z, p, trunc) + th / z) / abs(th))
    dt = time.perf_counter() - t0
    record(1, res < 1e-12 and dt < 1, f"max rel residual {res:.2e} (< 1e-12), {dt:.3f} s (< 1 s)")


def _normalisation_error(l1, l2, R):
    e0 = np.zeros(R.shape[0])
    e0[0] = 1
    return float(np.abs(permutation_matrix(l1, l2) @ R @ e0 - e0).max())


NORMALISATION: list[float] = []


def test_02_r_matrix_dual_path():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    err = 0.0
    for l1, l2 in [(1, 1), (1, 2), (2, 1), (1, 3)]:
        for _ in range(20):
            z = rand_c(rng)
            R = solve_R(l1, l2, z, 0.6).matrix
            err = max(err, float(np.abs(R - closed_form_R(l1, l2, z, 0.6).matrix).max()))
            NORMALISATION.append(_normalisation_error(l1, l2, R))
    dt = time.perf_counter() - t0
    record(2, err < 1e-11 and dt < 5, f"max entry error {err:.2e} (< 1e-11), {dt:.2f} s (< 5 s)")


def test_03_normalisation():
    rng = np.random.default_rng(SEED + 1)
    errs = list(NORMALISATION)
    for l1, l2 in itertools.product(range(4), repeat=2):
        for _ in range(5):
            errs.append(_normalisation_error(l1, l2, solve_R(l1, l2, rand_c(rng), 0.6).matrix))
    res = max(errs)
    record(3, res < 1e-12, f"max |P R(v0 v0) - v0 v0| {res:.2e} over {len(errs)} R-matrices (< 1e-12)")


def test_04_yang_baxter():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    res = 0.0
    for spins in itertools.product(range(3), repeat=3):
        for _ in range(10):
            res = max(res, ybe_residual(*spins, rand_c(rng), rand_c(rng), 0.6))
    dt = time.perf_counter() - t0
    record(4, res < 1e-10 and dt < 30, f"max residual {res:.2e} over 27 triples (< 1e-10), {dt:.1f} s (< 30 s)")


def test_05_combinatorial_lemma(suite):
    reps = suite["lemma_combi_i"] + suite["lemma_combi_ii"]
    ok = all_pass(reps) and all(r.tol <= 1e-10 for r in reps)
    record(5, ok, f"{len(reps)} checks, n <= 6, 30 q, max residual {worst(reps):.2e} (< 1e-10)")


def test_06_symmetrisation_lemma(suite):
    reps = suite["lemma_sym"]
    record(6, all_pass(reps), f"{len(reps)} checks, n <= 5, all subsets, max residual {worst(reps):.2e} (< 1e-9)")


def test_07_z_lemma(suite):
    main, free = suite["lemma_z"], suite["lemma_z_zfree"]
    ok = all_pass(main) and all_pass(free)
    record(7, ok, f"{len(main)} checks, max residual {worst(main):.2e} (< 1e-9); "
                  f"z-independence {worst(free):.2e} (< 1e-10)")


def test_08_eps_sum(suite):
    reps = suite["eps_sum"]
    ok = all_pass(reps) and {len(r.sample["b"]) < r.sample["N"] for r in reps} == {True, False}
    record(8, ok, f"{len(reps)} checks, N <= 4, both branches, max residual {worst(reps):.2e} (< 1e-8)")


def test_09_lemma_i_direct(suite):
    reps = suite["lemma_i"]
    r1 = [r for r in reps if r.sample["spins"] == [2] and r.sample["nu"] == [1]]
    ok = all_pass(reps) and bool(r1)
    record(9, ok, f"{len(reps)} checks ({len(r1)} with r = 1, n_1 = 1), max rel error {worst(reps):.2e} (< 1e-8)")


def test_10_main_proposition(suite):
    van, ratio, const = suite["mainprop_vanish"], suite["mainprop_ratio"], suite["mainprop_const"]
    ok = all_pass(van) and all_pass(ratio) and all_pass(const)
    record(10, ok, f"vanishing {worst(van):.2e} (< 1e-8), ratio constancy {worst(ratio):.2e} (< 1e-9), "
                   f"constant vs printed {worst(const):.2e} (< 1e-8), N <= 3")


def test_11_elliptic_membership():
    rng = np.random.default_rng(SEED)
    res = 0.0
    for spins, N in [((1, 1), 1), ((1, 2), 2), ((2, 1, 1), 3)]:
        prm = derive(0.6, 1, 0.3, spins, N)
        W = build_W(prm)
        t = [rand_c(rng, 0.2, 0.8) for _ in range(N)]
        z = [rng.uniform(0.5, 1.5) for _ in spins]
        for a in range(1, N + 1):
            res = max(res, abs(W.measured_t_ratio(a, t, z) / W.t_ratios[a - 1] - 1))
        for j in range(1, len(spins) + 1):
            res = max(res, abs(W.measured_z_ratio(j, t, z) / W.z_ratios[j - 1] - 1))
    record(11, res < 1e-10, f"max rel deviation of shift ratios {res:.2e} (< 1e-10)")


def test_12_radius_independence():
    prm = derive(**FLAG)
    f = TVIntegrand(prm, FLAG_Z, WeightIndex((1, 0), prm.spins), build_W(prm))
    a = integrate(f, plan_contour(prm, FLAG_Z, 1, "manual:0.05"), QuadratureGrid(512))
    b = integrate(f, plan_contour(prm, FLAG_Z, 1, "manual:0.3"), QuadratureGrid(512))
    res = abs(a - b) / abs(a)
    record(12, res < 1e-9, f"radii 0.05 and 0.3: rel difference {res:.2e} (< 1e-9)")


def test_13_no_integration():
    res = 0.0
    for l in (1, 2, 3):
        prm = derive(0.6, 1, 0.3, (l,), 0)
        res = max(res, qkz_check(1, prm, (0.9,), build_W(prm)).residual)
    record(13, res < 1e-12, f"n = 1, N = 0: max residual {res:.2e} (< 1e-12)")


def test_14_flagship_qkz():
    prm = derive(**FLAG)
    W = build_W(prm)
    t0 = time.perf_counter()
    res = [qkz_check(j, prm, FLAG_Z, W, QuadratureGrid(512)).residual for j in (1, 2)]
    dt = time.perf_counter() - t0
    printed = [qkz_check(j, prm, FLAG_Z, W, QuadratureGrid(512), convention="printed").residual
               for j in (1, 2)]
    ok = max(res) < 1e-6 and dt < 60
    record(14, ok, f"residual j=1 {res[0]:.2e}, j=2 {res[1]:.2e} (< 1e-6), {dt:.2f} s (< 60 s); "
                   f"info: operator as displayed gives {printed[0]:.2f}, {printed[1]:.2f}")


SUBCOMMANDS = ["check-r", "check-ybe", "verify-lemmas", "eval-weight", "eval-theorem-f", "check-fell",
               "check-qkz", "convergence"]


def _full_run() -> bytes:
    out = b""
    for cmd in SUBCOMMANDS:
        proc = subprocess.run([sys.executable, "-m", "qkzlab", cmd, "--no-timing", "--seed", str(SEED)],
                              capture_output=True, check=False)
        assert proc.returncode == 0, proc.stderr.decode()
        out += proc.stdout
    return out


def test_15_determinism():
    first, second = _full_run(), _full_run()
    ok = first == second and len(first) > 0
    record(15, ok, f"two serial runs of all {len(SUBCOMMANDS)} subcommands: "
                   f"{len(first)} bytes, {'identical' if ok else 'different'}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
