"""The ``r1 verify`` suite: every registered invariant check in one JSON report."""

from __future__ import annotations

import math

import numpy as np

from . import analysis, designs, ensembles, linalg, solver, tensors
from .analysis import Report

SCHEMA_VERSION = 1


def _rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def check_sym_moment(rng, cases):
    """``sym_moment`` against the explicit tensor trace for ``n in {2, 3}``, ``m <= 4``."""
    worst = 0.0
    for n in (2, 3):
        for m in range(1, 5):
            proj = tensors.sym_projector(n, m).matrix
            for _ in range(cases):
                z = linalg.random_hermitian(n, rng)
                brute = math.factorial(m) * np.trace(proj @ tensors.tensor_power_matrix(z, m).matrix).real
                fast = tensors.sym_moment(z, m)
                worst = max(worst, abs(fast - brute) / max(1.0, abs(brute)))
    return Report("sym_moment vs tensor trace (n in {2,3}, m <= 4)", worst, 0.0, 1e-10,
                  "brute-force symmetrizer", worst <= 1e-10)


def check_eigensolvers(rng, cases):
    worst = 0.0
    for n in (2, 5, 8):
        for _ in range(cases):
            z = linalg.random_hermitian(n, rng)
            lam_j = linalg.eigh(z, method="jacobi").eigenvalues
            lam_l = linalg.eigh(z).eigenvalues
            worst = max(worst, float(np.max(np.abs(lam_j - lam_l))) / max(1.0, float(np.abs(lam_l).max())))
    return Report("Jacobi vs LAPACK eigenvalues", worst, 0.0, 1e-10, "independent eigensolvers", worst <= 1e-10)


def check_solver_witness(rng, trials):
    """Minimality and feasibility on noiseless Gaussian instances in the recovery regime."""
    worst_obj = worst_gap = -math.inf
    worst_err = 0.0
    ok = True
    for _ in range(trials):
        x = linalg.random_low_rank(6, 1, False, rng).matrix
        ens = ensembles.sample_gaussian(6, 36, rng)
        b = ensembles.apply(ens, x)
        problem = solver.RecoveryProblem(ens, b)
        res = solver.solve(problem)
        excess = res.objective - linalg.nuclear_norm(x)
        gap = res.feasibility_gap / (1 + np.linalg.norm(b))
        worst_obj, worst_gap = max(worst_obj, excess), max(worst_gap, gap)
        worst_err = max(worst_err, float(np.linalg.norm(res.X_hat - x)))
        ok &= res.converged and excess <= 1e-6 and gap <= 1e-7
    return Report("objective(X_hat) - ||X||_1 (noiseless)", worst_obj, 0.0, 1e-6, "X is feasible for its own data",
                  bool(ok), {"max_gap_over_1_plus_b": worst_gap, "max_error": worst_err})


def check_error_bound(rng, trials):
    reports = []
    for _ in range(trials):
        x = linalg.random_low_rank(8, 1, False, rng).matrix
        ens = ensembles.sample_gaussian(8, 64, rng)
        noisy = ensembles.add_noise(ensembles.apply(ens, x), 0.05, rng)
        problem = solver.RecoveryProblem(ens, noisy.b, noisy.eta)
        reports.append(analysis.error_bound_check(problem, solver.solve(problem), x))
    worst = max(reports, key=lambda r: r.estimate - r.bound)
    return Report(worst.quantity, worst.estimate, 0.0, worst.bound, worst.bound_source,
                  all(r.passed for r in reports), {"instances": trials})


def run_verify_suite(seed=0, quick=False):
    """Run every check; returns the JSON-ready report with an aggregate ``pass``."""
    scalar = 20_000 if quick else 100_000
    matrix = 100 if quick else 200
    zs_count = 5 if quick else 20
    directions = 30 if quick else 100
    signals = 15 if quick else 100

    checks = []
    checks.append(check_sym_moment(_rng(seed, 0), 3 if quick else 10))
    checks.append(check_eigensolvers(_rng(seed, 1), 3 if quick else 10))

    rng = _rng(seed, 2)
    checks.extend(analysis.gaussian_moment_check(k, scalar, rng) for k in range(1, 5))

    rng = _rng(seed, 3)
    design_sizes = (2,) if quick else (2, 3)
    built = {n: designs.construct_weighted_design(n, 4, {2: 2000, 3: 10000}[n], rng) for n in design_sizes}
    for n, d in built.items():
        cert = designs.certify(d, 4)
        checks.append(Report(f"theta_inf of constructed 4-design (n={n})", cert.theta_inf, 0.0, 1e-8,
                             "construction tolerance", cert.theta_inf <= 1e-8,
                             {"vectors": d.size, "tight_frame_gap": cert.tight_frame_gap}))

    rng = _rng(seed, 4)
    for source, n in [(built[2], 2), ("gaussian", 3)]:
        z = linalg.random_unit_hermitian(n, rng)
        checks.extend(analysis.moment_identity_check(source, z, scalar, rng))

    rng = _rng(seed, 5)
    zs4 = [linalg.random_unit_hermitian(4, rng) for _ in range(zs_count)]
    zs2 = [linalg.random_unit_hermitian(2, rng) for _ in range(zs_count)]
    checks.append(analysis.small_ball_check("complex_gaussian", analysis.GaussianSampler(4), zs4,
                                            1 / math.sqrt(2), scalar, rng))
    checks.append(analysis.small_ball_check("real_gaussian", analysis.GaussianSampler(4, "real"),
                                            [z.real / np.linalg.norm(z.real) for z in zs4], 1.0, scalar, rng))
    checks.append(analysis.small_ball_check("design", analysis.DesignSampler(built[2]), zs2, 0.5, scalar, rng))

    rng = _rng(seed, 6)
    samples = [analysis.sample_descent_directions(linalg.random_low_rank(10, 1 + i % 3, False, rng), directions, rng)
               for i in range(signals)]
    checks.append(analysis.descent_bound_check(samples))

    rng = _rng(seed, 7)
    for n, d in built.items():
        m = math.ceil(2 * n * math.log(n))
        checks.extend(analysis.chernoff_sum_check(d, m, matrix, rng))
        checks.append(analysis.empirical_W_bound(n, 1, m, d, matrix, rng))

    checks.append(check_solver_witness(_rng(seed, 8), 3 if quick else 10))
    checks.append(check_error_bound(_rng(seed, 9), 3 if quick else 10))

    entries = [c.to_json() for c in checks]
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "quick": quick,
        "checks": entries,
        "pass": all(e["pass"] is not False for e in entries),
    }
