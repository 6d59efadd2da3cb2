"""Constrained recovery programs solved by ADMM.

Solves::

    minimize f(Z)  subject to  ||A(Z) - b||_2 <= eta

with ``f`` the nuclear norm (``mode="nuclear"``) or the trace restricted to
the PSD cone (``mode="psd_trace"``). The splitting introduces ``W = Z`` and
``y = A(Z)``::

    Z-step  (I + A^*A) Z = (W - U) + A^*(y - u)     exact, via Woodbury
    W-step  W = prox_{f/rho}(Z + U)
    y-step  y = projection of A(Z) + u onto the ball B(b, eta)

Internally ``A``, ``b`` and ``eta`` are divided by ``sqrt(m)``. Because the
scaled-dual form makes the Z-step independent of ``rho``, one Cholesky
factorization of ``I + A A^*`` (an ``m x m`` matrix) serves every iteration.
The returned estimate is the W iterate, which is exactly PSD in
``psd_trace`` mode.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import ensembles, linalg
from .errors import DimensionError, DomainError

MODES = ("nuclear", "psd_trace")

#: Eigenvalue tolerance, relative to the spectral norm, for PSD outputs.
PSD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RecoveryProblem:
    ensemble: ensembles.MeasurementEnsemble
    b: np.ndarray
    eta: float = 0.0
    mode: str = "nuclear"

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).ravel()
        object.__setattr__(self, "b", b)
        if b.shape[0] != self.ensemble.count:
            raise DimensionError(f"b has length {b.shape[0]} but the ensemble has {self.ensemble.count} vectors")
        if not self.eta >= 0:
            raise DomainError(f"eta must be nonnegative, got {self.eta}")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")

    def objective(self, z):
        if self.mode == "nuclear":
            return linalg.nuclear_norm(z)
        return float(np.trace(z).real)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7
    penalty: float = 1.0
    adapt_penalty: bool = True
    adapt_every: int = 10
    adapt_factor: float = 2.0
    adapt_ratio: float = 10.0

    def __post_init__(self):
        if not (self.tol_primal > 0 and self.tol_dual > 0):
            raise DomainError("solver tolerances must be positive")
        if not self.penalty > 0:
            raise DomainError("penalty must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class SolverResult:
    X_hat: np.ndarray
    status: str
    iterations: int
    feasibility_gap: float
    objective: float
    residual_norm: float
    primal_residual: float = math.nan
    dual_residual: float = math.nan
    wall_time: float = 0.0
    history: dict = field(default_factory=dict, repr=False)

    @property
    def converged(self):
        return self.status == "converged"


def _residual_norm(problem, z):
    return float(np.linalg.norm(ensembles.apply(problem.ensemble, z) - problem.b))


def _project_ball(v, center, radius):
    d = v - center
    nrm = np.linalg.norm(d)
    if nrm <= radius:
        return v
    return center + d * (radius / nrm)


class _ScaledOperator:
    """``A / sqrt(m)`` with fast apply/adjoint on the stored vectors."""

    def __init__(self, ensemble):
        m = ensemble.count
        self.a = ensemble.vectors.astype(np.complex128)
        self.ac = self.a.conj()
        self.coef = ensemble.matrix_scale / math.sqrt(m)

    def apply(self, z):
        return self.coef * np.einsum("jk,jk->j", self.ac @ z, self.a).real

    def adjoint(self, y):
        out = (self.a.T * (self.coef * y)) @ self.ac
        return 0.5 * (out + out.conj().T)

    def gram(self):
        return self.coef**2 * np.abs(self.ac @ self.a.T) ** 2


def _injective(gram, n):
    """Whether the measurements determine every Hermitian ``n x n`` matrix."""
    lam = np.linalg.eigvalsh(gram)
    return int(np.count_nonzero(lam > 1e-10 * lam[-1])) >= n * n


def least_squares_residual(problem):
    """Smallest achievable ``||A(Z) - b||_2`` over Hermitian ``Z`` and its minimizer."""
    op = _ScaledOperator(problem.ensemble)
    m = problem.ensemble.count
    g = op.gram()
    bs = problem.b / math.sqrt(m)
    c, *_ = np.linalg.lstsq(g, bs, rcond=1e-12)
    z = op.adjoint(c)
    return float(np.linalg.norm(op.apply(z) - bs) * math.sqrt(m)), z


def solve(problem, config=None):
    """Solve the recovery program; see the module docstring for the iteration."""
    config = config or SolverConfig()
    started = time.perf_counter()
    ens = problem.ensemble
    n, m = ens.dim, ens.count
    op = _ScaledOperator(ens)
    root_m = math.sqrt(m)
    bs = problem.b / root_m
    eta_s = problem.eta / root_m
    b_norm = float(np.linalg.norm(bs))
    gap_tol = config.tol_primal * (1.0 + float(np.linalg.norm(problem.b)))

    ls_res, ls_z = least_squares_residual(problem)
    if ls_res / root_m > eta_s + config.tol_primal * (1.0 + b_norm):
        return SolverResult(
            X_hat=ls_z,
            status="infeasible",
            iterations=0,
            feasibility_gap=max(0.0, ls_res - problem.eta),
            objective=problem.objective(ls_z),
            residual_norm=ls_res,
            wall_time=time.perf_counter() - started,
        )

    gram = op.gram()
    if problem.eta == 0 and m >= n * n and _injective(gram, n):
        # the feasible set is the single point already found by least squares
        x = ls_z
        feasible = problem.mode == "nuclear" or linalg.eigvalsh(x)[-1] >= -PSD_TOL * max(1.0, linalg.spectral_norm(x))
        res = _residual_norm(problem, x)
        return SolverResult(
            X_hat=x if problem.mode == "nuclear" else linalg.project_psd(x),
            status="converged" if feasible else "infeasible",
            iterations=0,
            feasibility_gap=max(0.0, res - problem.eta),
            objective=problem.objective(x),
            residual_norm=res,
            wall_time=time.perf_counter() - started,
        )
    chol = cho_factor(np.eye(m) + gram, lower=True)
    prox = linalg.prox_nuclear if problem.mode == "nuclear" else linalg.prox_psd_trace

    rho = config.penalty
    z = np.zeros((n, n), dtype=np.complex128)
    w = z.copy()
    big_u = z.copy()
    y = _project_ball(np.zeros(m), bs, eta_s)
    u = np.zeros(m)
    status = "max_iters"
    r_norm = s_norm = math.inf
    it = 0
    for it in range(1, config.max_iters + 1):
        rhs = (w - big_u) + op.adjoint(y - u)
        a_rhs = op.apply(rhs)
        coeff = cho_solve(chol, a_rhs)
        z = rhs - op.adjoint(coeff)
        az = a_rhs - gram @ coeff

        w_old, y_old = w, y
        w = prox(z + big_u, 1.0 / rho)
        y = _project_ball(az + u, bs, eta_s)

        r_mat = z - w
        r_vec = az - y
        big_u = big_u + r_mat
        u = u + r_vec

        r_norm = math.sqrt(np.linalg.norm(r_mat) ** 2 + np.linalg.norm(r_vec) ** 2)
        s_norm = rho * float(np.linalg.norm((w - w_old) + op.adjoint(y - y_old)))
        pri_scale = max(np.linalg.norm(z), np.linalg.norm(w), np.linalg.norm(az), np.linalg.norm(y), b_norm)
        dual_scale = rho * float(np.linalg.norm(big_u + op.adjoint(u)))
        if r_norm <= config.tol_primal * (1.0 + pri_scale) and s_norm <= config.tol_dual * (1.0 + dual_scale):
            # the returned W must itself be feasible in the original scale
            gap = float(np.linalg.norm(op.apply(w) - bs)) * root_m - problem.eta
            if gap <= gap_tol:
                status = "converged"
                break

        if config.adapt_penalty and it % config.adapt_every == 0:
            if r_norm > config.adapt_ratio * s_norm:
                rho *= config.adapt_factor
                big_u /= config.adapt_factor
                u /= config.adapt_factor
            elif s_norm > config.adapt_ratio * r_norm:
                rho /= config.adapt_factor
                big_u *= config.adapt_factor
                u *= config.adapt_factor

    res = _residual_norm(problem, w)
    return SolverResult(
        X_hat=w,
        status=status,
        iterations=it,
        feasibility_gap=max(0.0, res - problem.eta),
        objective=problem.objective(w),
        residual_norm=res,
        primal_residual=r_norm,
        dual_residual=s_norm,
        wall_time=time.perf_counter() - started,
        history={"final_penalty": rho},
    )


@dataclass(frozen=True)
class SolutionReport:
    status: str
    feasibility_gap: float
    objective: float
    relative_error: float = math.nan
    frobenius_error: float = math.nan
    error_ratio: float = math.nan
    reference_objective: float = math.nan


def certify(result, problem, truth=None):
    """Summarize feasibility and, given the ground truth, recovery error.

    ``error_ratio`` is ``||X - X_hat||_2 / (eta / sqrt(m))`` and is only
    defined for ``eta > 0``. ``reference_objective`` is the objective of the
    ground truth, an upper bound on the optimum whenever the truth is
    feasible.
    """
    report = dict(status=result.status, feasibility_gap=result.feasibility_gap, objective=result.objective)
    if truth is not None:
        truth = np.asarray(truth)
        err = float(np.linalg.norm(truth - result.X_hat))
        scale = float(np.linalg.norm(truth))
        report["frobenius_error"] = err
        report["relative_error"] = err / scale if scale > 0 else err
        report["reference_objective"] = problem.objective(truth)
        if problem.eta > 0:
            report["error_ratio"] = err / (problem.eta / math.sqrt(problem.ensemble.count))
    return SolutionReport(**report)
