"""Monte Carlo checks of moment identities, small-ball and width bounds.

Quantities defined as an infimum or supremum over the set of low-rank
descent directions are estimated by sampling. Only inequalities that
sampling cannot fake are asserted: a sampled supremum below a bound, a
sampled probability above a lower bound (within three standard errors).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ensembles, linalg
from .designs import WeightedDesign, supernormalize, tight_frame_gap
from .errors import DomainError
from .tensors import sym_moment

#: Constant in the design bound E||H||_inf <= c * sqrt(n log 2n).
WIDTH_CONSTANT = 3.1049
#: Constant in the matrix Chernoff bound E||sum a_j a_j^*||_inf <= c * m.
CHERNOFF_CONSTANT = 3.4084
CHERNOFF_TAU = 1.27
#: Small-ball parameter used in the Gaussian recovery argument.
GAUSSIAN_XI = 1.0 / (2.0 * math.sqrt(2.0))

_CHUNK = 20000


@dataclass
class Report:
    """One checked quantity; serializes to the report JSON schema."""

    quantity: str
    estimate: float
    stderr: float
    bound: float | None
    bound_source: str
    passed: bool | None
    details: dict = field(default_factory=dict)

    def to_json(self):
        out = asdict(self)
        out["pass"] = out.pop("passed")
        for key in ("estimate", "stderr", "bound"):
            if out[key] is not None:
                out[key] = float(out[key])
        return out


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


# Samplers ---------------------------------------------------------------------


class GaussianSampler:
    """Standard Gaussian measurement vectors; ``scale = 1``."""

    def __init__(self, n, field="complex"):
        self.n = n
        self.field = field
        self.scale = 1.0

    def __call__(self, count, rng):
        return ensembles.sample_gaussian(self.n, count, rng, self.field).vectors


class DesignSampler:
    """Design vectors drawn by weight, super-normalized (``scale`` folds in ``sqrt(n(n+1))``)."""

    def __init__(self, design):
        self.design = design
        self.n = design.dim
        self.field = "complex"
        self.scale = ensembles.design_scale(design.dim)

    def __call__(self, count, rng):
        idx = rng.choice(self.design.size, size=count, p=self.design.weights)
        return self.design.vectors[idx]


def make_sampler(source, n=None, field="complex"):
    if isinstance(source, WeightedDesign):
        return DesignSampler(source)
    if source in ("gaussian", "complex_gaussian"):
        return GaussianSampler(n, "complex")
    if source == "real_gaussian":
        return GaussianSampler(n, "real")
    if callable(source):
        return source
    raise DomainError(f"unknown measurement source {source!r}")


def quadratic_samples(sampler, z, trials, rng):
    """Draws of ``S = tr(a a^* Z)`` with ``a`` from ``sampler`` (scale included)."""
    out = np.empty(trials)
    done = 0
    while done < trials:
        k = min(_CHUNK, trials - done)
        a = sampler(k, rng)
        out[done : done + k] = sampler.scale * np.einsum("jk,jk->j", a.conj() @ z, a).real
        done += k
    return out


# Moments ------------------------------------------------------------------------


def gaussian_moment_check(k, trials, rng):
    """Sample mean of ``|g|^(2k)`` for standard complex Gaussian ``g`` against ``k!``."""
    if not 1 <= k <= 4:
        raise DomainError(f"moment check supports 1 <= k <= 4, got {k}")
    g = (rng.standard_normal(trials) + 1j * rng.standard_normal(trials)) / math.sqrt(2.0)
    est, se = _mean_stderr(np.abs(g) ** (2 * k))
    ref = float(math.factorial(k))
    return Report(f"E|g|^{2 * k}", est, se, ref, "complex Gaussian moment k!", abs(est - ref) <= 3 * se)


def moment_references(source, z):
    """Closed-form ``(E S^2, E S^4)`` for Gaussian or exact-4-design measurements."""
    m2 = sym_moment(z, 2)
    m4 = sym_moment(z, 4)
    if isinstance(source, WeightedDesign):
        n = source.dim
        return m2, (n + 1) * n / ((n + 3) * (n + 2)) * m4
    return m2, m4


def moment_identity_check(source, z, trials, rng):
    """Monte Carlo second and fourth moments of ``S = tr(a a^* Z)`` vs closed forms.

    ``source`` is ``"gaussian"`` or a :class:`WeightedDesign` (treated as an
    exact 4-design, sampled super-normalized). ``Z`` must have unit
    Frobenius norm, so the second-moment reference is ``tr(Z)^2 + 1``.
    Gaussian sources additionally check ``E S^4 <= 24 (E S^2)^2``.
    """
    z = np.asarray(z, dtype=np.complex128)
    if abs(np.linalg.norm(z) - 1.0) > 1e-9:
        raise DomainError("moment identities are stated for unit-Frobenius Z")
    sampler = make_sampler(source, z.shape[0])
    s = quadratic_samples(sampler, z, trials, rng)
    ref2, ref4 = moment_references(source, z)
    tr = float(np.trace(z).real)
    est2, se2 = _mean_stderr(s**2)
    est4, se4 = _mean_stderr(s**4)
    label = "design" if isinstance(source, WeightedDesign) else "gaussian"
    reports = [
        Report("E S^2", est2, se2, ref2, f"{label}: tr(Z)^2 + tr(Z^2)", abs(est2 - ref2) <= 3 * se2,
               {"trace": tr, "closed_form_unit": tr * tr + 1.0}),
        Report("E S^4", est4, se4, ref4, f"{label}: cycle-index fourth moment", abs(est4 - ref4) <= 3 * se4),
    ]
    if label == "gaussian":
        ratio = est4 / est2**2
        # delta method for est4 / est2^2
        cov = np.cov(np.vstack([s**2, s**4]))
        grad = np.array([-2.0 * est4 / est2**3, 1.0 / est2**2])
        se_ratio = float(np.sqrt(grad @ cov @ grad / trials))
        reports.append(Report("E S^4 / (E S^2)^2", ratio, se_ratio, 24.0, "Gaussian fourth-moment bound",
                              ratio <= 24.0 + 3 * se_ratio))
    return reports


# Small-ball probabilities ---------------------------------------------------------


@dataclass(frozen=True)
class SmallBallEstimate:
    xi: float
    q_hat: float
    trials: int
    stderr: float

    def exceeds(self, bound, sigmas=3.0):
        return self.q_hat + sigmas * self.stderr >= bound


def empirical_Q(sampler, z, xi, trials, rng):
    """Fraction of draws with ``|tr(a a^* Z)| >= xi``."""
    if not xi > 0:
        raise DomainError(f"xi must be positive, got {xi}")
    s = quadratic_samples(sampler, np.asarray(z, dtype=np.complex128), trials, rng)
    q = float(np.mean(np.abs(s) >= xi))
    return SmallBallEstimate(float(xi), q, trials, math.sqrt(q * (1.0 - q) / trials))


def small_ball_bound(kind, xi):
    """Lower bound on ``Q_xi`` for ``kind`` in ``{"complex_gaussian", "real_gaussian", "design"}``.

    Gaussian bounds are known only at ``xi = 1/sqrt(2)`` (complex) and
    ``xi = 1`` (real); other values return ``None``.
    """
    if kind == "design":
        if not 0 <= xi <= 1:
            return None
        return (1.0 - xi * xi) ** 2 / 24.0
    if kind == "complex_gaussian" and math.isclose(xi, 1.0 / math.sqrt(2.0)):
        return 1.0 / 96.0
    if kind == "real_gaussian" and math.isclose(xi, 1.0):
        return 1.0 / 108.0
    return None


def small_ball_check(kind, sampler, zs, xi, trials, rng):
    """Run :func:`empirical_Q` on every ``Z`` in ``zs`` and compare with the bound."""
    bound = small_ball_bound(kind, xi)
    estimates = [empirical_Q(sampler, z, xi, trials, rng) for z in zs]
    worst = min(estimates, key=lambda e: e.q_hat + 3 * e.stderr)
    passed = None if bound is None else all(e.exceeds(bound) for e in estimates)
    return Report(f"Q_{xi:.4g} ({kind})", worst.q_hat, worst.stderr, bound, "small-ball lower bound", passed,
                  {"q_hat": [e.q_hat for e in estimates]})


# Rademacher width ------------------------------------------------------------------


def rademacher_H(e, rng, signs=None):
    """``H = m^{-1/2} sum_j eps_j A_j`` with Rademacher signs ``eps_j``."""
    if signs is None:
        signs = rng.choice([-1.0, 1.0], size=e.count)
    signs = np.asarray(signs, dtype=float)
    return ensembles.adjoint(e, signs) / math.sqrt(e.count)


def _draw_ensemble(source, n, m, rng):
    if isinstance(source, WeightedDesign):
        return ensembles.sample_from_design(source, m, rng)
    field = "real" if source == "real_gaussian" else "complex"
    return ensembles.sample_gaussian(n, m, rng, field)


def empirical_W_bound(n, r, m, source, trials, rng):
    """Mean spectral norm of ``H`` and the implied width bound ``2 sqrt(r) E||H||_inf``.

    Design sources are compared with ``3.1049 sqrt(n log 2n)`` when
    ``m >= 2 n log n``; otherwise, and for Gaussian sources, the value is
    reported without a pass/fail verdict.
    """
    if isinstance(source, WeightedDesign):
        n = source.dim
    norms = np.array([linalg.spectral_norm(rademacher_H(_draw_ensemble(source, n, m, rng), rng))
                      for _ in range(trials)])
    est, se = _mean_stderr(norms)
    details = {"width_bound": 2.0 * math.sqrt(r) * est, "per_sqrt_n": est / math.sqrt(n), "n": n, "m": m, "r": r}
    if isinstance(source, WeightedDesign):
        bound = WIDTH_CONSTANT * math.sqrt(n * math.log(2 * n))
        applicable = m >= 2 * n * math.log(n)
        details["precondition"] = applicable
        passed = (est <= bound + 3 * se) if applicable else None
        return Report("E||H||_inf (design)", est, se, bound, "c4 sqrt(n log 2n), m >= 2n log n", passed, details)
    return Report("E||H||_inf (gaussian)", est, se, None, "O(sqrt(n)) for m >= c n", None, details)


def chernoff_sum_check(design, m, trials, rng):
    """Matrix Chernoff checks for super-normalized design atoms.

    Returns reports for the mean of ``||sum_j a_j a_j^*||_inf`` against
    ``3.4084 m``, the atom norm ``max ||a_j||^2 = sqrt((n+1)n)``, and the
    mean sum against ``m sqrt((n+1)n)/n * id``.
    """
    n = design.dim
    applicable = m >= 2 * n * math.log(n) and tight_frame_gap(design) <= 1.0 / n
    atoms = supernormalize(design)
    sums = np.empty((trials, n, n), dtype=np.complex128)
    for i in range(trials):
        a = atoms[rng.choice(design.size, size=m, p=design.weights)]
        sums[i] = a.T @ a.conj()
    norms = np.array([linalg.spectral_norm(s) for s in sums])
    est, se = _mean_stderr(norms)
    bound = CHERNOFF_CONSTANT * m
    reports = [Report("E||sum a_j a_j^*||_inf", est, se, bound, "matrix Chernoff c5 m",
                      (est <= bound + 3 * se) if applicable else None, {"precondition": applicable})]

    r_est = float(np.max(np.sum(np.abs(atoms) ** 2, axis=1)))
    r_ref = math.sqrt((n + 1) * n)
    reports.append(Report("max ||a_j||^2", r_est, 0.0, r_ref, "super-normalized atom norm",
                          abs(r_est - r_ref) <= 1e-12 * r_ref))

    mean = sums.mean(axis=0)
    ref = m * r_ref / n * np.eye(n)
    dev = float(np.linalg.norm(mean - ref))
    spread = float(np.sqrt(np.sum(sums.real.var(axis=0, ddof=1) + sums.imag.var(axis=0, ddof=1)) / trials))
    reports.append(Report("||E sum a_j a_j^* - m sqrt((n+1)n)/n id||_F", dev, spread, 0.0,
                          "tight frame expectation", dev <= 3 * spread + 1e-12 * m * r_ref))
    return reports


# Descent cone ----------------------------------------------------------------------

DYADIC_STEPS = tuple(2.0**-k for k in range(1, 11))
CONE_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class DescentSample:
    """Unit-Frobenius directions ``Y`` with steps ``tau`` witnessing ``||X + tau Y||_1 <= ||X||_1``."""

    X: np.ndarray
    rank: int
    directions: list
    taus: list


def descent_step(x, y, steps=DYADIC_STEPS, slack=CONE_SLACK):
    """Largest dyadic ``tau`` with ``||X + tau Y||_1 <= ||X||_1 + slack``, or ``None``."""
    base = linalg.nuclear_norm(x)
    for tau in steps:
        if linalg.nuclear_norm(x + tau * y) <= base + slack:
            return tau
    return None


def _random_block(rows, cols, rng):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2.0)


def _candidate_direction(u, signs, r, rng):
    """Random direction whose first-order change of the nuclear norm is <= 0.

    In the eigenbasis of ``X`` the direction has blocks ``Y11`` (support),
    ``Y12`` (cross) and ``Y22`` (complement). The first-order change is
    ``tr(S1 Y11) + ||Y22||_1`` with ``S1 = diag(signs)``; ``Y11`` is shifted
    along ``-S1`` to make it ``-margin``.
    """
    n = u.shape[0]
    k = n - r
    y11 = linalg.random_hermitian(r, rng) * rng.uniform(0.0, 1.0)
    y22 = np.zeros((k, k), dtype=np.complex128)
    y12 = np.zeros((r, k), dtype=np.complex128)
    if k:
        style = rng.integers(3)
        if style == 0:  # flat complement spectrum, the extremal case for ||Y||_1 / ||Y||_2
            q, _ = np.linalg.qr(_random_block(k, k, rng))
            eig = np.full(k, 1.0) * rng.choice([-1.0, 1.0], size=k)
            y22 = (q * eig) @ q.conj().T
        elif style == 1:
            y22 = linalg.random_hermitian(k, rng)
        y22 = y22 * rng.uniform(0.0, 1.0)
        y12 = _random_block(r, k, rng) * rng.choice([0.0, 1e-3, 1e-1, 1.0])
    margin = rng.choice([0.0, 1e-6, 1e-2, 1.0]) * rng.uniform(0.0, 1.0)
    first_order = float(np.sum(signs * np.diag(y11).real)) + float(np.abs(np.linalg.eigvalsh(y22)).sum() if k else 0.0)
    y11 = y11 - ((first_order + margin) / r) * np.diag(signs)
    y = np.zeros((n, n), dtype=np.complex128)
    y[:r, :r] = y11
    y[:r, r:] = y12
    y[r:, :r] = y12.conj().T
    y[r:, r:] = y22
    y = u @ y @ u.conj().T
    y = 0.5 * (y + y.conj().T)
    nrm = np.linalg.norm(y)
    return y / nrm if nrm > 1e-12 else None


def sample_descent_directions(x, count, rng, max_attempts=None):
    """Sample ``count`` verified members of the nuclear-norm descent cone at ``X``.

    The first direction is always ``-X / ||X||_2`` (witness ``tau = ||X||_2``).
    Further candidates mix support-decreasing and off-support components and
    are kept only if a dyadic line search over ``tau in {2^-1, ..., 2^-10}``
    confirms ``||X + tau Y||_1 <= ||X||_1 + 1e-9``.
    """
    if isinstance(x, linalg.LowRankSignal):
        x = x.matrix
    x = np.asarray(x, dtype=np.complex128)
    dec = linalg.eigh(x)
    top = np.abs(dec.eigenvalues).max()
    support = np.abs(dec.eigenvalues) > linalg.RANK_RTOL * top
    r = int(support.sum())
    if r == 0:
        raise DomainError("descent directions need a nonzero signal")
    order = np.concatenate([np.flatnonzero(support), np.flatnonzero(~support)])
    u = dec.eigenvectors[:, order]
    signs = np.sign(dec.eigenvalues[order[:r]])

    xnorm = float(np.linalg.norm(x))
    directions = [-x / xnorm]
    taus = [xnorm]
    attempts = 0
    max_attempts = max_attempts or 50 * count
    while len(directions) < count:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(f"only {len(directions)} of {count} descent directions verified")
        y = _candidate_direction(u, signs, r, rng)
        if y is None:
            continue
        tau = descent_step(x, y)
        if tau is not None:
            directions.append(y)
            taus.append(tau)
    return DescentSample(x, r, directions[:count], taus[:count])


def descent_norm_ratios(sample):
    """``||Y||_1 / ||Y||_2`` for each sampled direction."""
    return np.array([linalg.nuclear_norm(y) / np.linalg.norm(y) for y in sample.directions])


def descent_bound_check(samples):
    """Worst ``||Y||_1/||Y||_2 - 2 sqrt(r)`` over descent samples; passes when nothing exceeds ``1e-9``."""
    worst = -math.inf
    violations = 0
    ratio_max = 0.0
    for s in samples:
        ratios = descent_norm_ratios(s)
        excess = ratios - 2.0 * math.sqrt(s.rank)
        violations += int(np.sum(excess > 1e-9))
        worst = max(worst, float(excess.max()))
        ratio_max = max(ratio_max, float((ratios / math.sqrt(s.rank)).max()))
    return Report("max ||Y||_1/||Y||_2 - 2 sqrt(r)", worst, 0.0, 1e-9, "descent cone nuclear-norm bound",
                  violations == 0, {"violations": violations, "max_ratio_over_sqrt_r": ratio_max,
                                    "directions": int(sum(len(s.directions) for s in samples))})


def empirical_min_conic_singular(e, sample):
    """``min_Y ||A(Y)||_2`` over the sampled directions (an upper estimate of the conic minimum)."""
    if not sample.directions:
        raise DomainError("empty descent sample")
    return float(min(np.linalg.norm(ensembles.apply(e, y)) for y in sample.directions))


def kmt_lower_bound(m, q_2xi, width, xi=GAUSSIAN_XI, t=0.0):
    """``xi sqrt(m) Q_{2 xi} - 2 W_m - xi t`` (reported, never asserted)."""
    return xi * math.sqrt(m) * q_2xi - 2.0 * width - xi * t


def error_bound_check(problem, result, truth):
    """Certified form of the conic error bound.

    Both ``X`` and ``X_hat`` lie within ``eta`` of ``b`` (the latter up to the
    solver's feasibility gap), so ``||A(X_hat - X)||_2 <= 2 eta + gap``.
    Written with ``Y = (X_hat - X)/||X_hat - X||_2`` this is
    ``||X - X_hat||_2 ||A(Y)||_2 <= 2 eta (1 + 1e-6) + gap``.
    """
    diff = result.X_hat - np.asarray(truth)
    err = float(np.linalg.norm(diff))
    lhs = float(np.linalg.norm(ensembles.apply(problem.ensemble, diff))) if err > 0 else 0.0
    bound = 2.0 * problem.eta * (1.0 + 1e-6) + result.feasibility_gap + 1e-12
    return Report("||X - X_hat||_2 ||A(Y)||_2", lhs, 0.0, bound, "feasibility of X and X_hat", lhs <= bound,
                  {"error": err})
