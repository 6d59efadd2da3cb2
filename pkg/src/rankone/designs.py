"""Weighted complex projective designs: construction, certification, I/O.

A weighted t-design ``{p_i, w_i}`` reproduces the Haar moment
``binom(n+t-1, t)^{-1} P_Sym^t`` with ``sum_i p_i (w_i w_i^*)^{(x)t}``.
Both operators are supported on ``Sym^t``, so everything here works in the
orthonormal ``Sym^t`` basis of :func:`rankone.tensors.sym_coordinates`,
where the Haar moment is ``I_D / D``. The explicit ``n^t``-dimensional
route is kept for small sizes and as a cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import nnls

from . import tensors
from .errors import DesignConstructionError, DomainError, FormatError, ResourceGuardError

WEIGHT_PRUNE = 1e-12


@dataclass(frozen=True, eq=False)
class WeightedDesign:
    """Unit vectors ``vectors[i]`` with probabilities ``weights[i]`` and declared order."""

    vectors: np.ndarray
    weights: np.ndarray
    order: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.complex128))
        weights = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "weights", weights)
        if vectors.shape[0] != weights.shape[0]:
            raise DomainError(f"{vectors.shape[0]} vectors but {weights.shape[0]} weights")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise DomainError("design vectors must be normalized")
        if np.any(weights < 0):
            raise DomainError("design weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError(f"design weights sum to {weights.sum():.15f}, expected 1")
        if self.order < 1:
            raise DomainError("design order must be >= 1")

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def size(self):
        return self.vectors.shape[0]


@dataclass(frozen=True)
class DesignCertificate:
    order_checked: int
    theta_inf: float
    theta_1: float
    tight_frame_gap: float


def _normalize_rows(w):
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def haar_vectors(n, count, rng):
    """Unit vectors distributed uniformly on the complex sphere."""
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return _normalize_rows(g)


def moment_deviation_sym(design, k):
    """``sum_i p_i v_i v_i^* - I_D / D`` in the ``Sym^k`` basis (``D x D``)."""
    v = tensors.sym_coordinates(design.vectors, k)
    d = v.shape[1]
    dev = (v.T * design.weights) @ v.conj()
    dev[np.diag_indices(d)] -= 1.0 / d
    return 0.5 * (dev + dev.conj().T)


def moment_deviation_tensor(design, k):
    """``sum_i p_i (w_i w_i^*)^{(x)k} - binom^{-1} P_Sym^k`` as an explicit ``n^k x n^k`` matrix."""
    n = design.dim
    proj = tensors.sym_projector(n, k).matrix
    vs = np.array([tensors.tensor_power_vector(w, k) for w in design.vectors])
    dev = (vs.T * design.weights) @ vs.conj()
    return dev - proj / tensors.sym_dim(n, k)


def _schatten_from_eigs(lam, p):
    lam = np.abs(lam)
    if p == 1:
        return float(lam.sum())
    if math.isinf(p):
        return float(lam.max(initial=0.0))
    raise DomainError(f"design accuracy is defined for p in {{1, inf}}, got {p}")


def design_moment_gap(design, k, p=math.inf, method="sym"):
    """Accuracy ``theta_p`` of ``design`` as an approximate ``k``-design.

    ``theta_p = binom(n+k-1, k) * || sum_i p_i (w_i w_i^*)^{(x)k} - binom^{-1} P_Sym^k ||_p``.

    Parameters
    ----------
    design : WeightedDesign
    k : int
        Moment order, ``1 <= k``.
    p : {1, inf}
    method : {"sym", "tensor"}
        ``"sym"`` works in the ``Sym^k`` basis (no size limit beyond memory);
        ``"tensor"`` builds the ``n^k``-dimensional operators explicitly.
    """
    if k < 1:
        raise DomainError(f"moment order must be >= 1, got {k}")
    if p not in (1, math.inf):
        raise DomainError(f"design accuracy is defined for p in {{1, inf}}, got {p}")
    n = design.dim
    if method == "sym":
        dev = moment_deviation_sym(design, k)
    elif method == "tensor":
        if n**k > tensors.MAX_TENSOR_DIM:
            raise ResourceGuardError(f"n^k = {n**k} exceeds the tensor guard; use method='sym'")
        dev = moment_deviation_tensor(design, k)
    else:
        raise ValueError(f"unknown method {method!r}")
    lam = np.linalg.eigvalsh(dev)
    return tensors.sym_dim(n, k) * _schatten_from_eigs(lam, p)


def tight_frame_gap(design):
    """``|| sum_i p_i w_i w_i^* - id/n ||_inf``."""
    w = design.vectors
    frame = (w.T * design.weights) @ w.conj()
    frame[np.diag_indices(design.dim)] -= 1.0 / design.dim
    return float(np.abs(np.linalg.eigvalsh(0.5 * (frame + frame.conj().T))).max())


def certify(design, k):
    """Accuracies ``theta_inf``, ``theta_1`` at order ``k`` and the tight-frame gap."""
    if not 1 <= k <= design.order:
        raise DomainError(f"order {k} outside 1..{design.order}")
    dev = moment_deviation_sym(design, k)
    lam = np.linalg.eigvalsh(dev)
    d = tensors.sym_dim(design.dim, k)
    return DesignCertificate(
        order_checked=k,
        theta_inf=d * _schatten_from_eigs(lam, math.inf),
        theta_1=d * _schatten_from_eigs(lam, 1),
        tight_frame_gap=tight_frame_gap(design),
    )


def _hermitian_real_rows(coords):
    """Real linear encoding of ``v v^*`` for each row ``v``, isometric in Frobenius norm.

    Returns a ``D^2 x N`` matrix: diagonal entries, then ``sqrt(2)`` times the
    real and imaginary parts of the strict upper triangle.
    """
    n_vec, d = coords.shape
    iu = np.triu_indices(d, 1)
    diag = np.abs(coords) ** 2
    off = coords[:, iu[0]] * coords[:, iu[1]].conj()
    root2 = math.sqrt(2.0)
    return np.hstack([diag, root2 * off.real, root2 * off.imag]).T


def construct_weighted_design(n, t, candidates, rng, tol=1e-8):
    """Fit nonnegative weights to Haar-random candidates so they form a ``t``-design.

    The target ``I_D / D`` and each candidate ``v_i v_i^*`` are encoded as
    real vectors of length ``D^2``; a row enforcing ``sum p = 1`` is appended
    and the system is solved by Lawson-Hanson nonnegative least squares.
    An active-set solution is basic, so at most ``D^2 + 1`` weights are
    positive. Weights below ``1e-12`` are pruned and the rest renormalized.

    Raises
    ------
    DesignConstructionError
        If the fitted design misses ``tol``; ``best_residual`` holds its
        ``theta_inf``.
    """
    d = tensors.sym_dim(n, t)
    if candidates < d * d + 1:
        raise DomainError(f"need at least D^2 + 1 = {d * d + 1} candidates, got {candidates}")
    w = haar_vectors(n, candidates, rng)
    coords = tensors.sym_coordinates(w, t)
    a = np.vstack([_hermitian_real_rows(coords), np.ones(candidates)])
    target = np.zeros(a.shape[0])
    target[:d] = 1.0 / d
    target[-1] = 1.0
    weights, _ = nnls(a, target, maxiter=50 * candidates)
    keep = weights > WEIGHT_PRUNE
    if not np.any(keep):
        raise DesignConstructionError("weight fit returned no positive weights", best_residual=math.inf)
    p = weights[keep] / weights[keep].sum()
    design = WeightedDesign(w[keep], p, t)
    theta = design_moment_gap(design, t, math.inf)
    if not theta <= tol:
        raise DesignConstructionError(
            f"fitted design has theta_inf = {theta:.3e} > tol = {tol:.1e}; try more candidates",
            best_residual=theta,
        )
    return WeightedDesign(design.vectors, design.weights, t, {"theta_inf": theta})


def supernormalize(design):
    """Design vectors scaled by ``((n+1) n)^(1/4)``."""
    n = design.dim
    return design.vectors * ((n + 1) * n) ** 0.25


def perturb_design(design, eps, rng):
    """Rotate each vector by angle ``eps`` toward an independent random orthogonal direction.

    Weights are unchanged; the accuracy of the result must be measured.
    """
    if not 0.0 <= eps <= 0.1:
        raise DomainError(f"perturbation size must lie in [0, 0.1], got {eps}")
    if eps == 0.0:
        return WeightedDesign(design.vectors.copy(), design.weights.copy(), design.order, dict(design.meta))
    w = design.vectors
    g = rng.standard_normal(w.shape) + 1j * rng.standard_normal(w.shape)
    g -= w * np.sum(w.conj() * g, axis=1, keepdims=True)
    u = _normalize_rows(g)
    rotated = _normalize_rows(math.cos(eps) * w + math.sin(eps) * u)
    return WeightedDesign(rotated, design.weights.copy(), design.order)


# Serialization --------------------------------------------------------------


def design_to_json(design, seed=None):
    meta = dict(design.meta)
    meta.setdefault("theta_inf", design_moment_gap(design, design.order, math.inf))
    meta["seed"] = seed if seed is not None else meta.get("seed")
    return {
        "n": design.dim,
        "t": design.order,
        "vectors": [{"re": v.real.tolist(), "im": v.imag.tolist()} for v in design.vectors],
        "weights": design.weights.tolist(),
        "meta": {"seed": meta["seed"], "theta_inf": float(meta["theta_inf"])},
    }


def _require(obj, key, kind, where="design"):
    if not isinstance(obj, dict) or key not in obj:
        raise FormatError(f"{where} is missing field {key!r}", field=key)
    value = obj[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise FormatError(f"field {key!r} must be an integer", field=key)
    if kind is list and not isinstance(value, list):
        raise FormatError(f"field {key!r} must be a list", field=key)
    return value


def design_from_json(obj):
    """Parse a design object; :class:`FormatError` names the offending field."""
    n = _require(obj, "n", int)
    t = _require(obj, "t", int)
    raw_vectors = _require(obj, "vectors", list)
    raw_weights = _require(obj, "weights", list)
    vectors = []
    for i, entry in enumerate(raw_vectors):
        where = f"vectors[{i}]"
        re = _require(entry, "re", list, where)
        im = _require(entry, "im", list, where)
        if len(re) != n or len(im) != n:
            raise FormatError(f"{where} must have {n} components", field=where)
        try:
            vectors.append(np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float))
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{where} is not numeric", field=where) from exc
    try:
        weights = np.asarray(raw_weights, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError("weights are not numeric", field="weights") from exc
    if weights.shape != (len(vectors),):
        raise FormatError("weights and vectors differ in length", field="weights")
    meta = obj.get("meta", {}) or {}
    if not isinstance(meta, dict):
        raise FormatError("field 'meta' must be an object", field="meta")
    try:
        return WeightedDesign(np.array(vectors).reshape(len(vectors), n), weights, t, dict(meta))
    except DomainError as exc:
        raise FormatError(str(exc), field="vectors" if "normalized" in str(exc) else "weights") from exc


def save_design(design, path, seed=None):
    Path(path).write_text(json.dumps(design_to_json(design, seed=seed)))


def load_design(path):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})", field=None) from exc
    return design_from_json(obj)
