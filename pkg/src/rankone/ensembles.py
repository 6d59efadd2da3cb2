"""Rank-one measurement ensembles and the measurement map.

An ensemble stores the measurement vectors ``a_j`` and one scalar
``matrix_scale``; the j-th measurement matrix is
``A_j = matrix_scale * a_j a_j^*`` and ``A(Z)_j = tr(Z A_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, FormatError

FIELDS = ("complex", "real")


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    vectors: np.ndarray
    matrix_scale: float = 1.0
    field: str = "complex"

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors))
        v = v.astype(np.float64 if self.field == "real" else np.complex128)
        object.__setattr__(self, "vectors", v)
        if self.field not in FIELDS:
            raise DomainError(f"field must be one of {FIELDS}, got {self.field!r}")
        if not self.matrix_scale > 0:
            raise DomainError("matrix_scale must be positive")

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def count(self):
        return self.vectors.shape[0]

    def measurement_matrix(self, j):
        a = self.vectors[j]
        return self.matrix_scale * np.outer(a, a.conj())

    def gram(self):
        """``G_jk = tr(A_j A_k) = scale^2 |<a_j, a_k>|^2``."""
        inner = self.vectors.conj() @ self.vectors.T
        return self.matrix_scale**2 * np.abs(inner) ** 2

    def scaled(self, factor):
        """Ensemble with every ``a_j`` multiplied by ``factor``."""
        return MeasurementEnsemble(self.vectors * factor, self.matrix_scale, self.field)


@dataclass(frozen=True, eq=False)
class NoisyMeasurement:
    b: np.ndarray
    eta: float
    true_noise_norm: float


def sample_gaussian(n, m, rng, field="complex"):
    """``m`` independent standard Gaussian vectors in ``C^n`` (or ``R^n``).

    Complex entries have independent real and imaginary parts of variance
    1/2, so ``E|a_jk|^2 = 1``.
    """
    if n < 1 or m < 1:
        raise DomainError(f"need n, m >= 1, got n={n}, m={m}")
    if field == "complex":
        a = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / math.sqrt(2.0)
    elif field == "real":
        a = rng.standard_normal((m, n))
    else:
        raise DomainError(f"field must be one of {FIELDS}, got {field!r}")
    return MeasurementEnsemble(a, 1.0, field)


def design_scale(n):
    return math.sqrt(n * (n + 1))


def sample_from_design(design, m, rng):
    """Draw ``m`` vectors i.i.d. from ``{p_i, w_i}``; ``matrix_scale = sqrt(n(n+1))``."""
    if m < 1:
        raise DomainError(f"need m >= 1, got {m}")
    idx = rng.choice(design.size, size=m, p=design.weights)
    return MeasurementEnsemble(design.vectors[idx], design_scale(design.dim), "complex")


def _check_matrix(e, z):
    z = np.asarray(z)
    if z.shape != (e.dim, e.dim):
        raise DimensionError(f"matrix shape {z.shape} does not match ensemble dimension {e.dim}")
    return z


def apply(e, z):
    """``A(Z)_j = matrix_scale * <a_j, Z a_j>`` (real for Hermitian ``Z``)."""
    z = _check_matrix(e, z)
    a = e.vectors
    return e.matrix_scale * np.einsum("jk,kl,jl->j", a.conj(), z, a, optimize=True).real


def adjoint(e, y):
    """``A^*(y) = matrix_scale * sum_j y_j a_j a_j^*``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (e.count,):
        raise DimensionError(f"expected a vector of length {e.count}, got shape {y.shape}")
    a = e.vectors
    out = (a.T * (e.matrix_scale * y)) @ a.conj()
    return 0.5 * (out + out.conj().T)


def add_noise(b, eta, rng):
    """Add a Gaussian direction rescaled to Euclidean norm exactly ``eta``."""
    b = np.asarray(b, dtype=float)
    if eta < 0:
        raise DomainError(f"eta must be nonnegative, got {eta}")
    if eta == 0:
        return NoisyMeasurement(b.copy(), 0.0, 0.0)
    g = rng.standard_normal(b.shape)
    eps = eta * g / np.linalg.norm(g)
    return NoisyMeasurement(b + eps, float(eta), float(np.linalg.norm(eps)))


def ensemble_to_json(e):
    return {
        "n": e.dim,
        "m": e.count,
        "vectors": [{"re": np.real(v).tolist(), "im": np.imag(v).tolist()} for v in e.vectors],
        "matrix_scale": float(e.matrix_scale),
        "field": e.field,
    }


def ensemble_from_json(obj):
    for key in ("n", "vectors", "matrix_scale", "field"):
        if key not in obj:
            raise FormatError(f"ensemble is missing field {key!r}", field=key)
    n = obj["n"]
    rows = []
    for i, entry in enumerate(obj["vectors"]):
        try:
            re = np.asarray(entry["re"], dtype=float)
            im = np.asarray(entry["im"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"vectors[{i}] is malformed", field=f"vectors[{i}]") from exc
        if re.shape != (n,) or im.shape != (n,):
            raise FormatError(f"vectors[{i}] must have {n} components", field=f"vectors[{i}]")
        rows.append(re + 1j * im if obj["field"] == "complex" else re)
    try:
        return MeasurementEnsemble(np.array(rows), float(obj["matrix_scale"]), obj["field"])
    except DomainError as exc:
        raise FormatError(str(exc), field="field") from exc
