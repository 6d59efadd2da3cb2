"""Tensor powers, the symmetric-subspace projector and symmetric moments.

Tensor factors are ordered lexicographically: the multi-index
``(i_1, ..., i_t)`` of ``(C^n)^{(x)t}`` maps to the flat position
``sum_k i_k n^(t-k)``, which is what repeated :func:`numpy.kron` produces.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, DomainError, ResourceGuardError

#: Largest tensor-space dimension ``n**t`` for which explicit operators are built.
MAX_TENSOR_DIM = 4096


@dataclass(frozen=True)
class TensorOperator:
    """An operator on ``(C^n)^{(x)t}`` stored as an ``n^t x n^t`` matrix."""

    base_dim: int
    order: int
    matrix: np.ndarray

    def __post_init__(self):
        size = self.base_dim**self.order
        if self.matrix.shape != (size, size):
            raise DimensionError(
                f"matrix shape {self.matrix.shape} does not match n={self.base_dim}, t={self.order}"
            )

    def trace(self):
        return complex(np.trace(self.matrix))

    def __matmul__(self, other):
        if (self.base_dim, self.order) != (other.base_dim, other.order):
            raise DimensionError("tensor operators act on different spaces")
        return TensorOperator(self.base_dim, self.order, self.matrix @ other.matrix)


def sym_dim(n, k):
    """Dimension ``binom(n+k-1, k)`` of the symmetric subspace of ``(C^n)^{(x)k}``."""
    if n < 1 or k < 0:
        raise DomainError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    return math.comb(n + k - 1, k)


def _guard(n, t):
    if n < 1 or t < 1:
        raise DomainError(f"need n >= 1 and t >= 1, got n={n}, t={t}")
    if n**t > MAX_TENSOR_DIM:
        raise ResourceGuardError(f"n^t = {n**t} exceeds the explicit tensor guard {MAX_TENSOR_DIM}")


def permutation_indices(n, perm):
    """Index map of the operator permuting tensor factors by ``perm``.

    The returned array ``idx`` satisfies ``(P_perm x)[j] = x[idx[j]]``.
    """
    t = len(perm)
    return np.arange(n**t).reshape((n,) * t).transpose(perm).ravel()


@lru_cache(maxsize=32)
def _sym_projector_matrix(n, t):
    size = n**t
    p = np.zeros((size, size))
    rows = np.arange(size)
    for perm in itertools.permutations(range(t)):
        p[rows, permutation_indices(n, perm)] += 1.0
    p /= math.factorial(t)
    p.setflags(write=False)
    return p


def sym_projector(n, t):
    """Orthogonal projector onto the totally symmetric subspace ``Sym^t``."""
    _guard(n, t)
    return TensorOperator(n, t, _sym_projector_matrix(n, t).astype(np.complex128))


def tensor_power_vector(w, t):
    out = np.ones(1, dtype=np.complex128)
    for _ in range(t):
        out = np.kron(out, w)
    return out


def rank_one_tensor_power(w, t):
    """``(w w^*)^{(x)t}`` for a unit vector ``w``."""
    w = np.asarray(w, dtype=np.complex128)
    if w.ndim != 1:
        raise DimensionError("expected a vector")
    if abs(np.linalg.norm(w) - 1.0) > 1e-10:
        raise DomainError(f"vector is not normalized (norm {np.linalg.norm(w):.12f})")
    _guard(w.shape[0], t)
    v = tensor_power_vector(w, t)
    return TensorOperator(w.shape[0], t, np.outer(v, v.conj()))


def tensor_power_matrix(z, t):
    """``Z^{(x)t}`` as a dense matrix."""
    z = np.asarray(z, dtype=np.complex128)
    _guard(z.shape[0], t)
    out = np.ones((1, 1), dtype=np.complex128)
    for _ in range(t):
        out = np.kron(out, z)
    return TensorOperator(z.shape[0], t, out)


def partial_trace(op, subsystems):
    """Trace out the tensor factors listed in ``subsystems`` (0-based).

    Tracing out every factor returns a ``1 x 1`` operator of order 0.
    """
    n, t = op.base_dim, op.order
    requested = [int(i) for i in subsystems]
    drop = sorted(set(requested))
    if len(drop) != len(requested) or any(i < 0 or i >= t for i in drop):
        raise DomainError(f"invalid subsystem indices {requested} for order {t}")
    keep = [i for i in range(t) if i not in drop]
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * t > len(letters):
        raise DomainError("order too large for partial trace")
    row = list(letters[:t])
    col = list(letters[t : 2 * t])
    for i in drop:
        col[i] = row[i]
    out_idx = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    expr = "".join(row) + "".join(col) + "->" + out_idx
    reduced = np.einsum(expr, op.matrix.reshape((n,) * (2 * t)))
    size = n ** len(keep)
    return TensorOperator(n, len(keep), reduced.reshape(size, size))


def cycle_types(m):
    """Yield ``(j_1, ..., j_m)`` with ``sum_k k j_k = m`` and the number of permutations of that type."""

    def rec(k, remaining):
        if k == 0:
            if remaining == 0:
                yield ()
            return
        for j in range(remaining // k + 1):
            for rest in rec(k - 1, remaining - k * j):
                yield rest + (j,)

    for js in rec(m, m):
        denom = 1
        for k, j in enumerate(js, start=1):
            denom *= math.factorial(j) * k**j
        yield js, math.factorial(m) // denom


def sym_moment(z, m):
    """``m! tr(P_Sym^m Z^{(x)m})`` from the power traces ``tr(Z^k)``, ``k <= m``.

    Sums ``m! / prod_k(j_k! k^j_k) * prod_k tr(Z^k)^j_k`` over cycle types,
    i.e. over permutations of ``S_m`` grouped by their cycle structure. No
    tensors are formed.
    """
    if m < 1:
        raise DomainError(f"moment order must be >= 1, got {m}")
    z = np.asarray(z, dtype=np.complex128)
    lam = np.linalg.eigvalsh(0.5 * (z + z.conj().T))
    power_traces = [float(np.sum(lam**k)) for k in range(1, m + 1)]
    total = 0.0
    for js, count in cycle_types(m):
        term = float(count)
        for k, j in enumerate(js, start=1):
            if j:
                term *= power_traces[k - 1] ** j
        total += term
    return total


# Orthonormal basis of Sym^t -------------------------------------------------


@lru_cache(maxsize=64)
def sym_multi_indices(n, t):
    """Sorted multi-indices labelling the standard orthonormal basis of ``Sym^t``."""
    return tuple(itertools.combinations_with_replacement(range(n), t))


@lru_cache(maxsize=64)
def _multinomials(n, t):
    out = []
    for alpha in sym_multi_indices(n, t):
        counts = np.bincount(alpha, minlength=n)
        denom = 1
        for c in counts:
            denom *= math.factorial(int(c))
        out.append(math.factorial(t) // denom)
    return np.array(out, dtype=float)


def sym_coordinates(vectors, t):
    """Coordinates of ``w^{(x)t}`` in the orthonormal basis of ``Sym^t``.

    The basis vector for the sorted multi-index ``alpha`` is the normalized
    sum of all distinct rearrangements of ``e_alpha``; the coordinate of
    ``w^{(x)t}`` on it is ``sqrt(multinomial(alpha)) * prod_k w[alpha_k]``.

    Parameters
    ----------
    vectors : (N, n) or (n,) array_like
    t : int

    Returns
    -------
    (N, D) or (D,) complex ndarray, ``D = sym_dim(n, t)``.
    """
    w = np.asarray(vectors, dtype=np.complex128)
    single = w.ndim == 1
    w = np.atleast_2d(w)
    n = w.shape[1]
    alphas = np.array(sym_multi_indices(n, t), dtype=np.intp).reshape(-1, t)
    coords = np.ones((w.shape[0], alphas.shape[0]), dtype=np.complex128)
    for k in range(t):
        coords *= w[:, alphas[:, k]]
    coords *= np.sqrt(_multinomials(n, t))
    return coords[0] if single else coords


def sym_basis_isometry(n, t):
    """``n^t x D`` matrix whose columns are the orthonormal ``Sym^t`` basis."""
    _guard(n, t)
    alphas = sym_multi_indices(n, t)
    basis = np.zeros((n**t, len(alphas)))
    for col, alpha in enumerate(alphas):
        for arrangement in set(itertools.permutations(alpha)):
            basis[np.ravel_multi_index(arrangement, (n,) * t), col] = 1.0
        basis[:, col] /= np.linalg.norm(basis[:, col])
    return basis
