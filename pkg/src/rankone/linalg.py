"""Dense Hermitian matrix algebra.

Hermitian matrices are plain ``(n, n)`` complex128 numpy arrays. Use
:func:`hermitian` to validate and symmetrize input coming from outside the
package; every function here returns freshly allocated arrays and never
mutates its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DimensionError, DomainError, FormatError

#: Eigenvalues with modulus at or below ``RANK_RTOL * ||Z||_inf`` count as zero.
RANK_RTOL = 1e-10

#: Relative size of the anti-Hermitian part tolerated by :func:`hermitian`.
HERMITIAN_RTOL = 1e-8

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


def hermitian(a, rtol=HERMITIAN_RTOL):
    """Return the Hermitian part ``(a + a^*)/2`` of a square matrix.

    Raises
    ------
    DimensionError
        If ``a`` is not square.
    DomainError
        If the anti-Hermitian part of ``a`` exceeds ``rtol`` relative to
        the Frobenius norm of ``a``.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {a.shape}")
    skew = np.linalg.norm(a - a.conj().T)
    if skew > 2.0 * rtol * max(np.linalg.norm(a), 1.0):
        raise DomainError(f"matrix is not Hermitian (anti-Hermitian part {skew / 2:.3e})")
    return 0.5 * (a + a.conj().T)


def _check_square(z):
    z = np.asarray(z)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {z.shape}")
    return z


class EigenDecomposition(NamedTuple):
    """Eigenvalues in descending order with matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eigh(z, method="lapack"):
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    z : (n, n) array_like
        Hermitian matrix.
    method : {"lapack", "jacobi"}
        ``"lapack"`` calls :func:`numpy.linalg.eigh`; ``"jacobi"`` runs the
        cyclic complex Jacobi iteration in :func:`jacobi_eigh`.

    Returns
    -------
    EigenDecomposition
        Real eigenvalues sorted in descending order.
    """
    z = _check_square(z)
    if method == "lapack":
        w, v = np.linalg.eigh(z)
        return EigenDecomposition(w[::-1].copy(), v[:, ::-1].copy())
    if method == "jacobi":
        return jacobi_eigh(z)
    raise ValueError(f"unknown eigensolver {method!r}")


def jacobi_eigh(z, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigensolver for complex Hermitian matrices.

    Each rotation first strips the phase of the pivot ``a[p, q]`` with a
    diagonal unitary, then applies the classical real symmetric rotation
    that annihilates it. Sweeps continue until the off-diagonal Frobenius
    norm drops below ``tol`` times the Frobenius norm of ``z``.

    Raises
    ------
    ConvergenceError
        If ``max_sweeps`` sweeps do not reach the threshold.
    """
    a = np.array(_check_square(z), dtype=np.complex128)
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = np.linalg.norm(a)
    threshold = tol * scale

    def off_norm(m):
        return float(np.linalg.norm(m - np.diag(np.diag(m))))

    off = off_norm(a)
    sweeps = 0
    while off > threshold:
        if sweeps == max_sweeps:
            raise ConvergenceError(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {off:.3e})",
                residual=off,
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                app = a[p, p].real
                aqq = a[q, q].real
                theta = 0.5 * (aqq - app) / r
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # g = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                g = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                cols = a[:, [p, q]] @ g
                a[:, p], a[:, q] = cols[:, 0], cols[:, 1]
                rows = g.conj().T @ a[[p, q], :]
                a[p, :], a[q, :] = rows[0], rows[1]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vc = v[:, [p, q]] @ g
                v[:, p], v[:, q] = vc[:, 0], vc[:, 1]
        sweeps += 1
        off = off_norm(a)
    w = np.diag(a).real
    order = np.argsort(w)[::-1]
    return EigenDecomposition(w[order], v[:, order])


def eigvalsh(z):
    """Eigenvalues of a Hermitian matrix in descending order."""
    return np.linalg.eigvalsh(_check_square(z))[::-1]


def schatten_norm(z, p):
    """Schatten p-norm ``(sum |lambda_i|^p)^(1/p)``; ``p = inf`` is the spectral norm."""
    if not p >= 1:
        raise DomainError(f"Schatten norm needs p >= 1, got {p}")
    lam = np.abs(np.linalg.eigvalsh(_check_square(z)))
    if math.isinf(p):
        return float(lam.max(initial=0.0))
    if p == 1:
        return float(lam.sum())
    if p == 2:
        return float(np.sqrt(np.sum(lam * lam)))
    top = lam.max(initial=0.0)
    if top == 0.0:
        return 0.0
    return float(top * np.sum((lam / top) ** p) ** (1.0 / p))


def nuclear_norm(z):
    return schatten_norm(z, 1)


def spectral_norm(z):
    return schatten_norm(z, math.inf)


def frobenius_inner(x, y):
    """Hilbert-Schmidt inner product ``tr(XY)`` of two Hermitian matrices (real)."""
    x = _check_square(x)
    y = _check_square(y)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    # tr(XY) = sum_jk X_jk Y_kj = sum_jk X_jk conj(Y_jk) for Hermitian Y
    return float(np.vdot(y, x).real)


def numerical_rank(z, rtol=RANK_RTOL):
    lam = np.abs(np.linalg.eigvalsh(_check_square(z)))
    top = lam.max(initial=0.0)
    if top == 0.0:
        return 0
    return int(np.count_nonzero(lam > rtol * top))


def _spectral_map(z, fn):
    w, v = np.linalg.eigh(_check_square(z))
    return (v * fn(w)) @ v.conj().T


def prox_nuclear(z, tau):
    """Proximal map of ``tau * ||.||_1``: soft-threshold the eigenvalues."""
    if tau < 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    return _spectral_map(z, lambda w: np.sign(w) * np.maximum(np.abs(w) - tau, 0.0))


def prox_psd_trace(z, tau):
    """Proximal map of ``tau * tr(.)`` restricted to the PSD cone."""
    if tau < 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    return _spectral_map(z, lambda w: np.maximum(w - tau, 0.0))


def project_psd(z):
    return prox_psd_trace(z, 0.0)


def random_hermitian(n, rng, scale=1.0):
    """GUE-like Hermitian matrix with unit-variance complex entries."""
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    return scale * 0.5 * (g + g.conj().T)


def random_unit_hermitian(n, rng):
    z = random_hermitian(n, rng)
    return z / np.linalg.norm(z)


@dataclass(frozen=True)
class LowRankSignal:
    """A Hermitian test signal of known rank with unit Frobenius norm."""

    matrix: np.ndarray
    rank: int
    psd: bool


def random_low_rank(n, r, psd, rng):
    """Draw ``X = sum_i lambda_i g_i g_i^*`` with orthonormal Gaussian directions.

    The ``g_i`` come from a QR factorization of an ``n x r`` standard complex
    Gaussian matrix. Eigenvalues are ``|N(0,1)|`` when ``psd`` else ``N(0,1)``,
    and the result is scaled to unit Frobenius norm.
    """
    if not 1 <= r <= n:
        raise DomainError(f"need 1 <= r <= n, got r={r}, n={n}")
    g = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    q, _ = np.linalg.qr(g)
    lam = rng.standard_normal(r)
    if psd:
        lam = np.abs(lam)
    lam = lam / np.linalg.norm(lam)
    x = (q * lam) @ q.conj().T
    return LowRankSignal(0.5 * (x + x.conj().T), r, bool(psd))


def matrix_to_json(z):
    """Serialize to the exchange schema ``{"n", "re", "im"}`` (row-major)."""
    z = _check_square(z)
    z = np.asarray(z, dtype=np.complex128)
    return {"n": int(z.shape[0]), "re": z.real.tolist(), "im": z.imag.tolist()}


def matrix_from_json(obj):
    for key in ("n", "re", "im"):
        if key not in obj:
            raise FormatError(f"matrix object is missing {key!r}", field=key)
    n = obj["n"]
    if not isinstance(n, int) or n < 1:
        raise FormatError("'n' must be a positive integer", field="n")
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"matrix entries are not numeric: {exc}", field="re") from exc
    for key, part in (("re", re), ("im", im)):
        if part.shape != (n, n):
            raise FormatError(f"{key!r} has shape {part.shape}, expected {(n, n)}", field=key)
    return hermitian(re + 1j * im)
