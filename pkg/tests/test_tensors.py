import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankone import linalg, tensors
from rankone.errors import DimensionError, DomainError, ResourceGuardError


def brute_sym_moment(z, m):
    """``m! tr(P_Sym Z^{(x)m})`` via explicit tensors and the permutation-average projector."""
    n = z.shape[0]
    proj = tensors.sym_projector(n, m).matrix
    return math.factorial(m) * np.trace(proj @ tensors.tensor_power_matrix(z, m).matrix).real


def unit_vector(n, rng):
    w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return w / np.linalg.norm(w)


@pytest.mark.parametrize("n, k, expected", [(5, 1, 5), (2, 4, 5), (3, 2, 6), (4, 4, 35)])
def test_sym_dim(n, k, expected):
    assert tensors.sym_dim(n, k) == expected


def test_sym_projector_examples():
    np.testing.assert_allclose(tensors.sym_projector(2, 1).matrix, np.eye(2))
    assert tensors.sym_projector(2, 2).trace() == pytest.approx(3)
    assert tensors.sym_projector(3, 4).trace() == pytest.approx(15)


@pytest.mark.parametrize("n, t", [(n, t) for n in (1, 2, 3, 4) for t in (1, 2, 3, 4) if n**t <= 256])
def test_sym_projector_is_orthogonal_projector(n, t):
    p = tensors.sym_projector(n, t).matrix
    np.testing.assert_allclose(p, p.conj().T, atol=1e-12)
    assert np.abs(p @ p - p).max() <= 1e-10
    assert p.trace().real == pytest.approx(tensors.sym_dim(n, t))


def test_resource_guard():
    with pytest.raises(ResourceGuardError):
        tensors.sym_projector(9, 4)
    with pytest.raises(DomainError):
        tensors.sym_projector(0, 2)


def test_rank_one_tensor_power(rng):
    e1 = np.array([1.0, 0.0, 0.0])
    t2 = tensors.rank_one_tensor_power(e1, 2).matrix
    expected = np.zeros((9, 9))
    expected[0, 0] = 1.0
    np.testing.assert_allclose(t2, expected)
    for t in (1, 2, 3):
        w = unit_vector(3, rng)
        op = tensors.rank_one_tensor_power(w, t)
        assert op.trace() == pytest.approx(1.0)
        np.testing.assert_allclose(op.matrix, op.matrix.conj().T, atol=1e-12)
        np.testing.assert_allclose((tensors.sym_projector(3, t) @ op).matrix, op.matrix, atol=1e-12)
    with pytest.raises(DomainError):
        tensors.rank_one_tensor_power(np.array([1.0, 1.0]), 2)


def test_partial_trace_product_case(rng):
    a, b = linalg.random_hermitian(2, rng), linalg.random_hermitian(3, rng)
    # factors of equal dimension are required, so embed both in n = 3
    a3 = np.zeros((3, 3), dtype=complex)
    a3[:2, :2] = a
    op = tensors.TensorOperator(3, 2, np.kron(a3, b))
    np.testing.assert_allclose(tensors.partial_trace(op, [1]).matrix, np.trace(b) * a3, atol=1e-12)
    np.testing.assert_allclose(tensors.partial_trace(op, (0,)).matrix, np.trace(a3) * b, atol=1e-12)


def test_partial_trace_of_tensor_powers(rng):
    w = unit_vector(2, rng)
    op = tensors.rank_one_tensor_power(w, 4)
    full = tensors.partial_trace(op, range(4))
    assert full.order == 0 and full.matrix[0, 0] == pytest.approx(1.0)
    for k in (1, 2, 3):
        reduced = tensors.partial_trace(op, range(4 - k))
        np.testing.assert_allclose(reduced.matrix, tensors.rank_one_tensor_power(w, k).matrix, atol=1e-12)
    with pytest.raises(DomainError):
        tensors.partial_trace(op, [0, 0])
    with pytest.raises(DomainError):
        tensors.partial_trace(op, [4])


def test_partial_trace_contracts_nuclear_norm(rng):
    for _ in range(100):
        t = int(rng.integers(2, 4))
        op = tensors.TensorOperator(2, t, linalg.random_hermitian(2**t, rng))
        i = int(rng.integers(t))
        assert linalg.nuclear_norm(tensors.partial_trace(op, [i]).matrix) <= linalg.nuclear_norm(op.matrix) + 1e-10


def test_tensor_operator_shape_check():
    with pytest.raises(DimensionError):
        tensors.TensorOperator(2, 2, np.eye(3))


def test_cycle_types_count_permutations():
    for m in range(1, 9):
        assert sum(count for _, count in tensors.cycle_types(m)) == math.factorial(m)


def test_sym_moment_examples():
    assert tensors.sym_moment(np.eye(2), 2) == pytest.approx(6.0)
    assert tensors.sym_moment(np.diag([1.0, 0.0]), 4) == pytest.approx(24.0)


def test_sym_moment_matches_brute_force(rng):
    for n in (2, 3):
        for m in (1, 2, 3, 4):
            for _ in range(50):
                z = linalg.random_hermitian(n, rng)
                brute = brute_sym_moment(z, m)
                assert tensors.sym_moment(z, m) == pytest.approx(brute, rel=1e-10, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6), m=st.integers(1, 8))
def test_sym_moment_unitary_invariance_and_homogeneity(seed, n, m):
    rng = np.random.default_rng(seed)
    z = linalg.random_hermitian(n, rng)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    base = tensors.sym_moment(z, m)
    assert tensors.sym_moment(q @ z @ q.conj().T, m) == pytest.approx(base, rel=1e-9, abs=1e-9)
    assert tensors.sym_moment(2.0 * z, m) == pytest.approx(2.0**m * base, rel=1e-9, abs=1e-9)


def test_sym_basis_coordinates(rng):
    for n, t in [(2, 2), (2, 4), (3, 3)]:
        basis = tensors.sym_basis_isometry(n, t)
        np.testing.assert_allclose(basis.T @ basis, np.eye(basis.shape[1]), atol=1e-12)
        np.testing.assert_allclose(basis @ basis.T, tensors.sym_projector(n, t).matrix.real, atol=1e-12)
        w = unit_vector(n, rng)
        coords = tensors.sym_coordinates(w, t)
        np.testing.assert_allclose(basis @ coords, tensors.tensor_power_vector(w, t), atol=1e-12)


def test_haar_moment_monte_carlo():
    rng = np.random.default_rng(5)
    count = 100_000
    g = rng.standard_normal((count, 2)) + 1j * rng.standard_normal((count, 2))
    w = g / np.linalg.norm(g, axis=1, keepdims=True)
    v = np.einsum("ij,ik->ijk", w, w).reshape(count, 4)
    samples = np.einsum("ij,ik->ijk", v, v.conj())
    mean = samples.mean(axis=0)
    target = tensors.sym_projector(2, 2).matrix / tensors.sym_dim(2, 2)
    # entrywise standard errors; their Frobenius sum bounds the operator-norm fluctuation
    se = math.sqrt(np.sum(samples.real.var(axis=0) + samples.imag.var(axis=0)) / count)
    assert linalg.spectral_norm(mean - target) <= 3 * se


def test_permutations_commute_with_tensor_powers(rng):
    z = linalg.random_hermitian(2, rng)
    zt = tensors.tensor_power_matrix(z, 3).matrix
    for perm in itertools.permutations(range(3)):
        idx = tensors.permutation_indices(2, perm)
        np.testing.assert_allclose(zt[np.ix_(idx, idx)], zt, atol=1e-12)
