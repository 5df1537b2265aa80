import numpy as np
import pytest

import oracles as o
from qsuff.errors import InputError, NotHermitianError, NotPSDError
from qsuff.matcore import (
    PAULI,
    as_op,
    check_hermitian,
    check_psd,
    cluster_sorted,
    geninv,
    herm_basis,
    herm_eig,
    hs_inner,
    matfun,
    null_space,
    numerical_rank,
    op_to_vec,
    ops_to_vecs,
    psd_inv_sqrt,
    psd_sqrt,
    quaternion_conj,
    quaternion_embed,
    quaternion_matmul,
    quaternion_mul,
    spin_factor,
    support_proj,
    vec_to_op,
)


def test_hs_inner_is_real_trace_pairing(rng):
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert abs(hs_inner(A, B) - np.trace(A.conj().T @ B).real) < 1e-12
    assert abs(hs_inner(A, B) - op_to_vec(A) @ op_to_vec(B)) < 1e-12


def test_sigma_x_and_i_sigma_x_are_orthogonal():
    sx = PAULI[0]
    assert hs_inner(sx, 1j * sx) == 0.0


def test_vec_round_trip(rng):
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.abs(vec_to_op(op_to_vec(A), 4) - A).max() < 1e-15
    V = ops_to_vecs([A, 2 * A])
    assert np.abs(V[1] - 2 * op_to_vec(A)).max() < 1e-15


def test_herm_basis_orthonormal_and_complete():
    for d in (1, 2, 3, 5):
        H = ops_to_vecs(herm_basis(d))
        assert H.shape == (d * d, 2 * d * d)
        assert np.abs(H @ H.T - np.eye(d * d)).max() < 1e-12
        for B in herm_basis(d):
            assert np.abs(B - B.conj().T).max() == 0


def test_as_op_validation():
    with pytest.raises(InputError):
        as_op(np.ones((2, 3)))
    with pytest.raises(InputError):
        as_op(np.eye(2), dim=3)
    with pytest.raises(InputError):
        as_op(np.array([[np.nan, 0], [0, 1]]))


def test_check_hermitian_rejects_and_symmetrises():
    with pytest.raises(NotHermitianError):
        check_hermitian(np.array([[0, 1], [0, 0]]))
    A = np.array([[1, 1e-14], [0, 1]], dtype=complex)
    H = check_hermitian(A)
    assert np.abs(H - H.conj().T).max() == 0


def test_check_psd_message():
    with pytest.raises(NotPSDError, match="reference not PSD"):
        check_psd(np.diag([-1e-3, 1.0]), what="reference")


def test_herm_eig_descending(rng):
    A = o.random_hermitian(4, rng)
    lam, U = herm_eig(A)
    assert np.all(np.diff(lam) <= 0)
    assert np.abs(U @ np.diag(lam) @ U.conj().T - A).max() < 1e-12


def test_geninv_penrose_conditions(rng):
    G = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    A = G @ G.conj().T
    X = geninv(A)
    assert np.abs(A @ X @ A - A).max() < 1e-10
    assert np.abs(X @ A @ X - X).max() < 1e-10
    assert np.abs((A @ X).conj().T - A @ X).max() < 1e-10
    assert np.abs(X - np.linalg.pinv(A, hermitian=True)).max() < 1e-9


def test_psd_sqrt_and_inverse_sqrt(rng):
    A = o.random_density(3, rng)
    S = psd_sqrt(A)
    assert np.abs(S @ S - A).max() < 1e-12
    T = psd_inv_sqrt(A)
    assert np.abs(T @ A @ T - np.eye(3)).max() < 1e-9


def test_psd_sqrt_degenerate():
    A = np.diag([4.0, 0.0])
    assert np.abs(psd_sqrt(A) - np.diag([2.0, 0.0])).max() < 1e-14
    assert np.abs(psd_inv_sqrt(A) - np.diag([0.5, 0.0])).max() < 1e-14


def test_support_proj_and_rank(rng):
    G = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    A = G @ G.conj().T
    P = support_proj(A)
    assert np.abs(P @ P - P).max() < 1e-12
    assert abs(np.trace(P).real - 2) < 1e-12
    assert numerical_rank(A) == 2


def test_matfun_kernel_modes():
    A = np.diag([2.0, 0.0])
    assert np.abs(matfun(A, np.log, "identity") - np.diag([np.log(2), 1.0])).max() < 1e-14
    assert np.abs(matfun(A, lambda t: t ** 2, "apply") - np.diag([4.0, 0.0])).max() < 1e-14
    with pytest.raises(InputError):
        matfun(A, np.log, "bogus")


def test_null_space():
    M = np.array([[1.0, 1.0, 0.0]])
    N = null_space(M)
    assert N.shape == (3, 2)
    assert np.abs(M @ N).max() < 1e-14


def test_cluster_sorted():
    groups = cluster_sorted(np.array([3.0, 3.0 + 1e-12, 1.0, 0.5, 0.5]), 1e-9)
    assert [list(g) for g in groups] == [[0, 1], [2], [3, 4]]


def test_quaternion_embedding_is_multiplicative(rng):
    for _ in range(10):
        A = rng.standard_normal((2, 3, 4))
        B = rng.standard_normal((3, 2, 4))
        # embed rectangular matrices via padding to square
        Ap = np.zeros((3, 3, 4)); Ap[:2] = A
        Bp = np.zeros((3, 3, 4)); Bp[:, :2] = B
        lhs = quaternion_embed(quaternion_matmul(Ap, Bp))
        rhs = quaternion_embed(Ap) @ quaternion_embed(Bp)
        assert np.abs(lhs - rhs).max() < 1e-12


def test_quaternion_units():
    i, j, k = np.eye(4)[1:]
    assert np.allclose(quaternion_mul(i, i), [-1, 0, 0, 0])
    assert np.allclose(quaternion_mul(i, j), -k)
    q = np.array([1.0, 2.0, -1.0, 0.5])
    n2 = quaternion_mul(q, quaternion_conj(q))
    assert np.allclose(n2, [q @ q, 0, 0, 0])


def test_quaternion_embed_adjoint(rng):
    W = rng.standard_normal((2, 2, 4))
    Wc = quaternion_conj(W.transpose(1, 0, 2))
    assert np.abs(quaternion_embed(Wc) - quaternion_embed(W).conj().T).max() < 1e-14


@pytest.mark.parametrize("n", range(1, 9))
def test_spin_factor_anticommutation(n):
    sf = spin_factor(n)
    assert len(sf.gammas) == n
    assert sf.dim == 2 ** (n // 2)
    assert sf.anticommutation_residual() < 1e-14
    for g in sf.gammas:
        assert np.abs(g - g.conj().T).max() == 0


def test_spin_factor_rejects_zero():
    with pytest.raises(InputError):
        spin_factor(0)
