import numpy as np
import pytest
import scipy.linalg as sla

import oracles as o
from qsuff.algebra import generate_jordan, span
from qsuff.errors import InputError, StructureError
from qsuff.matcore import PAULI, fro, psd_sqrt, spin_factor
from qsuff.model import make_model, restrict_to_HS
from qsuff.randmodels import (
    haar_unitary,
    random_blocks,
    random_canonical_algebra,
    random_density,
    structured_model,
)
from qsuff.structure import (
    BlockDescriptor,
    canonical_algebra,
    canonical_descriptor,
    classical_fisher,
    fit_multiplicity_factor,
    identify_structure,
    jordan_dim,
    ki_decompose,
    sld_fisher,
    support_size_bound,
)
from qsuff.sufficiency import conditional_expectation, fixed_point_pipeline, minimal_sufficient_star

SX, SY, SZ = PAULI


def certificate(m, seed=0):
    A = minimal_sufficient_star(m)
    return fixed_point_pipeline(m, conditional_expectation(A, m.rho), seed=seed)


def conj(V, U):
    return span([U @ b @ U.conj().T for b in V.basis], dim=V.dim_ambient)


def expected_multiset(blocks, mode):
    return sorted((c.kind, c.n, c.m, c.m_twisted) for b in blocks
                  for c in canonical_descriptor(b.kind, b.n, b.m, b.m_twisted, mode))


# ------------------------------------------------------------- descriptors

def test_descriptor_validation():
    with pytest.raises(InputError):
        BlockDescriptor("Q", 2)
    with pytest.raises(InputError):
        BlockDescriptor("R", 2, m=1, m_twisted=2)
    with pytest.raises(InputError):
        BlockDescriptor("Gamma", 4).star_dim


@pytest.mark.parametrize("kind,n,rep", [("R", 3, 3), ("C", 2, 2), ("H", 2, 4), ("Gamma", 4, 4),
                                        ("Gamma", 5, 4), ("Gamma", 7, 8)])
def test_rep_dim(kind, n, rep):
    assert BlockDescriptor(kind, n).rep_dim == rep


def test_low_index_canonical_names():
    assert [str(b) for b in canonical_descriptor("Gamma", 1)] == ["(R,1,1)", "(R,1,1)"]
    assert [str(b) for b in canonical_descriptor("Gamma", 2)] == ["(R,2,1)"]
    assert [str(b) for b in canonical_descriptor("Gamma", 3)] == ["(C,2,1)"]
    assert [str(b) for b in canonical_descriptor("Gamma", 4)] == ["(Gamma,4,1)"]
    assert [str(b) for b in canonical_descriptor("H", 1, m=2)] == ["(R,1,4)"]


# ------------------------------------------------------------ jordan_dim

@pytest.mark.parametrize("blocks,dim", [
    ([BlockDescriptor("C", 2)], 4),
    ([BlockDescriptor("Gamma", 4)], 5),
    ([BlockDescriptor("R", 3, 2), BlockDescriptor("H", 1)], 7),
])
def test_jordan_dim_examples(blocks, dim):
    assert jordan_dim(blocks) == dim


def test_jordan_dim_against_oracle_bases():
    I2 = np.eye(2)
    R3 = [sla.block_diag(np.kron(E, I2), np.eye(2)) for E in o.matrix_units_real(3)]
    H1 = [sla.block_diag(np.zeros((6, 6)), np.eye(2))]
    assert o.real_rank(R3 + H1) == 7
    assert o.real_rank(o.matrix_units_complex(3)) == jordan_dim([BlockDescriptor("C", 3)])
    assert o.real_rank(o.quaternion_hermitian_basis(3)) == jordan_dim([BlockDescriptor("H", 3)])
    g = spin_factor(6).gammas
    assert o.real_rank([np.eye(8)] + list(g)) == jordan_dim([BlockDescriptor("Gamma", 6)])


@pytest.mark.parametrize("kind,n", [("R", 1), ("R", 3), ("C", 2), ("C", 3), ("H", 2), ("H", 3),
                                    ("Gamma", 4), ("Gamma", 6), ("Gamma", 7)])
def test_canonical_jordan_block_is_closed_with_formula_dim(kind, n):
    b = BlockDescriptor(kind, n)
    V = canonical_algebra([b], "jordan")
    assert V.jordan_closed
    assert V.dim == b.jordan_dim
    assert o.closure_dim(list(V.basis), product="jordan") == V.dim


@pytest.mark.parametrize("kind,n", [("R", 2), ("C", 2), ("H", 1), ("H", 2)])
def test_canonical_star_block_is_closed_with_formula_dim(kind, n):
    b = BlockDescriptor(kind, n)
    V = canonical_algebra([b], "star")
    assert V.star_closed
    assert V.dim == b.star_dim == o.closure_dim(list(V.basis))


# ---------------------------------------------------- identify_structure

def test_identify_m2r():
    V = span([np.eye(2), SX, 1j * SY, SZ])
    S = identify_structure(V, "star")
    assert S.descriptor_multiset() == [("R", 2, 1, 0)]


def test_identify_gamma4():
    V = generate_jordan(list(spin_factor(4).gammas))
    assert V.dim == 5
    S = identify_structure(V, "jordan")
    assert S.descriptor_multiset() == [("Gamma", 4, 1, 0)]


def test_identify_scrambled_c2_tensor_i2_plus_r1(rng):
    blocks = [BlockDescriptor("C", 2, 2), BlockDescriptor("R", 1, 1)]
    V = canonical_algebra(blocks, "star")
    assert V.dim == 9
    S = identify_structure(conj(V, haar_unitary(5, rng)), "star", rng)
    assert S.descriptor_multiset() == [("C", 2, 2, 0), ("R", 1, 1, 0)]


def test_identified_unitary_maps_to_canonical_form(rng):
    blocks = [BlockDescriptor("R", 2, 2), BlockDescriptor("C", 2, 1)]
    U = haar_unitary(6, rng)
    V = conj(canonical_algebra(blocks, "star"), U)
    S = identify_structure(V, "star", rng)
    W = S.U
    assert np.abs(W.conj().T @ W - np.eye(6)).max() < 1e-10
    C = canonical_algebra(list(S.blocks), "star")
    back = span([W.conj().T @ b @ W for b in V.basis], dim=6)
    assert np.max(C.residuals(back.basis)) < 1e-7


@pytest.mark.parametrize("mode", ["star", "jordan"])
def test_round_trip_random(mode):
    for k in range(15):
        rng = np.random.default_rng([11, k])
        blocks, V, _ = random_canonical_algebra(rng, 8, mode)
        S = identify_structure(V, mode, rng)
        assert S.descriptor_multiset() == expected_multiset(blocks, mode)
        if mode == "jordan":
            assert jordan_dim(S.blocks) == V.dim


def test_gamma5_is_quaternionic_in_jordan_mode():
    V = generate_jordan(list(spin_factor(5).gammas))
    S = identify_structure(V, "jordan")
    assert S.descriptor_multiset() == [("H", 2, 1, 0)]


def test_identify_rejects_non_algebra():
    V = span([np.eye(2), SX, SZ])
    with pytest.raises(StructureError):
        identify_structure(V, "star")
    with pytest.raises(InputError):
        identify_structure(V, "both")


# -------------------------------------------------------------------- KI

def test_ki_commuting_model():
    m = restrict_to_HS(make_model(np.diag([0.5, 0.3, 0.2]),
                                  states=[np.diag([0.2, 0.2, 0.6]), np.diag([0.1, 0.6, 0.3])]))
    ki = ki_decompose(m, certificate(m), "star")
    assert all(b.kind == "R" and b.n == 1 for b in ki.structure.blocks)
    assert sum(b.m for b in ki.structure.blocks) == 3
    for xs in ki.X_blocks:
        assert all(x.shape == (1, 1) for x in xs)
    assert ki.residuals.passed


def test_ki_constructed_tensor_model(rng):
    a, b = 1.25, 0.75
    P = np.diag([a, b]) / 2
    states = [np.kron(random_density(2, rng), P) for _ in range(2)]
    rho = np.kron(np.eye(2) / 2, P)
    m = restrict_to_HS(make_model(rho, states, [np.kron(o.random_hermitian(2, rng), P) * 0.1]))
    U = haar_unitary(4, rng)
    m = restrict_to_HS(make_model(U @ rho @ U.conj().T,
                                  [U @ s @ U.conj().T for s in states],
                                  [U @ e.X @ U.conj().T for e in m.elements if e.kind == "derivative"]))
    ki = ki_decompose(m, certificate(m), "star", rng)
    assert [(bl.kind, bl.n, bl.m) for bl in ki.structure.blocks] == [("C", 2, 2)]
    assert np.abs(ki.P_blocks[0] - np.array([a, b])).max() < 1e-9
    assert ki.residuals.passed


def test_ki_reassembly_and_p_independence():
    for k in range(6):
        rng = np.random.default_rng([5, k])
        blocks = [b for b in random_blocks(rng, 7, "star") if not (b.kind in "CH" and b.n == 1)]
        if not blocks:
            continue
        m, _, Ps = structured_model(blocks, rng)
        m = restrict_to_HS(m)
        ki = ki_decompose(m, certificate(m), "star", rng)
        assert sorted((b.kind, b.n, b.m, b.m_twisted) for b in ki.structure.blocks) == \
            sorted((b.kind, b.n, b.m, b.m_twisted) for b in blocks)
        for e, xs in zip(m.elements, ki.X_blocks):
            assert fro(ki.assemble(xs) - e.X) <= 1e-8 * (1 + fro(e.X))
        for i, b in enumerate(ki.structure.blocks):
            if b.m_plain < 2:
                continue
            fits = [fit_multiplicity_factor(ki, e.X, i) for e in m.elements]
            fits = [f[0] for f in fits if f is not None]
            for F in fits[1:]:
                assert np.abs(F - fits[0]).max() < 1e-9


# ---------------------------------------------------------------- bounds

def test_support_size_bound_examples():
    full = [BlockDescriptor("C", 2)]
    assert support_size_bound(full, 3, "local") == 9
    assert support_size_bound(full, 3, "bayesian") == 4
    assert support_size_bound([BlockDescriptor("R", 1, 5)], 2, "bayesian") == 1
    with pytest.raises(InputError):
        support_size_bound(full, 3, "minimax")


@pytest.mark.parametrize("p", np.linspace(0.05, 0.95, 7))
def test_bernoulli_fisher(p):
    J = classical_fisher(np.diag([p, 1 - p]), [np.diag([1.0, -1.0])],
                         [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    assert abs(J[0, 0] - o.bernoulli_fisher(p)) < 1e-10


def test_single_outcome_fisher_is_zero(rng):
    rho = random_density(3, rng)
    D = o.random_hermitian(3, rng)
    D -= np.trace(D).real / 3 * np.eye(3)
    J = classical_fisher(rho, [D], [np.eye(3)])
    assert np.abs(J).max() < 1e-12


def test_fisher_rejects_incomplete_povm():
    with pytest.raises(InputError):
        classical_fisher(np.eye(2) / 2, [SZ / 2], [np.diag([1.0, 0.0])])


def test_classical_below_sld(rng):
    rho = random_density(3, rng)
    derivs = [o.random_hermitian(3, rng) for _ in range(2)]
    derivs = [D - np.trace(D).real / 3 * np.eye(3) for D in derivs]
    U = haar_unitary(3, rng)
    povm = [np.outer(U[:, k], U[:, k].conj()) for k in range(3)]
    gap = sld_fisher(rho, derivs) - classical_fisher(rho, derivs, povm)
    assert np.linalg.eigvalsh(gap).min() > -1e-10


def test_sld_fisher_matches_oracle(rng):
    rho = random_density(3, rng)
    D = o.random_hermitian(3, rng)
    D -= np.trace(D).real / 3 * np.eye(3)
    L = o.sld(D, rho)
    assert abs(sld_fisher(rho, [D])[0, 0] - np.trace(rho @ L @ L).real) < 1e-10


def test_refining_povm_never_decreases_fisher(rng):
    for _ in range(10):
        rho = random_density(3, rng)
        derivs = [o.random_hermitian(3, rng) for _ in range(2)]
        U = haar_unitary(3, rng)
        povm = [np.outer(U[:, k], U[:, k].conj()) for k in range(3)]
        M = povm.pop(int(rng.integers(3)))
        r = psd_sqrt(M)
        E = random_density(3, rng) * rng.random()
        A = r @ E @ r
        fine = povm + [A, M - A]
        gap = classical_fisher(rho, derivs, fine) - classical_fisher(rho, derivs, povm + [M])
        assert np.linalg.eigvalsh(gap).min() > -1e-10
