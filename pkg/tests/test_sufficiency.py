import numpy as np
import pytest

import oracles as o
from qsuff.algebra import full_space, generate_star, member, span
from qsuff.errors import NotModularInvariantError, NotSufficientError
from qsuff.matcore import PAULI
from qsuff.model import Superoperator, make_model, restrict_to_HS
from qsuff.randmodels import random_model
from qsuff.sufficiency import (
    bimodule_residual,
    check_conditional_expectation,
    conditional_expectation,
    faithful_extension,
    fixed_point_pipeline,
    fixed_point_projection,
    jordan_ce_residuals,
    likelihood_in_algebra_check,
    minimal_sufficient_jordan,
    minimal_sufficient_star,
    pairing_residual,
    positivity_residual,
    ratio_membership,
    schwarz_residual,
    verify_sufficient,
)

SX, SY, SZ = PAULI


def pinching(d):
    def f(B):
        return np.diag(np.diag(B))
    return Superoperator.from_function(d, f)


def diag_algebra(d):
    return span([np.diag(np.eye(d)[i]) for i in range(d)])


def commuting_model():
    return restrict_to_HS(make_model(np.diag([0.5, 0.5]), states=[np.diag([0.75, 0.25])]))


def qubit_model():
    return restrict_to_HS(make_model(np.eye(2) / 2, derivatives=[SX / 2, SZ / 2]))


# ---------------------------------------------------------- verify_sufficient

def test_identity_is_sufficient(rng):
    m = restrict_to_HS(random_model(3, rng))
    ok, r = verify_sufficient(m, Superoperator.identity(3))
    assert ok and r == 0.0


def test_pinching_sufficient_for_commuting_model():
    m = restrict_to_HS(make_model(np.diag([0.5, 0.3, 0.2]), states=[np.diag([0.2, 0.2, 0.6])]))
    assert verify_sufficient(m, pinching(3))[0]


def test_trace_replacement_not_sufficient():
    m = commuting_model()
    f = Superoperator.from_function(2, lambda B: np.trace(B) / 2 * np.eye(2))
    ok, r = verify_sufficient(m, f)
    assert not ok and r > 0.1


# ---------------------------------------------------- conditional expectation

def test_ce_diagonal_is_pinching(rng):
    A = diag_algebra(2)
    alpha = conditional_expectation(A, np.diag([0.3, 0.7]))
    # the real diagonal algebra keeps only the real part of the diagonal
    real_pinch = Superoperator.from_function(2, lambda B: np.diag(np.diag(B).real))
    assert np.abs(alpha.matrix - real_pinch.matrix).max() < 1e-12
    H = o.random_hermitian(2, rng)
    assert np.abs(alpha(H) - np.diag(np.diag(H))).max() < 1e-12


def test_ce_full_algebra_is_identity(rng):
    alpha = conditional_expectation(full_space(3), o.random_density(3, rng))
    assert np.abs(alpha.matrix - np.eye(18)).max() < 1e-10


def test_ce_matches_weighted_oracle(rng):
    # M_2(C) (x) I_2 with rho = r (x) w is modular invariant
    A = generate_star([np.kron(SX, np.eye(2)), np.kron(SY, np.eye(2))], "complex")
    rho = np.kron(o.random_density(2, rng), np.diag([0.6, 0.4]))
    alpha = conditional_expectation(A, rho)
    basis = list(A.basis)
    for _ in range(5):
        B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        assert np.abs(alpha(B) - o.weighted_ce(basis, rho, B)).max() < 1e-10
    t = check_conditional_expectation(alpha, A, rho, rng)
    assert t.passed, t.failures()


def test_ce_degenerate_reference(rng):
    A = generate_star([np.diag([1.0, -1.0, 0.0]), np.diag([0.0, 0.0, 1.0])])
    rho = np.diag([0.5, 0.5, 0.0])
    alpha = conditional_expectation(A, rho)
    assert pairing_residual(alpha, rho) < 1e-12
    assert bimodule_residual(alpha, A) < 1e-12
    assert positivity_residual(alpha, rng) < 1e-10


def test_ce_rejects_non_invariant():
    A = span([np.eye(2), SX])
    with pytest.raises(NotModularInvariantError) as exc:
        conditional_expectation(A, np.diag([0.75, 0.25]))
    assert exc.value.element is not None and exc.value.residual > 0.1


def test_ce_complex_linear_on_complex_algebra(rng):
    A = generate_star([np.kron(SX, np.eye(2)), np.kron(SZ, np.eye(2))], "complex")
    rho = np.kron(np.eye(2) / 2, np.diag([0.7, 0.3]))
    alpha = conditional_expectation(A, rho)
    assert alpha.complex_linearity_residual() < 1e-10


# ---------------------------------------------------------- faithful extension

def test_extension_of_faithful_reference(rng):
    rho = o.random_density(3, rng)
    ext = faithful_extension(full_space(3), rho)
    assert np.abs(ext.sigma - rho).max() == 0
    assert np.abs(ext.delta).max() == 0 and np.abs(ext.kappa_tilde).max() == 0


def test_extension_full_algebra_rank_one():
    ext = faithful_extension(full_space(2), np.diag([1.0, 0.0]))
    # kappa A s is spanned over the reals by |1><0| and i|1><0|
    assert len(ext.basis_Fk) == 2
    assert np.abs(ext.delta - np.diag([0.0, 2.0])).max() < 1e-12
    assert np.abs(ext.kappa_tilde).max() < 1e-12
    assert np.abs(ext.sigma - np.diag([1.0, 2.0])).max() < 1e-12


def test_extension_block_diagonal_algebra():
    A = generate_star([np.pad(SX, ((0, 1), (0, 1))), np.pad(SZ, ((0, 1), (0, 1)))])
    rho = np.diag([0.3, 0.7, 0.0])
    ext = faithful_extension(A, rho)
    assert np.abs(ext.delta).max() < 1e-12
    assert np.abs(ext.kappa_tilde - np.diag([0, 0, 1.0])).max() < 1e-12
    assert np.abs(ext.sigma - np.diag([0.3, 0.7, 1.0])).max() < 1e-12


def test_extension_requires_support_in_algebra():
    A = span([np.eye(2), SX])
    with pytest.raises(NotModularInvariantError):
        faithful_extension(A, np.diag([1.0, 0.0]))


# -------------------------------------------------------- minimal algebras

def test_minimal_star_examples():
    A = minimal_sufficient_star(commuting_model())
    assert A.dim == 2
    for E in (np.diag([1.0, 0.0]), np.diag([0.0, 1.0])):
        assert member(A, E)[0]
    mz = restrict_to_HS(make_model(np.eye(2) / 2, derivatives=[SZ / 2]))
    assert minimal_sufficient_star(mz).dim == 2
    assert minimal_sufficient_star(qubit_model()).dim == 4
    assert minimal_sufficient_star(qubit_model(), "complex").dim == 8


def test_minimal_jordan_examples():
    assert minimal_sufficient_jordan(commuting_model()).algebra.dim == 2
    jr = minimal_sufficient_jordan(qubit_model())
    assert jr.algebra.dim == 3
    assert jr.sufficiency_residual < 1e-12
    for B in (np.eye(2), SX, SZ):
        assert member(jr.algebra, B)[0]


def test_minimal_algebras_of_reference_alone(rng):
    # a one-point model is preserved by B -> Tr(rho B) I, so the scalars suffice
    U = o.haar(3, rng)
    rho = U @ np.diag([0.5, 0.3, 0.2]) @ U.conj().T
    m = make_model(rho)
    assert minimal_sufficient_star(m).dim == 1
    jr = minimal_sufficient_jordan(m)
    assert jr.algebra.dim == 1
    assert np.abs(jr.rho0 - np.eye(3) / 3).max() < 1e-12
    f = Superoperator.from_function(3, lambda B: np.trace(rho @ B) * np.eye(3))
    assert verify_sufficient(m, f)[0]


def test_minimal_star_contains_ratios_and_is_invariant(rng):
    for d in (2, 3, 4):
        m = restrict_to_HS(random_model(d, rng, n_states=1, n_derivs=1))
        A = minimal_sufficient_star(m)
        assert ratio_membership(A, m).passed
        alpha = conditional_expectation(A, m.rho)
        assert verify_sufficient(m, alpha)[0]
        assert schwarz_residual(alpha, rng) < 1e-9


def test_enlarged_algebra_is_sufficient():
    # enlarge the classical algebra to all of M_2(C): still sufficient and invariant
    m = commuting_model()
    A = full_space(2)
    assert ratio_membership(A, m).passed
    alpha = conditional_expectation(A, m.rho)
    assert verify_sufficient(m, alpha)[0]


# ------------------------------------------------------------------ pipeline

def test_pipeline_pinching_commuting():
    m = restrict_to_HS(make_model(np.diag([0.5, 0.3, 0.2]), states=[np.diag([0.2, 0.2, 0.6])]))
    cert = fixed_point_pipeline(m, pinching(3))
    assert cert.valid, cert.residuals.failures()
    assert cert.A_J.dim == 3 and cert.A_R.dim == 3
    assert np.abs(cert.omega - np.eye(3)).max() < 1e-10
    assert np.abs(cert.beta_J.matrix - pinching(3).matrix).max() < 1e-10


def test_pipeline_identity(rng):
    m = restrict_to_HS(random_model(2, rng))
    cert = fixed_point_pipeline(m, Superoperator.identity(2))
    assert cert.valid
    assert cert.A_J.dim == 4
    assert np.abs(cert.omega - np.eye(2)).max() < 1e-10


def test_pipeline_random_three_dim(rng):
    m = restrict_to_HS(random_model(3, rng))
    alpha = conditional_expectation(minimal_sufficient_star(m), m.rho)
    cert = fixed_point_pipeline(m, alpha)
    assert cert.valid, cert.residuals.failures()
    assert likelihood_in_algebra_check(cert, m).passed


def test_pipeline_rejects_insufficient_map():
    m = commuting_model()
    f = Superoperator.from_function(2, lambda B: np.trace(B) / 2 * np.eye(2))
    with pytest.raises(NotSufficientError):
        fixed_point_pipeline(m, f)


def test_fixed_point_methods_agree(rng):
    alpha = conditional_expectation(generate_star([SX, SZ]), np.eye(2) / 2)
    Mh = alpha.hermitian_action()
    P1, _, _ = fixed_point_projection(Mh, "spectral")
    P2, _, it = fixed_point_projection(Mh, "power")
    assert np.abs(P1 - P2).max() < 1e-10


def test_jordan_conditional_expectation_laws(rng):
    m = qubit_model()
    jr = minimal_sufficient_jordan(m)
    w1, w2 = jordan_ce_residuals(jr.beta_J, jr.algebra, rng)
    assert w1 < 1e-9 and w2 < 1e-9


def test_likelihood_check_commuting():
    m = commuting_model()
    alpha = conditional_expectation(minimal_sufficient_star(m), m.rho)
    t = likelihood_in_algebra_check(fixed_point_pipeline(m, alpha), m)
    assert t.passed
    assert t.worst("ratio_in_A_J") < 1e-12


def test_mixed_model_flagged(rng):
    m = restrict_to_HS(make_model(np.diag([0.6, 0.4]), states=[np.diag([0.5, 0.5])],
                                  derivatives=[np.diag([0.1, -0.1])]))
    alpha = conditional_expectation(minimal_sufficient_star(m), m.rho)
    t = likelihood_in_algebra_check(fixed_point_pipeline(m, alpha), m)
    assert t.get("model_is_mixed")["pass"]
