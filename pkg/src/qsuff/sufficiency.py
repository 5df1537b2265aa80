"""Sufficiency of real-linear maps and the minimal sufficient algebras.

Contents:

* :func:`verify_sufficient` - the pairing test ``Re Tr X B = Re Tr X alpha(B)``.
* :func:`conditional_expectation` and :func:`faithful_extension` - the
  rho-preserving conditional expectation onto a modular-invariant real
  *-algebra, for faithful and for degenerate ``rho``.
* :func:`minimal_sufficient_star`, :func:`minimal_sufficient_jordan`.
* :func:`fixed_point_pipeline` - from a sufficient positive unital map to
  the fixed-point Jordan algebra, the generated real/complex algebras and
  the supporting operator ``omega``.
"""
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    RealSubspace,
    generate_jordan,
    generate_star,
    member,
    modular_invariance_residual,
    span,
)
from .errors import (
    ConsistencyError,
    InputError,
    NotModularInvariantError,
    NotSufficientError,
)
from .matcore import (
    DEFAULT_TOL,
    fro,
    geninv,
    herm_basis,
    hermitize,
    jordan,
    null_space,
    op_to_vec,
    ops_to_vecs,
    psd_inv_sqrt,
    psd_sqrt,
    support_proj,
)
from .model import (
    STATE,
    Superoperator,
    likelihood_ratio_set,
    modular_superop,
    sld,
    sqrt_likelihood_ratio,
)
from .report import ResidualTable

SAMPLES = 50
SUFF_TOL = 1e-9


# ------------------------------------------------------------ map checks

def sufficiency_residual(ops, alpha):
    """Largest ``|Re Tr X B - Re Tr X alpha(B)|`` over X in ops, B in a full basis."""
    D = np.eye(alpha.matrix.shape[0]) - alpha.matrix
    X = ops_to_vecs(np.asarray(ops))
    # for Hermitian X, Re Tr X B = <X, B>
    return float(np.max(np.abs(X @ D))) if len(X) else 0.0


def verify_sufficient(m, alpha, tol=SUFF_TOL):
    """Check sufficiency of ``alpha`` for the model; returns ``(ok, residual)``.

    The pass threshold is ``tol * (1 + max ||X||_F)``.
    """
    if alpha.dim != m.dim:
        raise InputError(f"map acts on dimension {alpha.dim}, model has {m.dim}")
    r = sufficiency_residual(m.operators, alpha)
    scale = 1.0 + max(fro(X) for X in m.operators)
    return r <= tol * scale, r


def _random_psd(d, rng):
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    k = int(rng.integers(1, d + 1))
    G = G[:, :k]
    return G @ G.conj().T


def _random_herm(d, rng):
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (G + G.conj().T)


def positivity_residual(alpha, rng, samples=SAMPLES):
    """Worst ``-lambda_min(alpha(B)) / ||alpha(B)||`` over random PSD ``B``."""
    d = alpha.dim
    worst = 0.0
    for _ in range(samples):
        A = alpha(_random_psd(d, rng))
        lam = np.linalg.eigvalsh(hermitize(A))
        scale = max(np.max(np.abs(lam)), 1e-300)
        worst = max(worst, -lam[0] / scale)
    return float(max(worst, 0.0))


def unitality_residual(alpha):
    d = alpha.dim
    return fro(alpha(np.eye(d)) - np.eye(d))


def schwarz_residual(alpha, rng, samples=SAMPLES):
    """Worst violation of ``alpha(B^2) >= alpha(B)^2`` on random Hermitian B.

    Returned as ``max(0, -lambda_min(alpha(B^2) - alpha(B)^2))`` for ``B``
    normalised to unit operator norm.
    """
    d = alpha.dim
    worst = 0.0
    for _ in range(samples):
        B = _random_herm(d, rng)
        B = B / np.max(np.abs(np.linalg.eigvalsh(B)))
        aB = alpha(B)
        G = hermitize(alpha(B @ B) - aB @ aB)
        worst = max(worst, -np.linalg.eigvalsh(G)[0])
    return float(max(worst, 0.0))


def bimodule_residual(alpha, A):
    """Largest ``||a alpha(B) - alpha(a B)||`` over a in A's basis, B in a full basis."""
    d = alpha.dim
    I = np.eye(d)
    worst = 0.0
    for a in A.basis:
        L = Superoperator.sandwich(a, I).matrix
        D = L @ alpha.matrix - alpha.matrix @ L
        worst = max(worst, float(np.max(np.linalg.norm(D, axis=0))))
    return worst


def range_residual(alpha, A, hermitian_inputs=False):
    """Largest distance from ``A`` of the image of a basis operator.

    With ``hermitian_inputs`` only a basis of Hermitian operators is used.
    """
    M = alpha.matrix
    if hermitian_inputs:
        M = M @ ops_to_vecs(herm_basis(alpha.dim)).T
    R = M - A.vecs.T @ (A.vecs @ M) if A.dim else M
    return float(np.max(np.linalg.norm(R, axis=0)))


def pairing_residual(alpha, rho):
    """Largest ``|Re Tr rho B - Re Tr rho alpha(B)|`` over a full basis."""
    return sufficiency_residual([rho], alpha)


def check_conditional_expectation(alpha, A, rho, rng=None, tol=DEFAULT_TOL):
    """Residual table for the conditional-expectation properties of ``alpha``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    t = ResidualTable()
    t.add("ce:range_in_algebra", range_residual(alpha, A), tol.member)
    t.add("ce:bimodule", bimodule_residual(alpha, A), SUFF_TOL)
    t.add("ce:rho_pairing", pairing_residual(alpha, rho), SUFF_TOL)
    t.add("ce:positivity", positivity_residual(alpha, rng), tol.psd)
    if A.complex_closed:
        t.add("ce:complex_linear", alpha.complex_linearity_residual(), tol.member)
    return t


# ---------------------------------------------------- conditional expectation

@dataclass(frozen=True)
class FaithfulExtension:
    """``sigma = rho + delta + kappa_tilde`` with ``sigma > 0``."""

    sigma: np.ndarray
    delta: np.ndarray
    kappa_tilde: np.ndarray
    basis_Fk: tuple
    support: np.ndarray
    delta_support: np.ndarray


def _require_invariant(A, rho, tol):
    ok, r, k = modular_invariance_residual(A, rho, tol)
    if not ok:
        raise NotModularInvariantError(
            f"rho A rho^-1 is not contained in A (basis element {k}, residual {r:.3e})",
            element=A.basis[k], residual=r)


def faithful_extension(A, rho, tol=DEFAULT_TOL, check=True):
    """Extend a degenerate ``rho`` to a faithful ``sigma`` keeping invariance.

    With ``s = supp rho`` and ``kappa = I - s``: ``delta = sum F rho F*`` over
    a real basis ``F`` of ``kappa A s``; ``kappa_tilde`` is the projection
    onto the part of the kernel missed by ``delta``.
    """
    d = rho.shape[0]
    I = np.eye(d)
    s = support_proj(rho, tol.rank, tol.psd)
    kappa = I - s
    if check:
        ok, r = member(A, s, tol.member)
        if not ok:
            raise NotModularInvariantError(
                f"support of rho is not in the algebra (residual {r:.3e})", element=s, residual=r)
        _require_invariant(A, rho, tol)
    if fro(kappa) < 0.5:
        return FaithfulExtension(rho.copy(), np.zeros_like(rho), np.zeros_like(rho),
                                 (), s, np.zeros_like(rho))
    F = span([kappa @ b @ s for b in A.basis], dim=d).basis
    delta = sum((f @ rho @ f.conj().T for f in F), np.zeros((d, d), dtype=complex))
    delta = hermitize(delta)
    if fro(delta) > 0:
        s_t = support_proj(delta, tol.rank, tol.psd)
    else:
        s_t = np.zeros((d, d), dtype=complex)
    kt = hermitize(kappa - s_t)
    sigma = hermitize(rho + delta + kt)
    lam = np.linalg.eigvalsh(sigma)
    if check:
        if lam[0] <= tol.rank * lam[-1]:
            raise ConsistencyError(f"extension is not faithful (min eigenvalue {lam[0]:.3e})")
        ok, r, _ = modular_invariance_residual(A, sigma, tol)
        if not ok:
            raise ConsistencyError(f"sigma A sigma^-1 escapes A (residual {r:.3e})")
    return FaithfulExtension(sigma, delta, kt, tuple(F), s, s_t)


def conditional_expectation(A, rho, tol=DEFAULT_TOL, check=True):
    """Conditional expectation onto ``A`` preserving ``Re Tr rho B``.

    ``alpha(B) = s0^{-1/2} Pi(sigma^{1/2} B sigma^{1/2}) s0^{-1/2}`` with
    ``s0 = Pi(sigma)``, where ``sigma`` is ``rho`` itself when faithful and
    the faithful extension otherwise.  With ``check=False`` the map is
    built without testing modular invariance (it is then not guaranteed to
    have any of the properties).
    """
    ext = faithful_extension(A, rho, tol, check=check)
    sigma = ext.sigma
    Pi = A.projector()
    s0 = hermitize(A.project(sigma))
    sh = psd_sqrt(sigma, tol.rank)
    s0m = psd_inv_sqrt(s0, tol.rank)
    return Superoperator.sandwich(s0m, s0m) @ Pi @ Superoperator.sandwich(sh, sh)


# ------------------------------------------------------ minimal algebras

def minimal_sufficient_star(m, scalars="real", tol=DEFAULT_TOL):
    """Smallest modular-invariant *-algebra containing the likelihood ratios."""
    R = likelihood_ratio_set(m, tol)
    Delta = modular_superop(m.rho, tol.rank)
    A = generate_star(R, scalars=scalars, extra_maps=[Delta], dim=m.dim, tol=tol.span)
    ok, r, _ = modular_invariance_residual(A, m.rho, tol)
    if not ok:
        raise ConsistencyError(f"generated algebra not modular invariant ({r:.3e})")
    return A


@dataclass(frozen=True)
class JordanResult:
    algebra: RealSubspace
    rho0: np.ndarray
    star_algebra: RealSubspace
    beta_R: Superoperator
    beta_J: Superoperator
    sufficiency_residual: float


def minimal_sufficient_jordan(m, tol=DEFAULT_TOL):
    """Jordan algebra generated by the likelihood ratios and ``Pi_R(rho)``.

    Sufficiency is witnessed by ``beta_J = Pi_J o beta_R`` with ``beta_R``
    the conditional expectation onto the minimal sufficient *-algebra.
    """
    AR = minimal_sufficient_star(m, "real", tol)
    rho0 = hermitize(AR.project(m.rho))
    R = likelihood_ratio_set(m, tol)
    AJ = generate_jordan(list(R) + [rho0], dim=m.dim, tol=tol.span)
    beta_R = conditional_expectation(AR, m.rho, tol)
    beta_J = AJ.projector() @ beta_R
    _, res = verify_sufficient(m, beta_J)
    return JordanResult(AJ, rho0, AR, beta_R, beta_J, res)


# ------------------------------------------------------------ pipeline

@dataclass
class SufficiencyCertificate:
    alpha: Superoperator
    A_J: RealSubspace
    A_R: RealSubspace
    A_C: RealSubspace
    beta_J: Superoperator
    beta_R: Superoperator
    beta_C: Superoperator
    omega: np.ndarray
    rho0: np.ndarray
    residuals: ResidualTable = field(default_factory=ResidualTable)
    method: str = "spectral"

    @property
    def valid(self):
        return self.residuals.passed


def fixed_point_projection(Mh, method="spectral", max_iter=10_000, step_tol=1e-12,
                           null_tol=1e-9):
    """Projection onto the eigenvalue-1 space of ``T = (I + Mh)/2`` along the rest.

    ``method="spectral"`` uses right and left null spaces of ``T - I``;
    ``method="power"`` iterates ``T^k`` until successive powers agree.
    Returns ``(P, right_null_basis, iterations)``.
    """
    n = Mh.shape[0]
    T = 0.5 * (np.eye(n) + Mh)
    if method == "spectral":
        NR = null_space(T - np.eye(n), null_tol)
        NL = null_space((T - np.eye(n)).T, null_tol)
        if NR.shape[1] != NL.shape[1]:
            raise ConsistencyError("left and right fixed spaces differ in dimension")
        P = NR @ np.linalg.solve(NL.T @ NR, NL.T)
        return P, NR, 0
    if method == "power":
        P = T.copy()
        for it in range(1, max_iter + 1):
            nxt = P @ T
            if np.max(np.abs(nxt - P)) < step_tol:
                P = nxt
                break
            P = nxt
        U, s, _ = np.linalg.svd(P)
        r = int(np.sum(s > 0.5))
        return P, U[:, :r], it
    raise InputError(f"unknown fixed-point method {method!r}")


def _herm_ops_from_coords(C, d):
    H = herm_basis(d)
    return np.tensordot(C, H, axes=(0, 0))


def _precheck_map(m, alpha, rng, tol):
    ok, r = verify_sufficient(m, alpha)
    if not ok:
        raise NotSufficientError(f"map is not sufficient for the model (residual {r:.3e})")
    p = positivity_residual(alpha, rng)
    if p > tol.psd:
        raise NotSufficientError(f"map is not positive (violation {p:.3e})")
    u = unitality_residual(alpha)
    if u > tol.member:
        raise NotSufficientError(f"map is not unital (residual {u:.3e})")
    h = alpha.hermiticity_residual()
    if h > tol.member:
        raise NotSufficientError(f"map does not preserve Hermiticity (residual {h:.3e})")


def fixed_point_pipeline(m, alpha, tol=DEFAULT_TOL, method="spectral", seed=0,
                         cross_check=True):
    """Build a :class:`SufficiencyCertificate` from a sufficient positive unital map."""
    rng = np.random.default_rng(seed)
    d = m.dim
    _precheck_map(m, alpha, rng, tol)
    Mh = alpha.hermitian_action()
    P, NR, _ = fixed_point_projection(Mh, method)
    Hb = herm_basis(d)
    H = ops_to_vecs(Hb)
    A_J = RealSubspace(d, NR.T @ H)
    beta_J = Superoperator.from_hermitian_action(d, P)
    hI = H @ op_to_vec(np.eye(d))
    omega = hermitize(_herm_ops_from_coords(P.T @ hI, d))
    A_R = generate_star(list(A_J.basis), "real", dim=d, tol=tol.span)
    A_C = generate_star(list(A_J.basis), "complex", dim=d, tol=tol.span)
    wh = psd_sqrt(omega, tol.rank)
    sand = Superoperator.sandwich(wh, wh)
    beta_R = A_R.projector() @ sand
    beta_C = A_C.projector() @ sand
    rho0 = hermitize(A_R.project(m.rho))
    cert = SufficiencyCertificate(alpha, A_J, A_R, A_C, beta_J, beta_R, beta_C,
                                  omega, rho0, method=method)
    cert.residuals = certificate_residuals(cert, m, rng, tol)
    if cross_check:
        other = "power" if method == "spectral" else "spectral"
        P2, _, _ = fixed_point_projection(Mh, other)
        cert.residuals.add("beta_J:spectral_vs_power", float(np.max(np.abs(P - P2))), 1e-8)
    return cert


def certificate_residuals(cert, m, rng=None, tol=DEFAULT_TOL):
    """Every invariant of a certificate as a residual table."""
    rng = rng if rng is not None else np.random.default_rng(0)
    t = ResidualTable()
    d = m.dim
    I = np.eye(d)
    w = cert.omega
    lam = np.linalg.eigvalsh(w)
    t.add_min("omega:min_eigenvalue", lam[0], tol.rank)
    comm = max((fro(w @ a - a @ w) for a in cert.A_C.basis), default=0.0)
    t.add("omega:commutes_with_A_C", comm, SUFF_TOL)
    for name, A in (("J", cert.A_J), ("R", cert.A_R), ("C", cert.A_C)):
        t.add(f"omega:projection_{name}_is_identity", fro(A.project(w) - I), tol.member)
    winv = geninv(w, tol.rank)
    for e in m.elements:
        X0 = e.X @ winv
        ok, r = member(cert.A_J, X0, tol.member)
        t.add(f"omega:X_omega_inv_in_A_J[{e.label}]", r, tol.member * (1 + fro(X0)))
        t.add(f"omega:commutes_with_X[{e.label}]", fro(w @ e.X - e.X @ w),
              tol.member * (1 + fro(e.X)))
    bJ = cert.beta_J
    t.add("beta_J:idempotent", float(np.max(np.abs(bJ.matrix @ bJ.matrix - bJ.matrix))), SUFF_TOL)
    fixed = max((fro(bJ(a) - a) for a in cert.A_J.basis), default=0.0)
    t.add("beta_J:fixes_A_J", fixed, SUFF_TOL)
    t.add("beta_J:positive", positivity_residual(bJ, rng), tol.psd)
    t.add("beta_J:range_in_A_J", range_residual(bJ, cert.A_J, hermitian_inputs=True), tol.member)
    # Tr omega B = Tr omega beta_J(B) on Hermitian B
    H = ops_to_vecs(herm_basis(d))
    wv = H @ op_to_vec(w)
    Ph = bJ.hermitian_action()
    t.add("omega:trace_invariance", float(np.max(np.abs(wv - Ph.T @ wv))), SUFF_TOL * (1 + fro(w)))
    # faithfulness: ||beta_J(B)|| >= lambda_min(omega) Tr B / ||omega||
    ratio = min(fro(bJ(B)) / np.trace(B).real for B in (_random_psd(d, rng) for _ in range(SAMPLES)))
    t.add_min("beta_J:faithful_ratio", ratio, lam[0] / fro(w) * (1 - 1e-9))
    t.add("alpha:norm_one", _norm_excess(cert.alpha, rng), 1e-9)
    t.add("alpha:sufficient", verify_sufficient(m, cert.alpha)[1], SUFF_TOL)
    t.add("beta_J:sufficient", verify_sufficient(m, bJ)[1], SUFF_TOL)
    ops_w = list(m.operators) + [w]
    scale = 1 + max(fro(X) for X in ops_w)
    t.add("beta_R:sufficient_with_omega", sufficiency_residual(ops_w, cert.beta_R), SUFF_TOL * scale)
    t.add("beta_C:sufficient_with_omega", sufficiency_residual(ops_w, cert.beta_C), SUFF_TOL * scale)
    t.add("beta_R:bimodule", bimodule_residual(cert.beta_R, cert.A_R), SUFF_TOL * scale)
    t.add("beta_C:bimodule", bimodule_residual(cert.beta_C, cert.A_C), SUFF_TOL * scale)
    t.add("beta_C:complex_linear", cert.beta_C.complex_linearity_residual(), tol.member)
    jl1, jl2 = jordan_ce_residuals(bJ, cert.A_J, rng)
    t.add("beta_J:jordan_bimodule", jl1, SUFF_TOL)
    t.add("beta_J:jordan_sandwich", jl2, SUFF_TOL)
    return t


def _norm_excess(alpha, rng, samples=SAMPLES):
    """``max(||alpha(B)||_op / ||B||_op) - 1`` over random Hermitian B, and |alpha(I)| - 1."""
    d = alpha.dim
    worst = abs(np.max(np.abs(np.linalg.eigvalsh(hermitize(alpha(np.eye(d)))))) - 1.0)
    for _ in range(samples):
        B = _random_herm(d, rng)
        nb = np.max(np.abs(np.linalg.eigvalsh(B)))
        na = np.max(np.abs(np.linalg.eigvalsh(hermitize(alpha(B)))))
        worst = max(worst, na / nb - 1.0)
    return float(max(worst, 0.0))


def jordan_ce_residuals(beta, AJ, rng, samples=10):
    """Worst residuals of ``beta(a o B) = a o beta(B)`` and ``beta(aBa) = a beta(B) a``."""
    d = beta.dim
    w1 = w2 = 0.0
    for _ in range(samples):
        B = _random_herm(d, rng)
        bB = beta(B)
        for a in AJ.basis:
            w1 = max(w1, fro(beta(jordan(a, B)) - jordan(a, bB)))
            w2 = max(w2, fro(beta(a @ B @ a) - a @ bB @ a))
    return w1, w2


def likelihood_in_algebra_check(cert, m, tol=DEFAULT_TOL):
    """Membership of every likelihood ratio in ``A_J``, via the omega formulas.

    For each element, ``X0 = X omega^-1`` and ``rho0 = rho omega^-1`` give
    ``R_X = X0^{1/2} (X0^{1/2} rho0 X0^{1/2})^{-1/2} X0^{1/2}`` (state) or
    ``L_X = J_{rho0}^{-1}(X0)`` (derivative).  The table records both the
    membership residual and the agreement with the direct computation.
    """
    t = ResidualTable()
    winv = geninv(cert.omega, tol.rank)
    rho_w = hermitize(m.rho @ winv)
    for e in m.elements:
        X0 = hermitize(e.X @ winv)
        if e.kind == STATE:
            R = sqrt_likelihood_ratio(X0, rho_w, tol)
            direct = sqrt_likelihood_ratio(e.X, m.rho, tol)
        else:
            R = sld(X0, rho_w, tol)
            direct = sld(e.X, m.rho, tol)
        _, r = member(cert.A_J, R, tol.member)
        t.add(f"ratio_in_A_J[{e.label}]", r, tol.member * (1 + fro(R)))
        t.add(f"ratio_formula_agrees[{e.label}]", fro(R - direct), tol.recon * (1 + fro(direct)))
    if m.is_mixed:
        t.add_flag("model_is_mixed", True, 1.0)
    return t


def ratio_membership(A, m, tol=DEFAULT_TOL):
    """Membership residuals of the directly computed likelihood ratios in ``A``."""
    t = ResidualTable()
    for e, R in zip(m.elements, likelihood_ratio_set(m, tol)):
        _, r = member(A, R, tol.member)
        t.add(f"ratio_in_algebra[{e.label}]", r, tol.member * (1 + fro(R)))
    return t
