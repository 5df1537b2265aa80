"""Statistical models and the superoperators built from a reference state.

A model is a reference density ``rho`` together with tagged Hermitian
elements: ``state`` elements (PSD operators absolutely continuous with
respect to ``rho``) and ``derivative`` elements (tangent directions).
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InputError, NotAbsolutelyContinuousError, NotInRangeError
from .matcore import (
    DEFAULT_TOL,
    as_op,
    check_hermitian,
    check_psd,
    fro,
    geninv,
    herm_basis,
    herm_eig,
    ops_to_vecs,
    psd_inv_sqrt,
    psd_sqrt,
    vec_to_op,
    op_to_vec,
)

STATE = "state"
DERIVATIVE = "derivative"
KINDS = (STATE, DERIVATIVE)


# ------------------------------------------------------------ superoperators

def _real_form(K):
    """Real (2n x 2n) matrix of a complex-linear map given by ``K`` (n x n)."""
    return np.block([[K.real, -K.imag], [K.imag, K.real]])


class Superoperator:
    """Real-linear map on ``d x d`` complex matrices.

    Stored as a ``(2 d^2) x (2 d^2)`` real matrix acting on the real
    coordinates ``concat(Re B.ravel(), Im B.ravel())``.
    """

    __slots__ = ("dim", "matrix")

    def __init__(self, dim, matrix):
        matrix = np.asarray(matrix, dtype=float)
        n = 2 * dim * dim
        if matrix.shape != (n, n):
            raise InputError(f"superoperator matrix must be {n}x{n}, got {matrix.shape}")
        self.dim = dim
        self.matrix = matrix

    # constructors
    @classmethod
    def identity(cls, dim):
        return cls(dim, np.eye(2 * dim * dim))

    @classmethod
    def from_complex_matrix(cls, dim, K):
        """Complex-linear map with row-major vectorised matrix ``K``."""
        return cls(dim, _real_form(np.asarray(K, dtype=complex)))

    @classmethod
    def sandwich(cls, X, Y):
        """The map ``B -> X B Y``."""
        X = np.asarray(X, dtype=complex)
        Y = np.asarray(Y, dtype=complex)
        return cls.from_complex_matrix(X.shape[0], np.kron(X, Y.T))

    @classmethod
    def from_function(cls, dim, f):
        """Tabulate a real-linear function on the real coordinate basis."""
        n = 2 * dim * dim
        cols = np.empty((n, n))
        e = np.zeros(n)
        for k in range(n):
            e[k] = 1.0
            cols[:, k] = op_to_vec(f(vec_to_op(e, dim)))
            e[k] = 0.0
        return cls(dim, cols)

    @classmethod
    def from_hermitian_action(cls, dim, Mh):
        """Extend a map on Hermitian coordinates complex-linearly.

        ``Mh`` acts on coordinates in the :func:`herm_basis` ordering; the
        result sends ``H1 + i H2`` to ``f(H1) + i f(H2)``.
        """
        H = ops_to_vecs(herm_basis(dim))
        n = dim * dim
        J = np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])
        P = H.T @ Mh @ H
        return cls(dim, P - J @ P @ J)

    # action
    def __call__(self, B):
        B = np.asarray(B, dtype=complex)
        return vec_to_op(self.matrix @ op_to_vec(B), self.dim)

    def apply_many(self, ops):
        ops = np.asarray(ops, dtype=complex)
        V = ops_to_vecs(ops) @ self.matrix.T
        n = self.dim * self.dim
        return (V[:, :n] + 1j * V[:, n:]).reshape(-1, self.dim, self.dim)

    # algebra of maps
    def __matmul__(self, other):
        return Superoperator(self.dim, self.matrix @ other.matrix)

    def __add__(self, other):
        return Superoperator(self.dim, self.matrix + other.matrix)

    def __sub__(self, other):
        return Superoperator(self.dim, self.matrix - other.matrix)

    def __mul__(self, c):
        return Superoperator(self.dim, float(c) * self.matrix)

    __rmul__ = __mul__

    def adjoint(self):
        """Adjoint with respect to the real Hilbert-Schmidt inner product."""
        return Superoperator(self.dim, self.matrix.T.copy())

    def hermitian_action(self):
        """Matrix of the map restricted to Hermitian operators (``d^2 x d^2``).

        Only meaningful when the map preserves Hermiticity.
        """
        H = ops_to_vecs(herm_basis(self.dim))
        return H @ self.matrix @ H.T

    def hermiticity_residual(self):
        """How far the map is from sending Hermitian operators to Hermitian ones."""
        H = ops_to_vecs(herm_basis(self.dim))
        img = self.matrix @ H.T
        return float(np.linalg.norm(img - H.T @ (H @ img)))

    def complex_linearity_residual(self):
        n = self.dim * self.dim
        J = np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])
        return float(np.linalg.norm(self.matrix @ J - J @ self.matrix))

    def __repr__(self):
        return f"Superoperator(dim={self.dim})"


def modular_superop(rho, rank_tol=DEFAULT_TOL.rank):
    """The map ``B -> rho B rho^+`` (generalized inverse on the kernel)."""
    rho = check_psd(rho, what="reference")
    return Superoperator.sandwich(rho, geninv(rho, rank_tol))


def jordan_multiplication(rho):
    """``J_rho(Z) = (rho Z + Z rho) / 2``."""
    rho = as_op(rho)
    I = np.eye(rho.shape[0])
    return 0.5 * (Superoperator.sandwich(rho, I) + Superoperator.sandwich(I, rho))


def _eigenbasis_multiplier(rho, coeff, rank_tol):
    p, U = herm_eig(rho)
    scale = np.max(np.abs(p)) if p.size else 0.0
    p = np.where(p > rank_tol * scale, p, 0.0)
    C = coeff(p[:, None], p[None, :])
    # vec(U B' U*) = (U kron conj U) vec(B')
    W = np.kron(U, U.conj())
    K = W @ (C.ravel()[:, None] * W.conj().T)
    return Superoperator.from_complex_matrix(rho.shape[0], K)


def d_tilde(rho, rank_tol=DEFAULT_TOL.rank):
    """``(L - R)/(L + R)`` for left/right multiplication by ``rho``.

    In the eigenbasis of ``rho`` the matrix unit ``|i><j|`` is scaled by
    ``(p_i - p_j)/(p_i + p_j)``, and by zero when both eigenvalues vanish.
    """
    rho = check_psd(rho, what="reference")

    def coeff(pi, pj):
        s = pi + pj
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, (pi - pj) / np.where(s > 0, s, 1.0), 0.0)

    return _eigenbasis_multiplier(rho, coeff, rank_tol)


def d_op(rho, rank_tol=DEFAULT_TOL.rank):
    """``i`` times :func:`d_tilde`."""
    D = d_tilde(rho, rank_tol)
    d = D.dim
    n = d * d
    J = np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])
    return Superoperator(d, J @ D.matrix)


# ------------------------------------------------------------ likelihood ratios

def sqrt_likelihood_ratio(X, rho, tol=DEFAULT_TOL):
    """Minimal-norm PSD solution ``R`` of ``R rho R = X``.

    ``R = X^{1/2} (X^{1/2} rho X^{1/2})^{-1/2} X^{1/2}`` with generalized
    inverses.  Raises :class:`NotAbsolutelyContinuousError` when the
    reconstruction misses ``X``.
    """
    X = check_psd(X, tol.psd, what="state element")
    rho = check_psd(rho, tol.psd, what="reference")
    Xh = psd_sqrt(X, tol.rank)
    M = Xh @ rho @ Xh
    R = Xh @ psd_inv_sqrt(0.5 * (M + M.conj().T), tol.rank) @ Xh
    R = 0.5 * (R + R.conj().T)
    res = fro(R @ rho @ R - X)
    if res > tol.recon * (1.0 + fro(X)):
        raise NotAbsolutelyContinuousError(
            f"X is not absolutely continuous with respect to rho (residual {res:.3e})")
    return R


def sld(X, rho, tol=DEFAULT_TOL):
    """Minimal-norm Hermitian solution ``L`` of ``(L rho + rho L)/2 = X``."""
    X = check_hermitian(X, tol.hermitian)
    rho = check_psd(rho, tol.psd, what="reference")
    p, U = herm_eig(rho)
    scale = np.max(np.abs(p)) if p.size else 0.0
    p = np.where(p > tol.rank * scale, p, 0.0)
    s = p[:, None] + p[None, :]
    Xe = U.conj().T @ X @ U
    with np.errstate(divide="ignore", invalid="ignore"):
        Le = np.where(s > 0, 2.0 * Xe / np.where(s > 0, s, 1.0), 0.0)
    L = U @ Le @ U.conj().T
    L = 0.5 * (L + L.conj().T)
    res = fro(0.5 * (L @ rho + rho @ L) - X)
    if res > tol.recon * (1.0 + fro(X)):
        raise NotInRangeError(f"X not in range of J_rho (residual {res:.3e})")
    return L


# ------------------------------------------------------------------- models

@dataclass(frozen=True)
class ModelElement:
    kind: str
    X: np.ndarray
    label: str = ""


@dataclass(frozen=True)
class Model:
    """Reference state plus tagged elements.

    ``isometry`` maps the (restricted) model space into the ambient space it
    came from; it is the identity for unrestricted models.
    """

    rho: np.ndarray
    elements: tuple
    restricted: bool = False
    isometry: np.ndarray = field(default=None, repr=False)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        d = self.rho.shape[0]
        if not self.elements:
            raise InputError("model has no elements")
        for e in self.elements:
            if e.kind not in KINDS:
                raise InputError(f"unknown element kind {e.kind!r}")
            if e.X.shape != (d, d):
                raise InputError(f"element {e.label!r} has shape {e.X.shape}, expected {(d, d)}")
        if self.reference_index is None:
            raise InputError("reference state must appear among the model elements")
        if self.isometry is None:
            object.__setattr__(self, "isometry", np.eye(d, dtype=complex))

    @property
    def dim(self):
        return self.rho.shape[0]

    @property
    def reference_index(self):
        scale = 1.0 + fro(self.rho)
        for i, e in enumerate(self.elements):
            if e.kind == STATE and fro(e.X - self.rho) <= 1e-12 * scale:
                return i
        return None

    @property
    def kinds(self):
        return sorted({e.kind for e in self.elements})

    @property
    def is_mixed(self):
        """True when non-reference elements include both kinds."""
        ref = self.reference_index
        kinds = {e.kind for i, e in enumerate(self.elements) if i != ref}
        return len(kinds) > 1

    @property
    def operators(self):
        return [e.X for e in self.elements]

    @property
    def labels(self):
        return [e.label for e in self.elements]


def make_model(rho, states=(), derivatives=(), state_labels=None, deriv_labels=None,
               tol=DEFAULT_TOL, metadata=None):
    """Build a validated model; the reference is always the first element."""
    rho = check_psd(rho, tol.psd, what="reference")
    elems = [ModelElement(STATE, rho, "rho")]
    state_labels = state_labels or [f"state{i}" for i in range(len(states))]
    deriv_labels = deriv_labels or [f"deriv{i}" for i in range(len(derivatives))]
    for lab, X in zip(state_labels, states):
        elems.append(ModelElement(STATE, check_psd(X, tol.psd, what=f"state {lab}"), lab))
    for lab, X in zip(deriv_labels, derivatives):
        elems.append(ModelElement(DERIVATIVE, check_hermitian(X, tol.hermitian), lab))
    return Model(rho=rho, elements=tuple(elems), metadata=dict(metadata or {}))


def joint_support_isometry(ops, rank_tol=DEFAULT_TOL.rank):
    """Isometry onto the joint column space of Hermitian operators.

    The support of ``sum X_i^2`` is used.  The basis is taken from a
    column-pivoted QR of the support projection so that coordinate-aligned
    supports produce coordinate vectors.
    """
    S = sum(X @ X for X in ops)
    S = 0.5 * (S + S.conj().T)
    lam, U = herm_eig(S)
    scale = lam[0] if lam.size else 0.0
    if scale <= 0.0:
        raise InputError("all model elements vanish; H_S is empty")
    r = int(np.sum(lam > rank_tol * scale))
    d = S.shape[0]
    if r == d:
        return np.eye(d, dtype=complex)
    P = U[:, :r] @ U[:, :r].conj().T
    Q, R, _ = sla.qr(P, pivoting=True)
    V = Q[:, :r]
    # fix phases: make the largest-modulus entry of each column real positive
    for j in range(r):
        k = int(np.argmax(np.abs(V[:, j])))
        V[:, j] *= np.conj(V[k, j]) / abs(V[k, j])
    return V


def restrict_to_HS(m, tol=DEFAULT_TOL):
    """Compress the model onto the joint column space of its elements."""
    if m.restricted:
        raise InputError("model is already restricted")
    V = joint_support_isometry(m.operators, tol.rank)
    Vh = V.conj().T

    def comp(X):
        Y = Vh @ X @ V
        return 0.5 * (Y + Y.conj().T)

    elems = tuple(ModelElement(e.kind, comp(e.X), e.label) for e in m.elements)
    return Model(rho=comp(m.rho), elements=elems, restricted=True,
                 isometry=m.isometry @ V, metadata=dict(m.metadata))


def element_ratio(e, rho, tol=DEFAULT_TOL):
    if e.kind == STATE:
        return sqrt_likelihood_ratio(e.X, rho, tol)
    return sld(e.X, rho, tol)


def likelihood_ratio_set(m, tol=DEFAULT_TOL):
    """``R_X`` for state elements and ``L_X`` for derivatives, in element order."""
    return [element_ratio(e, m.rho, tol) for e in m.elements]
