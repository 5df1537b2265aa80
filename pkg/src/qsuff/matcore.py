"""Dense complex matrix kernel.

Hermitian eigendecomposition, spectral matrix functions, generalized
inverses and support projections, the real Hilbert-Schmidt geometry
``<A, B> = Re Tr A* B``, and canonical generators (Pauli matrices,
quaternion embedding, spin factors).

Operators are plain ``numpy`` complex arrays.  For real-linear algebra an
operator ``A`` on ``C^d`` is identified with the real vector
``concat(Re A.ravel(), Im A.ravel())`` of length ``2 d^2``; under this
identification the real Hilbert-Schmidt inner product is the dot product.
"""
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import InputError, NotHermitianError, NotPSDError


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the package.

    ``rank`` and ``psd`` are relative to the largest eigenvalue magnitude;
    ``hermitian``, ``recon`` and ``member`` are relative to ``1 + ||A||_F``.
    """

    hermitian: float = 1e-12
    eig: float = 1e-12
    rank: float = 1e-10
    psd: float = 1e-10
    recon: float = 1e-8
    ortho: float = 1e-10
    member: float = 1e-8
    span: float = 1e-10
    faithful: float = 1e-8
    struct: float = 1e-7
    fisher_floor: float = 1e-12

    def as_dict(self):
        return asdict(self)

    def replace(self, **changes):
        return replace(self, **changes)


DEFAULT_TOL = Tolerances()

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


# ---------------------------------------------------------------- validation

def as_op(A, dim=None):
    """Return ``A`` as a finite square complex array, validating shape."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"operator must be square, got shape {A.shape}")
    if dim is not None and A.shape[0] != dim:
        raise InputError(f"operator has dimension {A.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(A)):
        raise InputError("operator has non-finite entries")
    return A


def fro(A):
    return float(np.linalg.norm(A))


def hermitian_residual(A):
    return fro(A - A.conj().T)


def is_hermitian(A, tol=DEFAULT_TOL.hermitian):
    return hermitian_residual(A) <= tol * (1.0 + fro(A))


def hermitize(A):
    return 0.5 * (A + A.conj().T)


def check_hermitian(A, tol=DEFAULT_TOL.hermitian):
    """Validate ``A`` as Hermitian within ``tol`` and return its Hermitian part."""
    A = as_op(A)
    if not is_hermitian(A, tol):
        raise NotHermitianError(
            f"operator is not Hermitian: ||A - A*|| = {hermitian_residual(A):.3e}")
    return hermitize(A)


# -------------------------------------------------------------- inner product

def hs_inner(A, B):
    """Real Hilbert-Schmidt inner product ``Re Tr A* B``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise InputError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return float(np.real(np.vdot(A, B)))


def op_to_vec(A):
    A = np.asarray(A)
    return np.concatenate([A.real.ravel(), A.imag.ravel()])


def ops_to_vecs(ops):
    ops = np.asarray(ops, dtype=complex)
    k = ops.shape[0]
    return np.hstack([ops.real.reshape(k, -1), ops.imag.reshape(k, -1)])


def vec_to_op(v, d):
    n = d * d
    return (v[:n] + 1j * v[n:]).reshape(d, d)


def vecs_to_ops(V, d):
    V = np.asarray(V, dtype=float)
    n = d * d
    return (V[:, :n] + 1j * V[:, n:]).reshape(-1, d, d)


def herm_basis(d):
    """Orthonormal basis (real HS product) of the d x d Hermitian matrices."""
    out = []
    for i in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[i, i] = 1.0
        out.append(E)
    s = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = E[j, i] = s
            out.append(E)
            F = np.zeros((d, d), dtype=complex)
            F[i, j], F[j, i] = 1j * s, -1j * s
            out.append(F)
    return np.array(out)


# ---------------------------------------------------------------- spectral

def herm_eig(A, tol=DEFAULT_TOL.hermitian):
    """Eigendecomposition of a Hermitian operator, eigenvalues descending.

    Returns ``(lam, U)`` with ``A = U diag(lam) U*``.
    """
    A = check_hermitian(A, tol)
    lam, U = np.linalg.eigh(A)
    return lam[::-1].copy(), U[:, ::-1].copy()


def _kernel_mask(lam, rank_tol):
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    if scale == 0.0:
        return np.zeros(lam.shape, dtype=bool)
    return np.abs(lam) > rank_tol * scale


def matfun(A, f, on_kernel="zero", rank_tol=DEFAULT_TOL.rank):
    """Apply a scalar function to the spectrum of a Hermitian operator.

    Eigenvalues with ``|lam| <= rank_tol * max|lam|`` form the numerical
    kernel.  With ``on_kernel="zero"`` the result vanishes there (the
    generalized-inverse convention); with ``on_kernel="identity"`` it acts
    as the identity there; ``on_kernel="apply"`` evaluates ``f`` on the
    whole spectrum.
    """
    lam, U = herm_eig(A)
    keep = _kernel_mask(lam, rank_tol)
    vals = np.zeros_like(lam)
    if on_kernel == "apply":
        keep = np.ones_like(keep)
    elif on_kernel == "identity":
        vals[~keep] = 1.0
    elif on_kernel != "zero":
        raise InputError(f"unknown on_kernel mode {on_kernel!r}")
    if np.any(keep):
        with np.errstate(all="ignore"):
            fv = np.asarray(f(lam[keep]), dtype=float)
        if not np.all(np.isfinite(fv)):
            raise InputError("function undefined on a retained eigenvalue")
        vals[keep] = fv
    return (U * vals) @ U.conj().T


def is_psd(A, tol=DEFAULT_TOL.psd):
    lam = np.linalg.eigvalsh(hermitize(np.asarray(A, dtype=complex)))
    scale = max(np.max(np.abs(lam)), 0.0) if lam.size else 0.0
    return bool(lam.size == 0 or lam[0] >= -tol * max(scale, 1e-300))


def check_psd(A, tol=DEFAULT_TOL.psd, what="operator"):
    A = check_hermitian(A)
    lam = np.linalg.eigvalsh(A)
    scale = np.max(np.abs(lam))
    if lam[0] < -tol * scale:
        raise NotPSDError(f"{what} not PSD: min eigenvalue {lam[0]:.3e}")
    return A


def _psd_fun(A, f, rank_tol):
    # f applied on eigenvalues above the relative rank threshold, zero elsewhere
    lam, U = herm_eig(A)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    keep = lam > rank_tol * scale if scale > 0 else np.zeros(lam.shape, bool)
    vals = np.zeros_like(lam)
    vals[keep] = f(lam[keep])
    return (U * vals) @ U.conj().T


def geninv(A, rank_tol=DEFAULT_TOL.rank):
    """Moore-Penrose inverse of a Hermitian operator."""
    return matfun(A, lambda t: 1.0 / t, "zero", rank_tol)


def psd_sqrt(A, rank_tol=DEFAULT_TOL.rank):
    return _psd_fun(A, np.sqrt, rank_tol)


def psd_inv_sqrt(A, rank_tol=DEFAULT_TOL.rank):
    """Generalized inverse square root: zero on the numerical kernel."""
    return _psd_fun(A, lambda t: 1.0 / np.sqrt(t), rank_tol)


def support_proj(A, rank_tol=DEFAULT_TOL.rank, psd_tol=DEFAULT_TOL.psd):
    """Orthogonal projection onto the support of a PSD operator."""
    A = check_psd(A, psd_tol)
    return _psd_fun(A, np.ones_like, rank_tol)


def numerical_rank(A, rank_tol=DEFAULT_TOL.rank):
    lam = np.linalg.eigvalsh(hermitize(np.asarray(A, dtype=complex)))
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    return int(np.sum(lam > rank_tol * scale)) if scale > 0 else 0


def range_basis(A, rank_tol=DEFAULT_TOL.rank):
    """Orthonormal columns spanning the range of an arbitrary matrix."""
    U, s, _ = np.linalg.svd(np.asarray(A, dtype=complex))
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0]
    return U[:, : int(np.sum(s > rank_tol * s[0]))]


def null_space(M, rel_tol=1e-10):
    """Orthonormal basis (columns) of the null space of ``M``."""
    M = np.asarray(M)
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n, dtype=M.dtype)
    _, s, Vh = np.linalg.svd(M)
    scale = s[0] if s.size else 0.0
    r = int(np.sum(s > rel_tol * max(scale, 1.0)))
    return Vh[r:].conj().T


def cluster_sorted(vals, gap):
    """Group a descending array into runs whose consecutive gaps are <= ``gap``.

    Returns a list of index arrays.
    """
    groups, cur = [], [0]
    for i in range(1, len(vals)):
        if abs(vals[i - 1] - vals[i]) > gap:
            groups.append(np.array(cur))
            cur = []
        cur.append(i)
    if len(vals):
        groups.append(np.array(cur))
    return groups


# ------------------------------------------------------------- products

def jordan(A, B):
    """Jordan product ``(AB + BA) / 2``; broadcasts over leading axes."""
    return 0.5 * (A @ B + B @ A)


def commutator(A, B):
    return A @ B - B @ A


def dagger(A):
    return np.swapaxes(np.conj(A), -1, -2)


# ------------------------------------------------------------ quaternions

def quaternion_mul(p, q):
    """Quaternion product in the convention realised by :func:`quaternion_embed`.

    Components are ``(w, x, y, z)``; the units satisfy ``i^2 = j^2 = k^2 = -1``
    and ``i j = -k`` (the mirror of Hamilton's table), which is the product
    that the Pauli-block embedding carries to matrix multiplication.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    w1, x1, y1, z1 = np.moveaxis(p, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q, -1, 0)
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 - y1 * z2 + z1 * y2,
        w1 * y2 + y1 * w2 - z1 * x2 + x1 * z2,
        w1 * z2 + z1 * w2 - x1 * y2 + y1 * x2,
    ], axis=-1)


def quaternion_conj(q):
    q = np.array(q, dtype=float)
    q[..., 1:] *= -1.0
    return q


def quaternion_matmul(A, B):
    """Product of quaternion matrices stored as ``(n, k, 4)`` and ``(k, m, 4)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return quaternion_mul(A[:, :, None, :], B[None, :, :, :]).sum(axis=1)


def quaternion_embed(W):
    """Complex ``2n x 2n`` realisation of an ``n x n`` quaternion matrix.

    ``W`` has shape ``(n, n, 4)`` (or ``(4,)`` for a single quaternion); the
    entry ``(w, x, y, z)`` becomes ``w I + i (x sx + y sy + z sz)``.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W.reshape(1, 1, 4)
    if W.ndim != 3 or W.shape[0] != W.shape[1] or W.shape[2] != 4:
        raise InputError(f"quaternion matrix must have shape (n, n, 4), got {W.shape}")
    n = W.shape[0]
    blocks = (W[..., 0, None, None] * I2
              + 1j * (W[..., 1, None, None] * SIGMA_X
                      + W[..., 2, None, None] * SIGMA_Y
                      + W[..., 3, None, None] * SIGMA_Z))
    return blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


# ------------------------------------------------------------ spin factors

@dataclass(frozen=True)
class SpinFactorGenerators:
    """``n`` Hermitian matrices with ``g_i o g_j = delta_ij I``."""

    n: int
    gammas: tuple

    @property
    def dim(self):
        return self.gammas[0].shape[0] if self.gammas else 1

    def anticommutation_residual(self):
        d = self.dim
        worst = 0.0
        for i, gi in enumerate(self.gammas):
            for j, gj in enumerate(self.gammas):
                target = np.eye(d) if i == j else 0.0
                worst = max(worst, fro(jordan(gi, gj) - target))
        return worst


def spin_factor(n):
    """Generators of the spin factor of index ``n`` on ``C^(2^floor(n/2))``.

    ``n = 1, 2, 3`` use ``(1)``, ``(sx, sz)`` and the Pauli matrices; larger
    ``n`` use the block recursion from ``n - 2``:
    ``[[0, g], [g, 0]]`` for each old ``g``, then ``diag(I, -I)`` and
    ``[[0, -iI], [iI, 0]]``.
    """
    if n < 1:
        raise InputError("spin factor index must be >= 1")
    if n == 1:
        gam = [np.ones((1, 1), dtype=complex)]
    elif n == 2:
        gam = [SIGMA_X.copy(), SIGMA_Z.copy()]
    elif n == 3:
        gam = [P.copy() for P in PAULI]
    else:
        prev = spin_factor(n - 2).gammas
        k = prev[0].shape[0]
        Ik = np.eye(k)
        gam = [np.kron(SIGMA_X, g) for g in prev]
        gam.append(np.kron(SIGMA_Z, Ik).astype(complex))
        gam.append(np.kron(SIGMA_Y, Ik))
    return SpinFactorGenerators(n=n, gammas=tuple(gam))
