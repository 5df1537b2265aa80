"""Real-linear operator subspaces, closure generation and projections.

A :class:`RealSubspace` stores an orthonormal basis (real Hilbert-Schmidt
product) as the rows of a real matrix in the coordinates of
:func:`qsuff.matcore.op_to_vec`.  Closure generators for real/complex
*-algebras and real Jordan algebras extend such a basis one candidate at a
time through the Gram-Schmidt kernel in :mod:`qsuff.kernels`.
"""
from functools import cached_property

import numpy as np

from . import kernels
from .errors import InputError
from .matcore import (
    DEFAULT_TOL,
    as_op,
    check_hermitian,
    dagger,
    fro,
    geninv,
    jordan,
    null_space,
    op_to_vec,
    ops_to_vecs,
    vec_to_op,
    vecs_to_ops,
)
from .model import Superoperator, _real_form

FLAG_NAMES = ("contains_identity", "star_closed", "mult_closed", "jordan_closed",
              "complex_closed", "hermitian")

_CHUNK = 4096
# candidates below this Frobenius norm are treated as exact zeros
_ZERO_FLOOR = 1e-12
# Closure generation accepts a new direction only when its residual, measured
# against unit-norm factors, clears this floor.  A direction accepted with
# residual r carries relative error ~eps/r, and products compound it, so the
# floor has to sit well above sqrt(eps).
CLOSURE_FLOOR = 1e-8


def _canonical_signs(V):
    # first coefficient above noise made positive
    V = V.copy()
    for row in V:
        idx = np.flatnonzero(np.abs(row) > 1e-9)
        if idx.size and row[idx[0]] < 0:
            row *= -1.0
    return V


class RealSubspace:
    """Real span of operators on ``C^d`` with an orthonormal basis."""

    def __init__(self, dim_ambient, vecs, canonicalize=True):
        vecs = np.asarray(vecs, dtype=float).reshape(-1, 2 * dim_ambient * dim_ambient)
        if canonicalize:
            vecs = _canonical_signs(vecs)
        vecs.setflags(write=False)
        self.dim_ambient = dim_ambient
        self.vecs = vecs

    @property
    def dim(self):
        return self.vecs.shape[0]

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"RealSubspace(dim_ambient={self.dim_ambient}, dim={self.dim})"

    @cached_property
    def basis(self):
        b = vecs_to_ops(self.vecs, self.dim_ambient)
        b.setflags(write=False)
        return b

    def coords(self, B):
        return self.vecs @ op_to_vec(B)

    def combine(self, c):
        """Operator with coordinates ``c`` in this basis."""
        n = self.dim_ambient
        v = np.asarray(c, dtype=float) @ self.vecs
        return (v[: n * n] + 1j * v[n * n:]).reshape(n, n)

    def project(self, B):
        return self.combine(self.coords(B))

    def project_many(self, ops):
        V = ops_to_vecs(ops)
        P = (V @ self.vecs.T) @ self.vecs
        return vecs_to_ops(P, self.dim_ambient)

    def residuals(self, ops):
        """Frobenius distances of each operator to the subspace."""
        V = ops_to_vecs(ops)
        if self.dim == 0:
            return np.linalg.norm(V, axis=1)
        R = V - (V @ self.vecs.T) @ self.vecs
        return np.linalg.norm(R, axis=1)

    def projector(self):
        """Orthogonal projection onto this subspace as a superoperator."""
        return Superoperator(self.dim_ambient, self.vecs.T @ self.vecs)

    def random_element(self, rng):
        return self.combine(rng.standard_normal(self.dim))

    # flags -------------------------------------------------------------
    @cached_property
    def flags(self):
        rng = np.random.default_rng(12345)
        return {name: bool(ok) for name, (ok, _) in
                _quick_predicates(self, rng).items()}

    @property
    def star_closed(self):
        return self.flags["star_closed"] and self.flags["mult_closed"] \
            and self.flags["contains_identity"]

    @property
    def jordan_closed(self):
        return self.flags["jordan_closed"] and self.flags["hermitian"] \
            and self.flags["contains_identity"]

    @property
    def complex_closed(self):
        return self.flags["complex_closed"]

    def to_dict(self):
        return {"dim_ambient": self.dim_ambient, "dim": self.dim,
                "basis": [b for b in self.basis], "flags": dict(self.flags)}


# --------------------------------------------------------------- building

class _Builder:
    """Growing orthonormal basis backed by a preallocated row buffer."""

    def __init__(self, d, tol):
        self.d = d
        self.n = 2 * d * d
        self.Q = np.zeros((self.n, self.n))
        self.k = 0
        self.tol = tol

    def add(self, ops, normalize=True):
        """Extend by candidate operators.

        With ``normalize`` each candidate is scaled to unit norm so ``tol``
        is relative; otherwise ``tol`` is absolute and candidates are
        expected to be products of unit-norm factors.
        """
        ops = np.asarray(ops, dtype=complex).reshape(-1, self.d, self.d)
        before = self.k
        for s in range(0, ops.shape[0], _CHUNK):
            if self.k >= self.n:
                break
            C = ops_to_vecs(ops[s:s + _CHUNK])
            nrm = np.linalg.norm(C, axis=1)
            keep = nrm > _ZERO_FLOOR * max(1.0, float(nrm.max(initial=0.0)))
            C = C[keep]
            if normalize:
                C = C / nrm[keep, None]
            if self.k and C.shape[0]:
                B = self.Q[: self.k]
                R = C - (C @ B.T) @ B
                # residuals only shrink as the basis grows: safe to discard
                C = C[np.linalg.norm(R, axis=1) > 0.5 * self.tol]
            if C.shape[0]:
                self.k = kernels.gs_extend(self.Q, self.k, np.ascontiguousarray(C), self.tol)
        return before, self.k

    def ops(self, lo, hi):
        return vecs_to_ops(self.Q[lo:hi], self.d)

    def orth(self, A):
        """Component of ``A`` orthogonal to the current span."""
        v = op_to_vec(A)
        B = self.Q[: self.k]
        for _ in range(2):
            v = v - B.T @ (B @ v)
        return vec_to_op(v, self.d)

    def residual(self, A):
        """Absolute distance of ``A`` from the current span."""
        v = op_to_vec(A)
        B = self.Q[: self.k]
        return float(np.linalg.norm(v - B.T @ (B @ v)))

    def subspace(self):
        return RealSubspace(self.d, self.Q[: self.k].copy())


def _dim_of(ops, dim):
    if dim is not None:
        return dim
    if len(ops) == 0:
        raise InputError("cannot infer dimension from an empty generator list")
    return np.asarray(ops[0]).shape[0]


def span(ops, dim=None, tol=DEFAULT_TOL.span):
    """Orthonormal basis of the real span of ``ops``."""
    d = _dim_of(ops, dim)
    b = _Builder(d, tol)
    if len(ops):
        b.add([as_op(A, d) for A in ops])
    return b.subspace()


def full_space(d):
    return RealSubspace(d, np.eye(2 * d * d))


def hermitian_space(d):
    from .matcore import herm_basis
    return RealSubspace(d, ops_to_vecs(herm_basis(d)))


def member(V, B, tol=DEFAULT_TOL.member):
    """Membership test: returns ``(is_member, residual)``.

    The residual is the absolute Frobenius distance ``||B - Pi(B)||``; the
    test passes when it is at most ``tol * (1 + ||B||)``.
    """
    B = as_op(B, V.dim_ambient)
    r = float(V.residuals(B[None])[0])
    return r <= tol * (1.0 + fro(B)), r


def project(V, B):
    return V.project(as_op(B, V.dim_ambient))


def _pair_products(b, lo, hi, op, both=True):
    """Candidates ``op(new, all)`` (and ``op(all, new)``) in chunks of ``_CHUNK``."""
    new = b.ops(lo, hi)
    allops = b.ops(0, hi)
    step = max(1, _CHUNK // max(2 * hi, 1))
    for s in range(0, new.shape[0], step):
        blk = new[s:s + step]
        yield op(blk[:, None], allops[None, :]).reshape(-1, b.d, b.d)
        if both:
            yield op(allops[None, :], blk[:, None]).reshape(-1, b.d, b.d)


def generate_star(gens, scalars="real", extra_maps=(), dim=None, tol=DEFAULT_TOL.span):
    """Smallest real *-algebra with unit containing ``gens``.

    ``scalars="complex"`` also closes under multiplication by ``i``.  Each
    map in ``extra_maps`` (a :class:`Superoperator`) is applied to every
    basis element and the images are added until the space is invariant
    under the maps too.

    The span is kept closed under adjoints, and each round multiplies the
    newly found basis elements by the whole basis on both sides, so words
    of length ``L`` appear after about ``log2 L`` rounds.
    """
    if scalars not in ("real", "complex"):
        raise InputError(f"scalars must be 'real' or 'complex', got {scalars!r}")
    d = _dim_of(gens, dim)
    b = _Builder(d, max(tol, CLOSURE_FLOOR))
    I = np.eye(d, dtype=complex)

    def add(ops, normalize):
        ops = np.asarray(ops, dtype=complex).reshape(-1, d, d)
        b.add(np.concatenate([ops, dagger(ops)]), normalize=normalize)

    add([I] + ([1j * I] if scalars == "complex" else []), True)
    if len(gens):
        add([as_op(g, d) for g in gens], True)
    # operator-norm bound of each map on the Hilbert-Schmidt space
    map_scale = [max(float(np.linalg.norm(f.matrix, 2)), _ZERO_FLOOR) for f in extra_maps]
    done = 0
    while done < b.k and b.k < b.n:
        hi = b.k
        for cand in _pair_products(b, done, hi, np.matmul):
            add(cand, False)
        for f, sc in zip(extra_maps, map_scale):
            add(f.apply_many(b.ops(done, hi)) / sc, False)
        done = hi
    return b.subspace()


def generate_jordan(gens, dim=None, tol=DEFAULT_TOL.span):
    """Smallest real Jordan algebra with unit containing Hermitian ``gens``."""
    d = _dim_of(gens, dim)
    gens = [check_hermitian(g) for g in gens]
    b = _Builder(d, max(tol, CLOSURE_FLOOR))
    b.add([np.eye(d, dtype=complex)] + gens)
    done = 0
    while done < b.k:
        hi = b.k
        for prods in _pair_products(b, done, hi, jordan, both=False):
            b.add(0.5 * (prods + dagger(prods)), normalize=False)
        done = hi
    return b.subspace()


# ------------------------------------------------------------- commutants

def _commutator_matrix(elems, d):
    """Real matrix of ``B -> ([B, a_1], ..., [B, a_r])``."""
    I = np.eye(d)
    blocks = []
    for a in elems:
        K = np.kron(I, a.T) - np.kron(a, I)
        blocks.append(_real_form(K))
    return np.vstack(blocks)


def _generic_probes(V, rng, count):
    out = [V.random_element(rng) for _ in range(count)]
    return [p / fro(p) for p in out if fro(p) > 1e-14]


def commutant(V, rng=None, tol=1e-9):
    """All operators commuting with every element of ``V``."""
    d = V.dim_ambient
    if V.dim == 0:
        return full_space(d)
    rng = rng if rng is not None else np.random.default_rng(0)
    count = 2
    while True:
        probes = _generic_probes(V, rng, count)
        if count >= V.dim:
            probes = [b / fro(b) for b in V.basis]
        M = _commutator_matrix(probes, d)
        N = null_space(M, tol)
        W = RealSubspace(d, N.T.copy(), canonicalize=True)
        W = span(list(W.basis), dim=d) if W.dim else W
        if count >= V.dim or _commute_all(W, V) <= 1e-8:
            return W
        count *= 2


def _commute_all(W, V):
    if W.dim == 0 or V.dim == 0:
        return 0.0
    A = W.basis[:, None]
    B = V.basis[None, :]
    return float(np.max(np.linalg.norm(A @ B - B @ A, axis=(-2, -1))))


def intersection(V, W, tol=1e-9):
    """Intersection of two subspaces of the same ambient space."""
    d = V.dim_ambient
    if V.dim == 0 or W.dim == 0:
        return RealSubspace(d, np.zeros((0, 2 * d * d)))
    # x in V with x orthogonal to the complement of W
    R = V.vecs - (V.vecs @ W.vecs.T) @ W.vecs
    _, s, Vh = np.linalg.svd(R.T, full_matrices=True)
    r = int(np.sum(s > tol))
    coeffs = Vh[r:]
    return span(list(vecs_to_ops(coeffs @ V.vecs, d)), dim=d)


def center(V, rng=None, tol=1e-9):
    """``V`` intersected with its commutant."""
    return intersection(V, commutant(V, rng, tol), tol)


# ------------------------------------------------------------- predicates

def is_modular_invariant(V, rho, tol=DEFAULT_TOL):
    ok, _, _ = modular_invariance_residual(V, rho, tol)
    return ok


def modular_invariance_residual(V, rho, tol=DEFAULT_TOL):
    """Check ``rho b rho^+`` in ``V`` for each basis element.

    Returns ``(ok, worst_residual, worst_index)``; residuals are relative to
    ``1 + ||image||``.
    """
    rinv = geninv(rho, tol.rank)
    imgs = rho[None] @ V.basis @ rinv[None]
    return _image_membership(V, imgs, tol.member)


def _image_membership(V, imgs, member_tol):
    if len(imgs) == 0:
        return True, 0.0, -1
    res = V.residuals(imgs) / (1.0 + np.linalg.norm(imgs, axis=(-2, -1)))
    k = int(np.argmax(res))
    return bool(res[k] <= member_tol), float(res[k]), k


def _pair_residual(V, op, exhaustive, rng, trials=4):
    """Worst relative distance from ``V`` of ``op(a, b)`` for a, b in V."""
    if V.dim == 0:
        return 0.0
    if exhaustive:
        worst = 0.0
        B = V.basis
        for i in range(V.dim):
            imgs = op(B[i][None], B)
            worst = max(worst, float(np.max(V.residuals(imgs))))
        return worst
    worst = 0.0
    for _ in range(trials):
        a = V.random_element(rng)
        c = V.random_element(rng)
        img = op(a, c)
        worst = max(worst, float(V.residuals(img[None])[0]) / (fro(a) * fro(c)))
    return worst


def _predicate_residuals(V, rng, exhaustive):
    d = V.dim_ambient
    res = {}
    if V.dim == 0:
        return {name: 0.0 if name != "contains_identity" else float(np.sqrt(d))
                for name in FLAG_NAMES}
    res["contains_identity"] = float(V.residuals(np.eye(d)[None])[0]) / np.sqrt(d)
    adj = V.residuals(dagger(V.basis))
    res["star_closed"] = float(np.max(adj))
    res["hermitian"] = float(np.max(np.linalg.norm(V.basis - dagger(V.basis), axis=(-2, -1))))
    res["complex_closed"] = float(np.max(V.residuals(1j * V.basis)))
    res["mult_closed"] = _pair_residual(V, lambda a, b: a @ b, exhaustive, rng)
    res["jordan_closed"] = _pair_residual(V, jordan, exhaustive, rng)
    return res


def _quick_predicates(V, rng, tol=1e-8):
    return {k: (bool(v <= tol), float(v)) for k, v in _predicate_residuals(V, rng, False).items()}


def verify_predicates(V, rng=None, tol=DEFAULT_TOL, samples=20):
    """Residual report for every closure predicate of ``V``.

    Closure under products and Jordan products is checked on all basis
    pairs.  When ``V`` is a Jordan algebra the triple product
    ``(ABC + CBA)/2`` is sampled; when it is a *-algebra the real complete
    positivity of the projection is sampled on collections of size <= 3.
    Returns a dict ``name -> (passed, residual)``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    out = {}
    G = V.vecs @ V.vecs.T
    ortho = float(np.max(np.abs(G - np.eye(V.dim)))) if V.dim else 0.0
    out["orthonormal"] = (ortho <= tol.ortho, ortho)
    for k, v in _predicate_residuals(V, rng, True).items():
        out[k] = (bool(v <= tol.member), float(v))
    d = V.dim_ambient
    if V.dim and out["jordan_closed"][0] and out["hermitian"][0]:
        worst = 0.0
        for _ in range(samples):
            A, B, C = (V.random_element(rng) for _ in range(3))
            T = 0.5 * (A @ B @ C + C @ B @ A)
            worst = max(worst, float(V.residuals(T[None])[0]) / (fro(A) * fro(B) * fro(C)))
        out["jordan_triple"] = (worst <= tol.member, worst)
    if V.dim and out["star_closed"][0] and out["mult_closed"][0]:
        worst = 0.0
        for _ in range(samples):
            n = int(rng.integers(1, 4))
            As = [V.random_element(rng) for _ in range(n)]
            Bs = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(n)]
            S = sum(As[i].conj().T @ V.project(Bs[i].conj().T @ Bs[j]) @ As[j]
                    for i in range(n) for j in range(n))
            S = 0.5 * (S + S.conj().T)
            lam = np.linalg.eigvalsh(S)
            worst = max(worst, float(max(0.0, -lam[0]) / max(np.max(np.abs(lam)), 1e-300)))
        out["real_cp"] = (worst <= tol.psd, worst)
    return out
