"""Block structure of real *-algebras and real Jordan algebras.

Canonical forms
---------------
A block is described by ``BlockDescriptor(kind, n, m, m_twisted)``:

* ``"R"`` - ``M_n(R)`` (star mode) or its symmetric part (Jordan mode),
* ``"C"`` - ``M_n(C)`` or its Hermitian part,
* ``"H"`` - ``M_n(H)`` realised on ``C^(2n)`` through
  :func:`qsuff.matcore.quaternion_embed`, or its Hermitian part,
* ``"Gamma"`` - the spin factor spanned by ``I`` and
  :func:`qsuff.matcore.spin_factor` ``(n)`` (Jordan mode only).

The block acts on ``C^r (x) C^m`` as ``x (x) I_(m - m_twisted)`` followed by
``t(x) (x) I_(m_twisted)``, where ``t`` is complex conjugation for ``"C"``
blocks and the spin-factor flip ``x -> (2 Tr x / r) I - x`` for odd spin
factors (including the Jordan ``("H", 2)`` block).  Other kinds have no
inequivalent twin and always have ``m_twisted = 0``.  Twisted copies are
put last and the orientation is chosen so that ``m_twisted <= m / 2``.

Low-index spin factors are reported under their matrix names:
``Gamma_2 -> ("R", 2)``, ``Gamma_3 -> ("C", 2)``, ``Gamma_5 -> ("H", 2)``;
``Gamma_1`` is not simple and appears as two ``("R", 1)`` blocks.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .algebra import RealSubspace, center, generate_star, span
from .errors import InputError, StructureError
from .matcore import (
    DEFAULT_TOL,
    PAULI,
    SIGMA_X,
    SIGMA_Z,
    check_psd,
    cluster_sorted,
    fro,
    geninv,
    herm_basis,
    herm_eig,
    hermitize,
    null_space,
    ops_to_vecs,
    quaternion_embed,
    spin_factor,
)
from .model import sld
from .report import ResidualTable

KINDS = ("C", "R", "H", "Gamma")
_KIND_ORDER = {k: i for i, k in enumerate(KINDS)}
_QUNITS = np.eye(4)


# ------------------------------------------------------------- descriptors

@dataclass(frozen=True)
class BlockDescriptor:
    kind: str
    n: int
    m: int = 1
    m_twisted: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown block kind {self.kind!r}")
        if self.n < 1 or self.m < 1 or not 0 <= self.m_twisted <= self.m:
            raise InputError(f"invalid block sizes in {self}")

    @property
    def rep_dim(self):
        if self.kind == "H":
            return 2 * self.n
        if self.kind == "Gamma":
            return 2 ** (self.n // 2)
        return self.n

    @property
    def size(self):
        return self.rep_dim * self.m

    @property
    def m_plain(self):
        return self.m - self.m_twisted

    @property
    def jordan_dim(self):
        n = self.n
        return {"C": n * n, "R": n * (n + 1) // 2, "H": 2 * n * n - n, "Gamma": n + 1}[self.kind]

    @property
    def star_dim(self):
        n = self.n
        if self.kind == "Gamma":
            raise InputError("spin factors are not *-algebra blocks")
        return {"C": 2 * n * n, "R": n * n, "H": 4 * n * n}[self.kind]

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.n, self.m, self.m_twisted)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "m": self.m, "m_twisted": self.m_twisted}

    def __str__(self):
        tw = f",{self.m_twisted}" if self.m_twisted else ""
        return f"({self.kind},{self.n},{self.m}{tw})"


def canonical_descriptor(kind, n, m=1, m_twisted=0, mode="jordan"):
    """Apply the naming conventions for low-index spin factors and 1x1 blocks.

    Returns a list of descriptors (``Gamma_1`` splits in two).
    """
    if mode == "jordan":
        if kind == "Gamma":
            if n == 1:
                return [BlockDescriptor("R", 1, m), BlockDescriptor("R", 1, m)]
            if n in (2, 3, 5):
                kind, n = {2: ("R", 2), 3: ("C", 2), 5: ("H", 2)}[n]
        if kind == "C" and n == 1:
            return [BlockDescriptor("R", 1, m)]
        if kind == "H" and n == 1:
            return [BlockDescriptor("R", 1, 2 * m)]
    return [BlockDescriptor(kind, n, m, m_twisted)]


def has_twin(kind, n, mode):
    """Whether the block kind has an inequivalent twisted representation."""
    if kind == "C":
        return True
    if mode == "jordan" and kind == "H" and n == 2:
        return True
    return kind == "Gamma" and n % 2 == 1


def twist(kind, n, mode):
    """The twist applied to the last ``m_twisted`` copies (identity if none)."""
    if kind == "C":
        return np.conj
    if has_twin(kind, n, mode):
        def flip(x):
            r = x.shape[-1]
            return (2.0 * np.trace(x) / r) * np.eye(r) - x
        return flip
    return lambda x: x


# ---------------------------------------------------------- canonical forms

def _unit(n, i, j):
    E = np.zeros((n, n), dtype=complex)
    E[i, j] = 1.0
    return E


def _quat_unit_matrix(n, i, j, q, hermitian):
    W = np.zeros((n, n, 4))
    W[i, j] = q
    if hermitian and i != j:
        W[j, i] = q * np.array([1, -1, -1, -1])
    return quaternion_embed(W)


def _h2_frame():
    # traceless orthonormal frame of the Hermitian 2x2 quaternion matrices
    out = [quaternion_embed(np.array([[[1, 0, 0, 0], [0, 0, 0, 0]],
                                      [[0, 0, 0, 0], [-1, 0, 0, 0]]], dtype=float))]
    for q in _QUNITS:
        out.append(_quat_unit_matrix(2, 0, 1, q, True))
    return out


def canonical_block_basis(kind, n, mode):
    """A spanning set of the canonical block algebra on ``C^rep_dim``."""
    out = []
    if kind == "C":
        if mode == "star":
            for i in range(n):
                for j in range(n):
                    out += [_unit(n, i, j), 1j * _unit(n, i, j)]
        else:
            out = list(herm_basis(n))
    elif kind == "R":
        for i in range(n):
            for j in range(n):
                if mode == "star":
                    out.append(_unit(n, i, j))
                elif i <= j:
                    out.append(_unit(n, i, j) + _unit(n, j, i) if i < j else _unit(n, i, i))
    elif kind == "H":
        for i in range(n):
            for j in range(n):
                if mode == "star":
                    out += [_quat_unit_matrix(n, i, j, q, False) for q in _QUNITS]
                elif i == j:
                    out.append(_quat_unit_matrix(n, i, i, _QUNITS[0], False))
                elif i < j:
                    out += [_quat_unit_matrix(n, i, j, q, True) for q in _QUNITS]
    elif kind == "Gamma":
        if mode != "jordan":
            raise InputError("spin factors only exist in jordan mode")
        g = spin_factor(n).gammas
        out = [np.eye(g[0].shape[0], dtype=complex)] + list(g)
    else:
        raise InputError(f"unknown block kind {kind!r}")
    return np.array(out)


def _spin_frame(kind, n):
    """Canonical anticommuting frame for a degree-two Jordan block."""
    if kind == "R":
        return [SIGMA_X.copy(), SIGMA_Z.copy()]
    if kind == "C":
        return [P.copy() for P in PAULI]
    if kind == "H":
        return _h2_frame()
    return list(spin_factor(n).gammas)


def embed_block(x, desc, mode):
    """``x (x) I_plain  (+)  t(x) (x) I_twisted`` for one block."""
    t = twist(desc.kind, desc.n, mode)
    parts = []
    if desc.m_plain:
        parts.append(np.kron(x, np.eye(desc.m_plain)))
    if desc.m_twisted:
        parts.append(np.kron(t(x), np.eye(desc.m_twisted)))
    return sla.block_diag(*parts)


def canonical_algebra(blocks, mode):
    """The direct sum of canonical blocks as a :class:`RealSubspace`."""
    D = sum(b.size for b in blocks)
    ops = []
    lo = 0
    for b in blocks:
        for x in canonical_block_basis(b.kind, b.n, mode):
            Z = np.zeros((D, D), dtype=complex)
            Z[lo:lo + b.size, lo:lo + b.size] = embed_block(x, b, mode)
            ops.append(Z)
        lo += b.size
    return span(ops, dim=D)


def jordan_dim(blocks):
    """Real dimension of the Jordan algebra with the given blocks."""
    return int(sum(b.jordan_dim for b in blocks))


def star_dim(blocks):
    return int(sum(b.star_dim for b in blocks))


# ---------------------------------------------------------- identification

@dataclass(frozen=True)
class StructureDecomposition:
    """``U* V U`` is the canonical direct sum of ``blocks``.

    Column ``block_index_map[i][0] + j * m_plain + k`` of ``U`` is basis
    vector ``j`` of copy ``k`` of block ``i`` (twisted copies follow).
    """

    blocks: tuple
    U: np.ndarray
    block_index_map: tuple
    mode: str
    residual: float = 0.0

    def descriptor_multiset(self):
        return sorted((b.kind, b.n, b.m, b.m_twisted) for b in self.blocks)

    def to_dict(self):
        return {"mode": self.mode, "blocks": [b.to_dict() for b in self.blocks],
                "block_index_map": [list(p) for p in self.block_index_map],
                "U": self.U, "residual": self.residual}


class _Degenerate(Exception):
    """Random element was not generic enough; retry with fresh randomness."""


def _clusters(h):
    lam, W = herm_eig(hermitize(h))
    scale = max(np.max(np.abs(lam)), 1e-300)
    return cluster_sorted(lam, 1e-7 * scale), lam, W


def _generic_hermitian(V, rng):
    a = V.random_element(rng)
    h = hermitize(a)
    nh = fro(h)
    if nh < 1e-12:
        raise _Degenerate("zero Hermitian part")
    return h / nh


def identify_structure(V, mode="star", rng=None, tol=DEFAULT_TOL, retries=4):
    """Find a unitary bringing ``V`` into canonical block form.

    ``mode="star"`` requires a real *-algebra, ``mode="jordan"`` a real
    Jordan algebra.  Random generic elements drive the decomposition; a
    non-generic draw is retried.
    """
    if mode not in ("star", "jordan"):
        raise InputError(f"mode must be 'star' or 'jordan', got {mode!r}")
    if mode == "star" and not V.star_closed:
        raise StructureError("subspace is not a real *-algebra with unit")
    if mode == "jordan" and not V.jordan_closed:
        raise StructureError("subspace is not a real Jordan algebra with unit")
    rng = rng if rng is not None else np.random.default_rng(0)
    last = None
    for _ in range(retries):
        try:
            return _identify(V, mode, rng, tol)
        except _Degenerate as exc:
            last = exc
    raise StructureError(f"structure identification failed: {last}")


def _hermitian_part(Z):
    """Hermitian parts of an orthonormal basis, with an SVD rank cut."""
    d = Z.dim_ambient
    if Z.dim == 0:
        return Z
    H = ops_to_vecs(np.array([hermitize(z) for z in Z.basis]))
    _, s, Vh = np.linalg.svd(H, full_matrices=False)
    return RealSubspace(d, Vh[s > 1e-8])


def _identify(V, mode, rng, tol):
    Z = center(V, rng)
    Zh = _hermitian_part(Z)
    groups, _, W = _clusters(Zh.random_element(rng))
    if len(groups) != Zh.dim:
        raise _Degenerate("central element has coincident eigenvalues")
    found = []
    for g in groups:
        Wb = W[:, g]
        Vb = _subalgebra_on(Wb, V)
        if mode == "star":
            descs, Ub = _simple_star(Vb, rng)
        else:
            descs, Ub = _simple_jordan(Vb, rng)
        found.append((descs, Wb @ Ub))
    # order blocks canonically; a split Gamma_1 contributes two blocks
    items = []
    for descs, Ucols in found:
        lo = 0
        for dsc in descs:
            items.append((dsc, Ucols[:, lo:lo + dsc.size]))
            lo += dsc.size
    items.sort(key=lambda it: it[0].sort_key())
    blocks = tuple(it[0] for it in items)
    U = np.hstack([it[1] for it in items])
    index, lo = [], 0
    for b in blocks:
        index.append((lo, lo + b.size))
        lo += b.size
    res = _verify(V, blocks, U, mode, tol)
    return StructureDecomposition(blocks, U, tuple(index), mode, res)


def _verify(V, blocks, U, mode, tol):
    d = V.dim_ambient
    if U.shape != (d, d):
        raise StructureError(f"blocks cover {U.shape[1]} of {d} dimensions")
    unit = fro(U.conj().T @ U - np.eye(d))
    if unit > tol.struct:
        raise StructureError(f"basis change is not unitary ({unit:.3e})")
    expected = jordan_dim(blocks) if mode == "jordan" else star_dim(blocks)
    if expected != V.dim:
        raise StructureError(f"dimension {V.dim} does not match blocks ({expected})")
    canon = canonical_algebra(blocks, mode)
    img = U.conj().T @ V.basis @ U
    res = canon.residuals(img)
    worst = float(np.max(res)) if res.size else 0.0
    if worst > tol.struct:
        raise StructureError(f"canonical form residual {worst:.3e} exceeds tolerance")
    return worst


def _projected_span(ops, d):
    """Span of the images of an orthonormal basis under an orthogonal projection.

    Such images have singular values 0 or 1, so a cut at 1/2 is exact.
    """
    _, s, Vh = np.linalg.svd(ops_to_vecs(np.asarray(ops)), full_matrices=False)
    return RealSubspace(d, Vh[s > 0.5])


def _subalgebra_on(W, V):
    """Compression ``W* V W`` onto ``range W`` (``W W*`` must lie in ``V``)."""
    return _projected_span([W.conj().T @ b @ W for b in V.basis], W.shape[1])


def _unit_in(Fsp, I):
    """Orthonormal elements of ``Fsp`` orthogonal to ``I``, scaled to norm ``sqrt(dim)``."""
    R = [f - (np.trace(f).real / I.shape[0]) * I for f in Fsp.basis]
    S = _projected_span(R, I.shape[0])
    scale = np.sqrt(I.shape[0])
    return [s * scale / fro(s) for s in S.basis]


def _simple_star(A, rng):
    """Matrix units, division ring and multiplicity space of a simple block."""
    D = A.dim_ambient
    groups, _, W = _clusters(_generic_hermitian(A, rng))
    N = len(groups)
    Ws = [W[:, g] for g in groups]
    d1 = Ws[0].shape[1]
    if any(w.shape[1] != d1 for w in Ws):
        raise _Degenerate("minimal projections of unequal rank")
    I1 = np.eye(d1)
    F = _subalgebra_on(Ws[0], A)
    kind = {1: "R", 2: "C", 4: "H"}.get(F.dim)
    if kind is None or A.dim != N * N * F.dim:
        raise _Degenerate(f"corner dimension {F.dim} inconsistent with {A.dim}")
    # e_{1j} in coordinates: range p_j -> range p_1, normalised to an isometry
    E = [I1]
    for j in range(1, N):
        e = Ws[0].conj().T @ A.random_element(rng) @ Ws[j]
        c2 = np.trace(e @ e.conj().T).real / d1
        if c2 < 1e-12:
            raise _Degenerate("vanishing matrix unit")
        e = e / np.sqrt(c2)
        if fro(e @ e.conj().T - I1) > 1e-7:
            raise _Degenerate("matrix unit is not a partial isometry")
        E.append(e)

    def lift(j, v):
        return Ws[j] @ E[j].conj().T @ v

    m_tw = 0
    if kind == "R":
        cols = [lift(j, I1) for j in range(N)]
        m = d1
    elif kind == "C":
        J1 = _unit_in(F, I1)[0]
        lam, Vk = np.linalg.eigh(hermitize(-1j * J1))
        plus, minus = Vk[:, lam > 0], Vk[:, lam < 0]
        if minus.shape[1] > plus.shape[1]:
            plus, minus = minus, plus
        m, m_tw = d1, minus.shape[1]
        cols = [lift(j, plus) for j in range(N)] + [lift(j, minus) for j in range(N)]
    else:
        Qs = _unit_in(F, I1)
        Qx, Qy = Qs[0], Qs[1]
        Qz = -Qx @ Qy
        lam, Vk = np.linalg.eigh(hermitize(-1j * Qz))
        v0 = Vk[:, lam > 0]
        v1 = -1j * Qx @ v0
        if 2 * v0.shape[1] != d1:
            raise _Degenerate("quaternionic corner has unbalanced spectrum")
        m = v0.shape[1]
        cols = []
        for j in range(N):
            cols += [lift(j, v0), lift(j, v1)]
    U = np.hstack(cols)
    if fro(U.conj().T @ U - np.eye(D)) > 1e-7:
        raise _Degenerate("assembled basis is not orthonormal")
    return [BlockDescriptor(kind, N, m, m_tw)], U


def _intertwiners(gams, cs):
    """Isometries ``T_a`` with ``g T_a = T_a c`` for all pairs, ``T_a* T_b = delta I``."""
    D, r = gams[0].shape[0], cs[0].shape[0]
    M = np.vstack([np.kron(g, np.eye(r)) - np.kron(np.eye(D), c.T) for g, c in zip(gams, cs)])
    N = null_space(M, 1e-8)
    Ts = [N[:, a].reshape(D, r) for a in range(N.shape[1])]
    if not Ts:
        return []
    G = np.array([[np.trace(Ta.conj().T @ Tb) / r for Tb in Ts] for Ta in Ts])
    lam, Q = np.linalg.eigh(hermitize(G))
    Gm = (Q / np.sqrt(lam)) @ Q.conj().T
    return [sum(Ts[b] * Gm[b, a] for b in range(len(Ts))) for a in range(len(Ts))]


def _simple_jordan(V, rng):
    D = V.dim_ambient
    groups, _, _ = _clusters(_generic_hermitian(V, rng))
    deg = len(groups)
    if deg == 1:
        if V.dim != 1:
            raise _Degenerate("degree one but not one-dimensional")
        return [BlockDescriptor("R", 1, D)], np.eye(D, dtype=complex)
    if deg >= 3:
        A = generate_star(list(V.basis), "real", dim=D)
        descs, U = _simple_star(A, rng)
        s = descs[0]
        desc = BlockDescriptor(s.kind, s.n, s.m, s.m_twisted)
        if desc.jordan_dim != V.dim:
            raise _Degenerate(f"Jordan dimension {V.dim} does not fit {desc}")
        return [desc], U
    # degree two: spin factor with k = dim - 1 generators
    k = V.dim - 1
    I = np.eye(D)
    gams = [hermitize(g) for g in _unit_in(V, I)]
    if len(gams) != k or k < 2:
        raise _Degenerate("spin factor frame has the wrong size")
    kind, n = {2: ("R", 2), 3: ("C", 2), 5: ("H", 2)}.get(k, ("Gamma", k))
    cs = _spin_frame(kind, n)
    r = cs[0].shape[0]
    tw = twist(kind, n, "jordan") if has_twin(kind, n, "jordan") else None
    plus = _intertwiners(gams, cs)
    minus = _intertwiners(gams, [tw(c) for c in cs]) if tw else []
    if len(minus) > len(plus):
        gams = [-g for g in gams]
        plus, minus = minus, plus
        # negating the frame swaps the two classes for every twisted kind
    if (len(plus) + len(minus)) * r != D:
        raise _Degenerate("spin factor copies do not fill the block")
    cols = [np.stack([T[:, j] for T in plus], axis=1) for j in range(r)]
    if minus:
        cols += [np.stack([T[:, j] for T in minus], axis=1) for j in range(r)]
    U = np.hstack(cols)
    return [BlockDescriptor(kind, n, len(plus) + len(minus), len(minus))], U


# ----------------------------------------------------------- KI decomposition

@dataclass
class KIDecomposition:
    """Block factors ``X = U (+)_i (x_i (x) P_i) U*`` for every model element."""

    structure: StructureDecomposition
    P_blocks: list
    X_blocks: list
    labels: list
    target: str
    residuals: ResidualTable = field(default_factory=ResidualTable)

    @property
    def U(self):
        return self.structure.U

    def assemble(self, xs):
        """``U ((+)_i embed(x_i) (x) P_i) U*`` for per-block factors ``xs``."""
        parts = []
        for b, x, P in zip(self.structure.blocks, xs, self.P_blocks):
            parts.append(_weighted_embed(x, b, P, self.target))
        return self.U @ sla.block_diag(*parts) @ self.U.conj().T


def _weighted_embed(x, b, P, mode):
    t = twist(b.kind, b.n, mode)
    parts = []
    if b.m_plain:
        parts.append(np.kron(x, np.diag(P[:b.m_plain])))
    if b.m_twisted:
        parts.append(np.kron(t(x), np.diag(P[b.m_plain:])))
    return sla.block_diag(*parts)


def _sorted_eigh(C):
    """Eigen-decomposition, descending; ties resolved by a pivoted QR basis."""
    lam, V = np.linalg.eigh(hermitize(C))
    lam, V = lam[::-1], V[:, ::-1]
    out_v = []
    groups = cluster_sorted(lam, 1e-9 * max(1.0, np.max(np.abs(lam))))
    for g in groups:
        Vg = V[:, g]
        if len(g) > 1:
            P = Vg @ Vg.conj().T
            Q, _, _ = sla.qr(P, pivoting=True)
            Vg = Q[:, :len(g)]
        for j in range(Vg.shape[1]):
            k = int(np.argmax(np.abs(Vg[:, j])))
            Vg[:, j] *= np.conj(Vg[k, j]) / abs(Vg[k, j])
        out_v.append(Vg)
    return lam.copy(), np.hstack(out_v)


def _partial_trace_mult(Y, r, mc):
    """``(1/r) Tr_r`` of an ``(r mc) x (r mc)`` matrix: returns ``mc x mc``."""
    return np.einsum("jajb->ab", Y.reshape(r, mc, r, mc)) / r


def _partial_trace_rep(Y, r, mc):
    return np.einsum("iaja->ij", Y.reshape(r, mc, r, mc)) / mc


def ki_decompose(m, cert, target="star", rng=None, tol=DEFAULT_TOL):
    """Koashi-Imoto type decomposition from a sufficiency certificate.

    ``target="star"`` decomposes the real *-algebra ``A_R``;
    ``target="jordan"`` decomposes the Jordan algebra ``A_J``.
    """
    A = cert.A_R if target == "star" else cert.A_J
    S = identify_structure(A, target, rng, tol)
    U = S.U.copy()
    w = U.conj().T @ cert.omega @ U
    t = ResidualTable()
    P_blocks = []
    scale = 1.0 + fro(cert.omega)
    off = w.copy()
    for b, (lo, hi) in zip(S.blocks, S.block_index_map):
        off[lo:hi, lo:hi] = 0.0
    t.add("omega:block_diagonal", fro(off), tol.struct * scale)
    for i, (b, (lo, hi)) in enumerate(zip(S.blocks, S.block_index_map)):
        r = b.rep_dim
        Y = w[lo:hi, lo:hi]
        cut = r * b.m_plain
        t.add(f"omega:no_cross_term[{i}]", fro(Y[:cut, cut:]), tol.struct * scale)
        Ps, Ws, worst = [], [], 0.0
        for s, e, mc in ((0, cut, b.m_plain), (cut, hi - lo, b.m_twisted)):
            if mc == 0:
                continue
            Yp = Y[s:e, s:e]
            C = _partial_trace_mult(Yp, r, mc)
            worst = max(worst, fro(Yp - np.kron(np.eye(r), C)))
            lam, Wc = _sorted_eigh(C)
            Ps.append(lam)
            Ws.append(np.kron(np.eye(r), Wc))
        t.add(f"omega:identity_tensor_C[{i}]", worst, tol.struct * scale)
        U[:, lo:hi] = U[:, lo:hi] @ sla.block_diag(*Ws)
        P = np.concatenate(Ps)
        t.add_min(f"P:positive[{i}]", float(np.min(P)), 0.0)
        P_blocks.append(P)
    S = StructureDecomposition(S.blocks, U, S.block_index_map, S.mode, S.residual)
    winv = geninv(cert.omega, tol.rank)
    X_blocks, labels = [], []
    ki = KIDecomposition(S, P_blocks, X_blocks, labels, target, t)
    for e in m.elements:
        Z = U.conj().T @ (e.X @ winv) @ U
        xs = []
        for b, (lo, hi) in zip(S.blocks, S.block_index_map):
            mc = b.m_plain
            xs.append(hermitize(_partial_trace_rep(Z[lo:lo + b.rep_dim * mc, lo:lo + b.rep_dim * mc],
                                                   b.rep_dim, mc)))
        X_blocks.append(xs)
        labels.append(e.label)
        res = fro(ki.assemble(xs) - e.X)
        t.add(f"reassembly[{e.label}]", res, tol.recon * (1.0 + fro(e.X)))
    return ki


def fit_multiplicity_factor(ki, X, block):
    """Best rank-one fit ``Y = x (x) P`` of the plain part of one block of ``X``.

    Returns ``P`` (an ``m_plain x m_plain`` matrix, scaled to mean diagonal 1)
    and the relative size of the second singular value, or ``None`` when
    the block of ``X`` vanishes.
    """
    b = ki.structure.blocks[block]
    lo, _ = ki.structure.block_index_map[block]
    r, mc = b.rep_dim, b.m_plain
    Y = (ki.U.conj().T @ X @ ki.U)[lo:lo + r * mc, lo:lo + r * mc]
    M = Y.reshape(r, mc, r, mc).transpose(0, 2, 1, 3).reshape(r * r, mc * mc)
    u, s, vh = np.linalg.svd(M)
    if s[0] < 1e-9 * (1.0 + fro(X)):
        return None
    P = vh[0].reshape(mc, mc)
    P = P * (mc / np.trace(P))
    second = s[1] / s[0] if s.size > 1 else 0.0
    return P, second


# ------------------------------------------------------------------ bounds

def support_size_bound(blocks, d, setting):
    """Upper bound on the number of POVM outcomes that need to be searched."""
    dim = jordan_dim(blocks)
    if setting == "bayesian":
        return dim
    if setting == "local":
        if d < 1:
            raise InputError("local bound needs at least one parameter")
        return dim + d * (d + 1) // 2 - 1
    raise InputError(f"setting must be 'local' or 'bayesian', got {setting!r}")


def classical_fisher(rho, derivs, povm, tol=DEFAULT_TOL, return_dropped=False):
    """Classical Fisher information matrix of a POVM measurement.

    ``J_ij = sum_x Tr(d_i M_x) Tr(d_j M_x) / Tr(rho M_x)`` over outcomes with
    probability above ``tol.fisher_floor``.
    """
    rho = check_psd(rho, tol.psd, what="reference")
    d = rho.shape[0]
    povm = [check_psd(M, tol.psd, what="POVM element") for M in povm]
    total = sum(povm)
    if fro(total - np.eye(d)) > tol.recon * (1 + np.sqrt(d)):
        raise InputError("POVM elements do not sum to the identity")
    derivs = [hermitize(np.asarray(D, dtype=complex)) for D in derivs]
    J = np.zeros((len(derivs), len(derivs)))
    dropped = 0
    for M in povm:
        p = np.trace(rho @ M).real
        if p <= tol.fisher_floor:
            dropped += 1
            continue
        g = np.array([np.trace(D @ M).real for D in derivs])
        J += np.outer(g, g) / p
    return (J, dropped) if return_dropped else J


def sld_fisher(rho, derivs, tol=DEFAULT_TOL):
    """SLD Fisher information ``Re Tr rho L_i L_j``."""
    Ls = [sld(D, rho, tol) for D in derivs]
    return np.array([[np.trace(rho @ Li @ Lj).real for Lj in Ls] for Li in Ls])
