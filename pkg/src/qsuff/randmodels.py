"""Random states, algebras and structured models for tests and self-checks."""
import numpy as np
import scipy.linalg as sla
from scipy.stats import unitary_group

from .algebra import span
from .matcore import hermitize
from .model import make_model
from .structure import (
    BlockDescriptor,
    canonical_algebra,
    canonical_block_basis,
    embed_block,
    has_twin,
)


def haar_unitary(d, rng):
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(d, random_state=rng)


def random_hermitian(d, rng):
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (G + G.conj().T)


def random_psd(d, rng, rank=None):
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    return G @ G.conj().T


def random_density(d, rng, rank=None):
    P = random_psd(d, rng, rank)
    return P / np.trace(P).real


def random_model(d, rng, n_states=2, n_derivs=1, rank=None):
    """Unstructured model with a full-rank (or rank ``rank``) reference."""
    rho = random_density(d, rng, rank)
    states = [random_density(d, rng, rank) for _ in range(n_states)]
    derivs = [random_hermitian(d, rng) for _ in range(n_derivs)]
    derivs = [D - np.trace(D).real / d * np.eye(d) for D in derivs]
    return make_model(rho, states, derivs)


# ------------------------------------------------------------ block algebras

_SHAPES = {
    "star": [("R", n) for n in (1, 2, 3)] + [("C", n) for n in (1, 2, 3)] + [("H", 1), ("H", 2)],
    "jordan": [("R", n) for n in (1, 2, 3)] + [("C", 2), ("C", 3), ("H", 2), ("H", 3),
                                               ("Gamma", 4), ("Gamma", 5), ("Gamma", 6),
                                               ("Gamma", 7)],
}


def _random_block(rng, mode, budget, kinds):
    opts = [(k, n) for k, n in _SHAPES[mode]
            if k in kinds and BlockDescriptor(k, n).rep_dim <= budget]
    if not opts:
        return None
    kind, n = opts[rng.integers(len(opts))]
    r = BlockDescriptor(kind, n).rep_dim
    m = int(rng.integers(1, min(3, budget // r) + 1))
    mt = int(rng.integers(0, m // 2 + 1)) if has_twin(kind, n, mode) else 0
    return BlockDescriptor(kind, n, m, mt)


def random_blocks(rng, max_dim, mode="star", kinds=None, max_blocks=3):
    """Random list of block descriptors whose total size is at most ``max_dim``."""
    kinds = kinds or (("C", "R", "H") if mode == "star" else ("C", "R", "H", "Gamma"))
    blocks, budget = [], max_dim
    for _ in range(int(rng.integers(1, max_blocks + 1))):
        b = _random_block(rng, mode, budget, kinds)
        if b is None:
            break
        blocks.append(b)
        budget -= b.size
        if budget <= 0:
            break
    return blocks


def random_canonical_algebra(rng, max_dim=12, mode="star", blocks=None):
    """A canonical algebra hidden by a Haar unitary.

    Returns ``(blocks, V, U)`` with ``V = U canonical U*``.
    """
    blocks = blocks if blocks is not None else random_blocks(rng, max_dim, mode)
    C = canonical_algebra(blocks, mode)
    d = C.dim_ambient
    U = haar_unitary(d, rng)
    V = span([U @ b @ U.conj().T for b in C.basis], dim=d)
    return blocks, V, U


def random_block_hermitian(desc, rng, mode="jordan"):
    """Random element of the Hermitian part of a canonical block (``r x r``)."""
    basis = canonical_block_basis(desc.kind, desc.n, "jordan")
    c = rng.normal(size=len(basis))
    return hermitize(np.tensordot(c, basis, axes=1))


def random_block_state(desc, rng):
    """Random positive definite element of a canonical block."""
    y = random_block_hermitian(desc, rng)
    r = y.shape[0]
    if desc.kind == "Gamma":
        # a I + v.gamma is positive iff a > |v|
        a = np.trace(y).real / r
        v = y - a * np.eye(r)
        nv = np.sqrt(np.trace(v @ v).real / r)
        return (nv * (1.0 + rng.random()) + 0.1) * np.eye(r) + v
    return y @ y + 0.05 * np.eye(r)


def random_weights(m, rng, spread=0.6):
    """Distinct positive weights with mean one, sorted descending."""
    w = 1.0 + spread * (rng.random(m) - 0.5) * 2 * np.linspace(1.0, 0.2, m)
    w = np.sort(np.abs(w) + 0.05)[::-1]
    return w * (m / w.sum())


def _assemble(xs, blocks, Ps, mode):
    t_parts = []
    for x, b, P in zip(xs, blocks, Ps):
        E = embed_block(x, BlockDescriptor(b.kind, b.n, b.m, b.m_twisted), mode)
        r = b.rep_dim
        W = np.concatenate([np.tile(P[:b.m_plain], r), np.tile(P[b.m_plain:], r)])
        # embed_block orders (copy index fastest) so a column scaling suffices
        t_parts.append(E * np.sqrt(W)[:, None] * np.sqrt(W)[None, :])
    return sla.block_diag(*t_parts)


def structured_model(blocks, rng, n_states=3, n_derivs=1, mode="star", U=None):
    """Model ``X = U (+)_i (x_i (x) P_i) U*`` with random block factors.

    Returns ``(model, U, Ps)``; each ``P_i`` has mean one so the weights
    reported by the decomposition equal ``Ps`` exactly.
    """
    d = sum(b.size for b in blocks)
    U = haar_unitary(d, rng) if U is None else U
    Ps = [np.concatenate([random_weights(b.m_plain, rng),
                          random_weights(b.m_twisted, rng) if b.m_twisted else np.zeros(0)])
          for b in blocks]
    q = rng.random(len(blocks)) + 0.5

    def state():
        xs = [qi * random_block_state(b, rng) for qi, b in zip(q, blocks)]
        X = U @ _assemble(xs, blocks, Ps, mode) @ U.conj().T
        return hermitize(X / np.trace(X).real)

    rho = state()
    states = [state() for _ in range(n_states)]
    derivs = []
    for _ in range(n_derivs):
        xs = [random_block_hermitian(b, rng) for b in blocks]
        X = hermitize(U @ _assemble(xs, blocks, Ps, mode) @ U.conj().T)
        derivs.append(X - np.trace(X).real * rho)
    m = make_model(rho, states, derivs, metadata={"blocks": [b.to_dict() for b in blocks]})
    return m, U, Ps
