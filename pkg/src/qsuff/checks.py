"""Property suites shared by the ``verify`` and ``selftest`` commands."""
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .algebra import (
    _image_membership,
    generate_star,
    member,
    modular_invariance_residual,
    span,
    verify_predicates,
)
from .errors import QsuffError
from .matcore import DEFAULT_TOL, PAULI, fro, geninv, hermitize
from .model import d_tilde, likelihood_ratio_set, restrict_to_HS
from .randmodels import (
    random_blocks,
    random_canonical_algebra,
    random_model,
    structured_model,
)
from .report import ResidualTable
from .structure import (
    canonical_algebra,
    canonical_descriptor,
    identify_structure,
    ki_decompose,
)
from .sufficiency import (
    SUFF_TOL,
    bimodule_residual,
    check_conditional_expectation,
    conditional_expectation,
    fixed_point_pipeline,
    jordan_ce_residuals,
    likelihood_in_algebra_check,
    minimal_sufficient_jordan,
    minimal_sufficient_star,
    pairing_residual,
    schwarz_residual,
    verify_sufficient,
)

#: acceptance threshold for disagreement between equivalent conditions
EQUIV_TOL = 1e-7


# ------------------------------------------------------------- projections

def projection_suite(V, rng, samples=50, tol=DEFAULT_TOL):
    """Adjoint, positivity, faithfulness and bimodule laws of the projection onto ``V``.

    ``V`` must be a real *-algebra.  Faithfulness is checked through
    ``sqrt(d) ||Pi(B)|| >= ||B||`` for PSD ``B``, which follows from
    ``Tr B = <Pi(B), I>`` and forces ``Pi(B) = 0 => B = 0``.
    """
    d = V.dim_ambient
    Pi = V.projector()
    t = ResidualTable()
    adj, psd, ratio = 0.0, 0.0, np.inf
    for _ in range(samples):
        G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        adj = max(adj, fro(Pi(G.conj().T) - Pi(G).conj().T) / fro(G))
        k = int(rng.integers(1, d + 1))
        B = G[:, :k] @ G[:, :k].conj().T
        PB = Pi(B)
        lam = np.linalg.eigvalsh(hermitize(PB))
        psd = max(psd, -lam[0] / np.max(np.abs(np.linalg.eigvalsh(B))))
        ratio = min(ratio, np.sqrt(d) * fro(PB) / fro(B))
    t.add("projection:adjoint", adj, SUFF_TOL)
    t.add("projection:psd_min_eig", psd, tol.psd)
    t.add_min("projection:faithful_ratio", ratio, 1.0 - 1e-9)
    t.add("projection:bimodule", bimodule_residual(Pi, V), SUFF_TOL)
    t.add("projection:idempotent", fro((Pi @ Pi).matrix - Pi.matrix), tol.ortho * 2 * d * d)
    return t


def projection_example():
    """Projection onto ``M_2(R)`` of ``[[0,0],[i,0]]`` and ``[[0,0],[1,0]]``."""
    M2R = generate_star([PAULI[0], PAULI[2]])
    a = M2R.project(np.array([[0, 0], [1j, 0]]))
    b = M2R.project(np.array([[0, 0], [1, 0]], dtype=complex))
    return a, b


# ------------------------------------------------------ modular equivalence

def _subspace_equal_residual(S1, S2):
    """Largest residual of either basis in the other subspace."""
    if S1.dim != S2.dim:
        return np.inf
    if S1.dim == 0:
        return 0.0
    return float(max(np.max(S2.residuals(S1.basis)), np.max(S1.residuals(S2.basis))))


def modular_conditions(A, rho, rng, tol=DEFAULT_TOL):
    """Residuals of the equivalent modular conditions for ``(A, rho)``.

    Returns a dict with the residual of

    * ``ce``: the constructed conditional expectation (bimodule law and
      preservation of ``rho``), built without its invariance precheck,
    * ``conjugates_equal``: ``rho A rho^+ = rho0 A rho0^+`` with
      ``rho0 = Pi(rho)``,
    * ``invariant``: ``rho A rho^+`` inside ``A``,
    * ``d_tilde``: ``D_tilde(A)`` inside ``A``.

    A condition holds when its residual is at most :data:`EQUIV_TOL`.
    """
    d = A.dim_ambient
    out = {}
    try:
        alpha = conditional_expectation(A, rho, tol, check=False)
        ce = max(bimodule_residual(alpha, A), pairing_residual(alpha, rho))
    except (QsuffError, np.linalg.LinAlgError):
        ce = np.inf
    out["ce"] = float(ce)
    rho0 = hermitize(A.project(rho))
    r_inv, r0_inv = geninv(rho, tol.rank), geninv(rho0, tol.rank)
    S1 = span(list(rho[None] @ A.basis @ r_inv[None]), dim=d)
    S2 = span(list(rho0[None] @ A.basis @ r0_inv[None]), dim=d)
    out["conjugates_equal"] = _subspace_equal_residual(S1, S2)
    out["invariant"] = modular_invariance_residual(A, rho, tol)[1]
    Dt = d_tilde(rho, tol.rank)
    out["d_tilde"] = _image_membership(A, Dt.apply_many(A.basis), tol.member)[1]
    return out


def modular_agreement(res, threshold=EQUIV_TOL):
    """``(agree, verdict)`` for a dict from :func:`modular_conditions`."""
    verdicts = {k: bool(v <= threshold) for k, v in res.items()}
    vals = set(verdicts.values())
    return len(vals) == 1, vals.pop() if len(vals) == 1 else None


def modular_pair(d, rng, kind):
    """Random ``(A, rho)`` pair of dimension ``d``.

    ``kind`` is ``"invariant"`` (``rho`` built from the block structure of
    ``A``), ``"degenerate"`` (as before, with some central blocks of
    ``rho`` removed), ``"generic"`` (random faithful ``rho``) or
    ``"generic_degenerate"`` (random ``rho`` compressed to a central
    projection of ``A``).
    """
    while True:
        blocks = random_blocks(rng, d, "star")
        if sum(b.size for b in blocks) == d:
            break
    if kind.endswith("degenerate") and len(blocks) == 1:
        b = blocks[0]
        if b.m > 1 and not b.m_twisted:
            blocks = [type(b)(b.kind, b.n, 1), type(b)(b.kind, b.n, b.m - 1)]
    m, U, _ = structured_model(blocks, rng, n_states=0, n_derivs=0)
    A = span([U @ c @ U.conj().T for c in canonical_algebra(blocks, "star").basis], dim=d)
    rho = m.rho
    if kind in ("generic", "generic_degenerate"):
        G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = G @ G.conj().T
    if kind in ("degenerate", "generic_degenerate") and len(blocks) > 1:
        lo = blocks[0].size
        s = U[:, lo:] @ U[:, lo:].conj().T
        rho = s @ rho @ s
    rho = hermitize(rho / np.trace(rho).real)
    return A, rho


# -------------------------------------------------------- model property suite

def verify_model(m, tol=DEFAULT_TOL, seed=0, scalars="real", restrict=True, ki=True):
    """Run the full property suite on a model; returns ``(table, summary)``."""
    rng = np.random.default_rng(seed)
    t = ResidualTable()
    summary = {"dim_input": m.dim}
    if restrict and not m.restricted:
        m = restrict_to_HS(m, tol)
    summary["dim"] = m.dim
    A = minimal_sufficient_star(m, scalars, tol)
    summary["minimal_star_dim"] = A.dim
    for name, (ok, val) in verify_predicates(A, rng, tol).items():
        if name in ("hermitian", "complex_closed"):
            continue
        t.add_flag(f"minsuff:{name}", ok, val)
    ok, r, _ = modular_invariance_residual(A, m.rho, tol)
    t.add("minsuff:modular_invariance", r, tol.member)
    ok, r = ratio_membership_worst(A, m, tol)
    t.add("minsuff:ratio_membership", r, tol.member)
    t.extend(projection_suite(A, rng, 20, tol))
    alpha = conditional_expectation(A, m.rho, tol)
    t.extend(check_conditional_expectation(alpha, A, m.rho, rng, tol))
    ok, r = verify_sufficient(m, alpha)
    t.add("ce:sufficient", r, SUFF_TOL * (1 + max(fro(X) for X in m.operators)))
    t.add("ce:schwarz", schwarz_residual(alpha, rng), SUFF_TOL)
    jr = minimal_sufficient_jordan(m, tol)
    summary["minimal_jordan_dim"] = jr.algebra.dim
    t.add("jordan:sufficient", jr.sufficiency_residual,
          SUFF_TOL * (1 + max(fro(X) for X in m.operators)))
    t.add("jordan:schwarz", schwarz_residual(jr.beta_J, rng), SUFF_TOL)
    jl1, jl2 = jordan_ce_residuals(jr.beta_J, jr.algebra, rng)
    t.add("jordan:ce_jordan_product", jl1, SUFF_TOL)
    t.add("jordan:ce_sandwich", jl2, SUFF_TOL)
    cert = fixed_point_pipeline(m, alpha, tol, seed=seed)
    t.extend(cert.residuals, prefix="pipeline:")
    summary["pipeline_dims"] = {"A_J": cert.A_J.dim, "A_R": cert.A_R.dim, "A_C": cert.A_C.dim}
    t.extend(likelihood_in_algebra_check(cert, m, tol))
    if ki:
        dec = ki_decompose(m, cert, "star", rng, tol)
        t.extend(dec.residuals, prefix="ki:")
        summary["ki_blocks"] = [b.to_dict() for b in dec.structure.blocks]
    return t, summary


def ratio_membership_worst(A, m, tol=DEFAULT_TOL):
    R = likelihood_ratio_set(m, tol)
    worst = 0.0
    for X in R:
        ok, r = member(A, X, tol.member)
        worst = max(worst, r / (1.0 + fro(X)))
    return worst <= tol.member, worst


# ------------------------------------------------------------------ selftest

def trial_rng(seed, *key):
    """Independent generator for one trial, derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def _selftest_dim(seed, d, tol, models_per_dim):
    t = ResidualTable()
    trials = []
    for k in range(models_per_dim):
        rng = trial_rng(seed, d, k, 0)
        m = random_model(d, rng, n_states=2, n_derivs=1)
        tt, s = verify_model(m, tol, seed=int(rng.integers(2**31)))
        t.extend(tt, prefix=f"d{d}.model{k}:")
        trials.append({"trial_dim": d, "trial": k, "kind": "random", **s})
    rng = trial_rng(seed, d, 0, 1)
    blocks = random_blocks(rng, d, "star", kinds=("C", "R", "H"))
    blocks = [b for b in blocks if not (b.kind in "CH" and b.n == 1)]
    if blocks:
        m, _, _ = structured_model(blocks, rng)
        tt, s = verify_model(m, tol, seed=int(rng.integers(2**31)))
        t.extend(tt, prefix=f"d{d}.structured:")
        want = sorted((b.kind, b.n, b.m, b.m_twisted) for b in blocks)
        have = sorted((g["kind"], g["n"], g["m"], g["m_twisted"]) for g in s["ki_blocks"])
        t.add_flag(f"d{d}.structured:blocks_recovered", want == have)
        trials.append({"trial_dim": d, "kind": "structured",
                       "planted": [b.to_dict() for b in blocks], **s})
    for mode in ("star", "jordan"):
        rng = trial_rng(seed, d, 0, 2 if mode == "star" else 3)
        blocks, V, _ = random_canonical_algebra(rng, d, mode)
        S = identify_structure(V, mode, rng, tol)
        want = sorted((c.kind, c.n, c.m, c.m_twisted) for b in blocks
                      for c in canonical_descriptor(b.kind, b.n, b.m, b.m_twisted, mode))
        t.add_flag(f"d{d}.structure_{mode}:round_trip", S.descriptor_multiset() == want)
        t.add(f"d{d}.structure_{mode}:residual", S.residual, tol.struct)
    rng = trial_rng(seed, d, 0, 4)
    for kind in ("invariant", "degenerate", "generic"):
        A, rho = modular_pair(d, rng, kind)
        agree, _ = modular_agreement(modular_conditions(A, rho, rng, tol))
        t.add_flag(f"d{d}.modular_{kind}:conditions_agree", agree)
    return t.rows, trials


def selftest(seed, dims, tol=DEFAULT_TOL, models_per_dim=3, jobs=1):
    """Random-model suite; returns ``(table, summary)``.

    Every trial draws from its own generator keyed by ``(seed, dim, trial)``
    so results do not depend on the order in which trials run, and
    ``jobs > 1`` spreads the dimensions over worker processes without
    changing the output.
    """
    work = [(seed, d, tol, models_per_dim) for d in dims]
    if jobs > 1 and len(dims) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(dims))) as ex:
            parts = list(ex.map(_selftest_dim, *zip(*work)))
    else:
        parts = [_selftest_dim(*w) for w in work]
    t = ResidualTable()
    summary = {"seed": seed, "dims": list(dims), "trials": []}
    for rows, trials in parts:
        t.rows.extend(rows)
        summary["trials"].extend(trials)
    return t, summary
