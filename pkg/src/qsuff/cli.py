"""Command-line front end.

Every command reads a model file (except ``selftest``), runs one analysis
and writes a JSON report whose ``residual_table`` lists each numerical
check with its tolerance.  Exit status: 0 when every check passes, 1 when
one fails or the analysis breaks down, 2 for bad input or usage.
"""
import argparse
import sys

import numpy as np

from . import __version__
from .algebra import verify_predicates
from .checks import ratio_membership_worst, selftest, verify_model
from .errors import InputError, QsuffError
from .matcore import DEFAULT_TOL, fro
from .model import STATE, element_ratio, restrict_to_HS
from .modelfile import canonical_json, digest, model_to_dict, parse_model, parse_povm
from .report import ResidualTable
from .structure import (
    classical_fisher,
    identify_structure,
    jordan_dim,
    ki_decompose,
    sld_fisher,
    support_size_bound,
)
from .sufficiency import (
    SUFF_TOL,
    check_conditional_expectation,
    conditional_expectation,
    fixed_point_pipeline,
    minimal_sufficient_jordan,
    minimal_sufficient_star,
    schwarz_residual,
    verify_sufficient,
)

COMMANDS = ("restrict", "ratios", "minsuff", "jordan", "ce", "pipeline", "structure",
            "ki", "bound", "fisher", "verify", "selftest")


# ------------------------------------------------------------------ helpers

def _prepare(m, args):
    if args.no_restrict:
        return m
    return restrict_to_HS(m, args.tol_set)


def _add_predicates(t, V, rng, tol, prefix, skip=()):
    for name, (ok, val) in verify_predicates(V, rng, tol).items():
        if name not in skip:
            t.add_flag(f"{prefix}{name}", ok, val)


def _sufficiency_tol(m):
    return SUFF_TOL * (1 + max(fro(X) for X in m.operators))


# ----------------------------------------------------------------- commands

def cmd_restrict(m, args, rng):
    tol = args.tol_set
    r = restrict_to_HS(m, tol)
    V = r.isometry
    t = ResidualTable()
    t.add("isometry:orthonormal", fro(V.conj().T @ V - np.eye(r.dim)), tol.ortho * (1 + r.dim))
    P = V @ V.conj().T
    for e in m.elements:
        t.add(f"support_contains[{e.label}]", fro(P @ e.X @ P - e.X), tol.recon * (1 + fro(e.X)))
    return {"dim_input": m.dim, "dim": r.dim, "isometry": V, "model": model_to_dict(r)}, t


def cmd_ratios(m, args, rng):
    tol = args.tol_set
    m = _prepare(m, args)
    t = ResidualTable()
    out = []
    for e in m.elements:
        R = element_ratio(e, m.rho, tol)
        if e.kind == STATE:
            t.add(f"ratio_equation[{e.label}]", fro(R @ m.rho @ R - e.X), tol.recon * (1 + fro(e.X)))
            lam = np.linalg.eigvalsh(R)
            t.add(f"ratio_psd[{e.label}]", max(0.0, -lam[0]), tol.psd * (1 + abs(lam[-1])))
        else:
            t.add(f"ratio_equation[{e.label}]", fro(0.5 * (R @ m.rho + m.rho @ R) - e.X),
                  tol.recon * (1 + fro(e.X)))
        out.append({"label": e.label, "kind": e.kind,
                    "type": "sqrt_likelihood_ratio" if e.kind == STATE else "sld", "matrix": R})
    return {"dim": m.dim, "ratios": out}, t


def cmd_minsuff(m, args, rng):
    tol = args.tol_set
    m = _prepare(m, args)
    A = minimal_sufficient_star(m, args.scalars, tol)
    t = ResidualTable()
    skip = ("hermitian", "jordan_closed") + (("complex_closed",) if args.scalars == "real" else ())
    _add_predicates(t, A, rng, tol, "algebra:", skip=skip)
    _, r = ratio_membership_worst(A, m, tol)
    t.add("ratios_in_algebra", r, tol.member)
    alpha = conditional_expectation(A, m.rho, tol)
    t.add("conditional_expectation:sufficient", verify_sufficient(m, alpha)[1], _sufficiency_tol(m))
    return {"dim": m.dim, "scalars": args.scalars, "algebra_dim": A.dim, "basis": A.basis}, t


def cmd_jordan(m, args, rng):
    tol = args.tol_set
    m = _prepare(m, args)
    jr = minimal_sufficient_jordan(m, tol)
    t = ResidualTable()
    _add_predicates(t, jr.algebra, rng, tol, "algebra:",
                    skip=("star_closed", "mult_closed", "complex_closed"))
    t.add("beta_J:sufficient", jr.sufficiency_residual, _sufficiency_tol(m))
    t.add("beta_J:schwarz", schwarz_residual(jr.beta_J, rng), SUFF_TOL)
    _, r = ratio_membership_worst(jr.algebra, m, tol)
    t.add("ratios_in_algebra", r, tol.member)
    return {"dim": m.dim, "algebra_dim": jr.algebra.dim, "star_dim": jr.star_algebra.dim,
            "basis": jr.algebra.basis, "rho0": jr.rho0}, t


def cmd_ce(m, args, rng):
    tol = args.tol_set
    m = _prepare(m, args)
    A = minimal_sufficient_star(m, args.scalars, tol)
    alpha = conditional_expectation(A, m.rho, tol)
    t = check_conditional_expectation(alpha, A, m.rho, rng, tol)
    t.add("sufficient", verify_sufficient(m, alpha)[1], _sufficiency_tol(m))
    t.add("schwarz", schwarz_residual(alpha, rng), SUFF_TOL)
    return {"dim": m.dim, "algebra_dim": A.dim, "superoperator": alpha.matrix}, t


def _certificate(m, args, rng):
    tol = args.tol_set
    A = minimal_sufficient_star(m, "real", tol)
    alpha = conditional_expectation(A, m.rho, tol)
    return fixed_point_pipeline(m, alpha, tol, seed=args.seed)


def cmd_pipeline(m, args, rng):
    m = _prepare(m, args)
    cert = _certificate(m, args, rng)
    res = {"dim": m.dim, "A_J_dim": cert.A_J.dim, "A_R_dim": cert.A_R.dim,
           "A_C_dim": cert.A_C.dim, "omega": cert.omega, "rho0": cert.rho0}
    return res, cert.residuals


def cmd_structure(m, args, rng):
    tol = args.tol_set
    m = _prepare(m, args)
    if args.mode == "star":
        V = minimal_sufficient_star(m, args.scalars, tol)
    else:
        V = minimal_sufficient_jordan(m, tol).algebra
    S = identify_structure(V, args.mode, rng, tol)
    t = ResidualTable()
    t.add("canonical_form", S.residual, tol.struct)
    t.add("unitary", fro(S.U.conj().T @ S.U - np.eye(m.dim)), tol.struct)
    res = {"dim": m.dim, "algebra_dim": V.dim, **S.to_dict()}
    if args.mode == "jordan":
        res["jordan_dim"] = jordan_dim(S.blocks)
        t.add_flag("jordan_dim_matches_basis", res["jordan_dim"] == V.dim, res["jordan_dim"])
    return res, t


def cmd_ki(m, args, rng):
    m = _prepare(m, args)
    cert = _certificate(m, args, rng)
    ki = ki_decompose(m, cert, args.target, rng, args.tol_set)
    t = ResidualTable().extend(cert.residuals, prefix="certificate:")
    t.extend(ki.residuals)
    elems = [{"label": lab, "blocks": xs} for lab, xs in zip(ki.labels, ki.X_blocks)]
    return {"dim": m.dim, "target": args.target,
            "blocks": [b.to_dict() for b in ki.structure.blocks],
            "P": [list(P) for P in ki.P_blocks], "U": ki.U, "elements": elems}, t


def cmd_bound(m, args, rng):
    tol = args.tol_set
    m = _prepare(m, args)
    AJ = minimal_sufficient_jordan(m, tol).algebra
    S = identify_structure(AJ, "jordan", rng, tol)
    jd = jordan_dim(S.blocks)
    t = ResidualTable()
    t.add("canonical_form", S.residual, tol.struct)
    t.add_flag("jordan_dim_matches_basis", jd == AJ.dim, jd)
    bound = support_size_bound(S.blocks, args.params, args.setting)
    return {"dim": m.dim, "jordan_dim": jd, "blocks": [b.to_dict() for b in S.blocks],
            "setting": args.setting, "params": args.params, "bound": bound}, t


def cmd_fisher(m, args, rng):
    tol = args.tol_set
    povm, raw = parse_povm(args.povm, m.dim)
    args.extra_inputs.append(raw)
    derivs = [e.X for e in m.elements if e.kind != STATE]
    if not derivs:
        raise InputError("model has no derivative elements")
    J, dropped = classical_fisher(m.rho, derivs, povm, tol, return_dropped=True)
    Q = sld_fisher(m.rho, derivs, tol)
    t = ResidualTable()
    t.add("povm:resolves_identity", fro(sum(povm) - np.eye(m.dim)), tol.recon * (1 + np.sqrt(m.dim)))
    t.add("fisher:symmetric", fro(J - J.T), tol.recon * (1 + fro(J)))
    gap = np.linalg.eigvalsh(0.5 * (Q - J + (Q - J).T))
    t.add("fisher:below_sld_bound", max(0.0, -gap[0]), tol.recon * (1 + fro(Q)))
    return {"dim": m.dim, "labels": [e.label for e in m.elements if e.kind != STATE],
            "classical_fisher": J, "sld_fisher": Q, "dropped_outcomes": dropped}, t


def cmd_verify(m, args, rng):
    t, summary = verify_model(m, args.tol_set, seed=args.seed, scalars=args.scalars,
                              restrict=not args.no_restrict)
    return summary, t


def cmd_selftest(args):
    t, summary = selftest(args.seed, args.dims, args.tol_set, jobs=args.jobs)
    return summary, t


# ----------------------------------------------------------------- plumbing

def _dims(s):
    try:
        dims = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")
    if not dims or any(d < 1 for d in dims):
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return dims


def _positive_float(s):
    try:
        x = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if not x > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return x


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL.member,
                        help="membership tolerance (default %(default)g)")
    common.add_argument("--rank-tol", type=_positive_float, default=DEFAULT_TOL.rank,
                        help="relative eigenvalue cut for ranks and inverses (default %(default)g)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--out", help="write the report here instead of stdout")

    with_model = argparse.ArgumentParser(add_help=False, parents=[common])
    with_model.add_argument("model", help="model file (JSON)")
    with_model.add_argument("--no-restrict", action="store_true",
                            help="do not compress onto the joint support first")

    p = argparse.ArgumentParser(prog="qsuff", description="Sufficient subalgebras of quantum models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, helptext, parent=with_model):
        return sub.add_parser(name, help=helptext, parents=[parent])

    add("restrict", "compress the model onto the joint support of its elements")
    add("ratios", "square-root likelihood ratios and SLDs")
    s = add("minsuff", "minimal sufficient *-algebra")
    s.add_argument("--scalars", choices=("real", "complex"), default="real")
    add("jordan", "minimal sufficient Jordan algebra")
    s = add("ce", "conditional expectation onto the minimal sufficient algebra")
    s.add_argument("--scalars", choices=("real", "complex"), default="real")
    add("pipeline", "fixed-point certificate of the conditional expectation")
    s = add("structure", "block structure of the minimal sufficient algebra")
    s.add_argument("--mode", choices=("star", "jordan"), default="star")
    s.add_argument("--scalars", choices=("real", "complex"), default="real")
    s = add("ki", "block factorisation X = U ((+) x_i (x) P_i) U*")
    s.add_argument("--target", choices=("star", "jordan"), default="star")
    s = add("bound", "support-size bound for optimal measurements")
    s.add_argument("--setting", choices=("local", "bayesian"), default="local")
    s.add_argument("--params", type=int, default=1, help="number of parameters d")
    s = add("fisher", "classical Fisher information of a POVM")
    s.add_argument("--povm", required=True, help="POVM file (JSON)")
    s = add("verify", "full property suite on the model")
    s.add_argument("--scalars", choices=("real", "complex"), default="real")
    s = add("selftest", "property suite on random models", parent=common)
    s.add_argument("--dims", type=_dims, default=[2, 3, 4], help="comma-separated, e.g. 2,3,4")
    s.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    return p


_HANDLERS = {
    "restrict": cmd_restrict, "ratios": cmd_ratios, "minsuff": cmd_minsuff,
    "jordan": cmd_jordan, "ce": cmd_ce, "pipeline": cmd_pipeline,
    "structure": cmd_structure, "ki": cmd_ki, "bound": cmd_bound,
    "fisher": cmd_fisher, "verify": cmd_verify,
}


def _flag_record(args):
    skip = {"command", "format", "out", "model", "tol_set", "extra_inputs", "povm", "jobs"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(args):
    """Execute parsed arguments; returns ``(report_dict, exit_code)``.

    Raises :class:`InputError` for bad input files.
    """
    args.tol_set = DEFAULT_TOL.replace(member=args.tol, rank=args.rank_tol)
    args.extra_inputs = []
    rng = np.random.default_rng(args.seed)
    raw = b""
    error = None
    try:
        if args.command == "selftest":
            results, table = cmd_selftest(args)
        else:
            m, raw = parse_model(args.model, args.tol_set)
            results, table = _HANDLERS[args.command](m, args, rng)
    except InputError:
        raise
    except QsuffError as exc:
        results, table = {}, ResidualTable()
        error = f"{type(exc).__name__}: {exc}"
    flags = _flag_record(args)
    report = {
        "command": args.command,
        "version": __version__,
        "inputs_digest": digest(args.command, canonical_json(flags), raw, *args.extra_inputs),
        "flags": flags,
        "seed": args.seed,
        "tolerances": {**args.tol_set.as_dict(), "sufficiency": SUFF_TOL},
        "results": results,
        "residual_table": table.to_list(),
        "passed": error is None and table.passed,
    }
    if error is not None:
        report["error"] = error
    return report, 0 if report["passed"] else 1


def format_text(report):
    lines = [f"qsuff {report['command']}: {'PASS' if report['passed'] else 'FAIL'}",
             f"inputs digest {report['inputs_digest']}"]
    if "error" in report:
        lines.append(f"error: {report['error']}")
    for k, v in sorted(report["results"].items()):
        if isinstance(v, (int, float, str)) or (isinstance(v, list) and len(v) <= 8
                                                and all(isinstance(x, (int, str)) for x in v)):
            lines.append(f"  {k}: {v}")
        elif k == "blocks":
            lines.append(f"  blocks: {', '.join(_block_str(b) for b in v)}")
    rows = report["residual_table"]
    bad = [r for r in rows if not r["pass"]]
    lines.append(f"{len(rows)} checks, {len(bad)} failing")
    for r in bad:
        lines.append(f"  FAIL {r['check']}: {r['value']:.3e} (tol {r['tol']:.1e})")
    return "\n".join(lines) + "\n"


def _block_str(b):
    s = f"({b['kind']},{b['n']},{b['m']}"
    return s + (f",{b['m_twisted']})" if b.get("m_twisted") else ")")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report, code = run(args)
    except InputError as exc:
        print(f"qsuff: input error: {exc}", file=sys.stderr)
        return 2
    text = canonical_json(report) + "\n" if args.format == "json" else format_text(report)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"qsuff: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
