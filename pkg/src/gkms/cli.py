"""Command line front end: ``gkms <command> ...``.

Exit status: 0 success, 2 when the computation answers "no" (not KMS, empty
conformal cone, conditions diverge), 1 for invalid input or any other error.
Errors are reported as one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import graphs
from .algebra import NORM_TOL, conditional_expectation, reduced_norm
from .dynamics import InnerAction, extract_cocycle, fixes_units_subalgebra, is_diagonal_action, preserves_units_subalgebra
from .errors import GkmsError, MissingFlag, NotACocycle, PreconditionViolated, UnknownCommand, UsageError
from .groupoid import (
    cyclic_group,
    groupoid_document,
    pair_groupoid,
    structural_report,
    symmetric_group,
)
from .io import dump_document, load_model
from .kms import (
    CENTER_SEED,
    KMS_TOL,
    KmsFunctional,
    check_pair,
    diagonalize_kms,
    equivalence_battery,
    is_diagonal_functional,
    kms_set,
    neshveyev_decompose,
    neshveyev_reconstruct,
    verify_kms,
)

SIG_DIGITS = 12
OK, ERROR, NEGATIVE = 0, 1, 2


# ---------------------------------------------------------------------------
# reports


def canon(obj):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {_key(k): canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canon(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        x = float(f"{x:.{SIG_DIGITS}g}")
        return 0.0 if x == 0 else x
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": canon(obj.real), "im": canon(obj.imag)}
    if isinstance(obj, np.ndarray):
        return canon(obj.tolist())
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _key(k) -> str:
    if isinstance(k, str):
        return k
    if isinstance(k, tuple):
        return json.dumps(canon(list(k)), separators=(",", ":"))
    return str(canon(k)) if isinstance(k, (float, np.floating)) else str(k)


@dataclass
class Report:
    command: list
    inputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    hypotheses: dict = field(default_factory=dict)
    status: int = OK

    def as_dict(self) -> dict:
        return canon({
            "command": self.command,
            "inputs": self.inputs,
            "results": self.results,
            "residuals": self.residuals,
            "hypotheses": self.hypotheses,
            "exit_status": self.status,
        })

    def machine(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))

    def pretty(self) -> str:
        lines: list[str] = []
        _render(self.as_dict(), 0, lines)
        return "\n".join(lines)


def _render(obj, depth, lines):
    pad = "  " * depth
    if isinstance(obj, dict):
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, (dict, list)) and v and not _is_leaf_list(v):
                lines.append(f"{pad}{k}:")
                _render(v, depth + 1, lines)
            else:
                lines.append(f"{pad}{k}: {json.dumps(v, sort_keys=True)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)) and v and not _is_leaf_list(v):
                lines.append(f"{pad}-")
                _render(v, depth + 1, lines)
            else:
                lines.append(f"{pad}- {json.dumps(v, sort_keys=True)}")


def _is_leaf_list(v) -> bool:
    return isinstance(v, list) and all(not isinstance(x, (dict, list)) for x in v)


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        if "invalid choice" in message:
            raise UnknownCommand(message)
        if "required" in message:
            raise MissingFlag(message)
        raise UsageError(message)


def _betas(text: str) -> list[float]:
    try:
        return [float(b) for b in text.split(",") if b.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("pretty", "machine"), default="pretty")
    common.add_argument("--tol", type=float, default=None, help="acceptance tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=CENTER_SEED, help="seed for generic central elements")
    common.add_argument("--depth", type=int, default=3, help="cylinder depth for path spaces")

    p = _Parser(prog="gkms", description="KMS states on finite groupoid and graph algebras")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    mk = sub.add_parser("make", help="write a model document to stdout")
    mk.add_argument("builder", choices=("pair", "cyclic", "symmetric", "o2", "complete", "path"))
    mk.add_argument("n", type=int, nargs="?", default=2)
    mk.add_argument("--constant", type=float, default=None, help="emit a constant potential instead of the graph")

    c = sub.add_parser("check", parents=[common], help="validate a document and report its structure")
    c.add_argument("model")

    a = sub.add_parser("algebra", parents=[common], help="norms, adjoints and products of elements")
    a.add_argument("model")
    a.add_argument("--element", required=True)
    a.add_argument("--other")

    d = sub.add_parser("dynamics", parents=[common], help="classify an inner action")
    d.add_argument("model")
    d.add_argument("--hamiltonian", required=True)

    k = sub.add_parser("kms", help="KMS functionals")
    ksub = k.add_subparsers(dest="kms_command", required=True, parser_class=_Parser)
    ks = ksub.add_parser("solve", parents=[common])
    ks.add_argument("model")
    ks.add_argument("--hamiltonian", required=True)
    ks.add_argument("--beta", type=float)
    ks.add_argument("--betas", type=_betas)
    kv = ksub.add_parser("verify", parents=[common])
    kv.add_argument("model")
    kv.add_argument("--hamiltonian", required=True)
    kv.add_argument("--beta", type=float, required=True)
    kv.add_argument("--functional", required=True, help="algebra-element document listing psi(delta_g)")
    kd = ksub.add_parser("decompose", parents=[common])
    kd.add_argument("model")
    kd.add_argument("--hamiltonian", required=True)
    kd.add_argument("--beta", type=float, required=True)
    kd.add_argument("--functional", help="defaults to every extreme KMS state")
    kb = ksub.add_parser("battery", parents=[common])
    kb.add_argument("model")
    kb.add_argument("--hamiltonian", required=True)
    kb.add_argument("--betas", type=_betas, required=True)

    g = sub.add_parser("graph", help="graph path spaces and potentials")
    gsub = g.add_subparsers(dest="graph_command", required=True, parser_class=_Parser)
    gc = gsub.add_parser("critical-beta", parents=[common])
    gc.add_argument("model")
    gc.add_argument("--potential", help="defaults to F = 1")
    gf = gsub.add_parser("conformal", parents=[common])
    gf.add_argument("model")
    gf.add_argument("--beta", type=float, required=True)
    gf.add_argument("--potential", help="defaults to F = 1")
    gv = gsub.add_parser("var", parents=[common])
    gv.add_argument("model")
    gv.add_argument("--potential", required=True)
    gv.add_argument("--n", type=int, required=True)
    gv.add_argument("--vertex", required=True)
    gv.add_argument("--horizon", type=int, default=64)

    r = sub.add_parser("remark007", parents=[common], help="check the b_n sequence on 1..n")
    r.add_argument("--n", type=int, default=100000)
    r.add_argument("--kappa", type=float, default=0.3)
    r.add_argument("--power", type=float, default=0.9)
    return p


# ---------------------------------------------------------------------------
# commands


def _tol(args, default=KMS_TOL) -> float:
    return default if args.tol is None else args.tol


def _load(report: Report, path, expect=None):
    doc = load_model(path, expect)
    report.inputs[str(path)] = doc.digest
    return doc


def _action(report, args, g):
    h = _load(report, args.hamiltonian, "algebra-element").element(g)
    return InnerAction(h)


def cmd_check(args, report):
    doc = _load(report, args.model)
    report.results["kind"] = doc.kind
    if doc.kind == "groupoid":
        g = doc.groupoid()
        rep = structural_report(g)
        report.results.update(units=len(g.units), arrows=len(g.arrows), structure=rep.as_dict())
        report.hypotheses.update(
            has_trivially_isotropic_unit=bool(rep.trivially_isotropic_units), is_minimal=rep.is_minimal
        )
    elif doc.kind == "graph":
        gr = doc.graph()
        acyclic = gr.is_acyclic()
        report.results.update(
            vertices=len(gr.vertices), edges=len(gr.edges),
            sinks=sorted(map(str, gr.sinks)), infinite_emitters=sorted(map(str, gr.infinite_emitters)),
            acyclic=acyclic, strongly_connected=gr.is_strongly_connected(),
        )
        space = graphs.build_path_space(gr, args.depth)
        report.results["cylinders"] = {str(n): len(space.cylinders(n)) for n in range(args.depth + 1)}
        if acyclic:
            report.results["omega"] = [str(x) for x in space.points]
    else:
        report.results["valid"] = True


def cmd_algebra(args, report):
    g = _load(report, args.model, "groupoid").groupoid()
    f = _load(report, args.element, "algebra-element").element(g)
    fs = f.star()
    norm = reduced_norm(f)
    res = {
        "norm": norm,
        "star": fs.as_dict(),
        "self_adjoint": fs.distance(f) <= _tol(args),
        "conditional_expectation": conditional_expectation(f).as_dict(),
    }
    report.residuals["c_star_identity"] = abs(reduced_norm(fs * f) - norm ** 2)
    if args.other:
        h = _load(report, args.other, "algebra-element").element(g)
        res["product"] = (f * h).as_dict()
        res["other_norm"] = reduced_norm(h)
        report.residuals["norm_submultiplicative"] = max(0.0, reduced_norm(f * h) - norm * reduced_norm(h))
    report.results.update(res)
    if report.residuals["c_star_identity"] > NORM_TOL * max(1.0, norm ** 2):
        report.status = NEGATIVE


def cmd_dynamics(args, report):
    g = _load(report, args.model, "groupoid").groupoid()
    a = _action(report, args, g)
    tol = _tol(args, 1e-10)
    fixes = fixes_units_subalgebra(a, tol)
    c = is_diagonal_action(a, tol)
    report.results.update(
        fixes_units_subalgebra=fixes,
        preserves_units_subalgebra=preserves_units_subalgebra(a, tol),
        diagonal=c is not None,
        spectrum=a.eigvals,
    )
    if c is not None:
        report.results["cocycle"] = c.as_dict()
    elif fixes:
        try:
            extract_cocycle(a, tol)
        except (NotACocycle, PreconditionViolated) as exc:
            report.results["cocycle_error"] = exc.code


def _functional_doc(f: KmsFunctional) -> dict:
    return f.as_dict(1e-15)


def cmd_kms_solve(args, report):
    g = _load(report, args.model, "groupoid").groupoid()
    a = _action(report, args, g)
    betas = args.betas or ([args.beta] if args.beta is not None else None)
    if not betas:
        raise MissingFlag("kms solve needs --beta or --betas")
    out = {}
    worst = 0.0
    for b in betas:
        fam = kms_set(a, b, seed=args.seed)
        states = []
        for e in fam.extreme_points:
            chk = verify_kms(e, a, b)
            worst = max(worst, chk.residual)
            states.append({"values": _functional_doc(e), "diagonal": is_diagonal_functional(e),
                           "kms_residual": chk.residual})
        out[b] = {"extreme_points": len(states), "center_dimension": len(fam.center_basis), "states": states}
    report.results["betas"] = out
    report.residuals["kms"] = worst


def cmd_kms_verify(args, report):
    g = _load(report, args.model, "groupoid").groupoid()
    a = _action(report, args, g)
    vals = _load(report, args.functional, "algebra-element").element(g).coeffs
    w = KmsFunctional.from_values(g, vals, args.beta)
    chk = verify_kms(w, a, args.beta)
    tol = _tol(args)
    positive = w.min_eigenvalue() >= -tol
    report.results.update(
        is_kms=bool(chk.residual <= tol and positive), positive=positive,
        diagonal=is_diagonal_functional(w), per_element=chk.per_element,
    )
    report.residuals.update(kms=chk.residual, basis=chk.basis_residual, cross=chk.cross_residual,
                            invariance=chk.invariance_defect)
    if not report.results["is_kms"]:
        report.status = NEGATIVE


def cmd_kms_decompose(args, report):
    g = _load(report, args.model, "groupoid").groupoid()
    a = _action(report, args, g)
    c = is_diagonal_action(a)
    if c is None:
        report.results["diagonal_action"] = False
        report.status = NEGATIVE
        return
    tol = _tol(args)
    if args.functional:
        vals = _load(report, args.functional, "algebra-element").element(g).coeffs
        funcs = [KmsFunctional.from_values(g, vals, args.beta)]
    else:
        funcs = kms_set(a, args.beta, seed=args.seed).extreme_points
    pairs, worst_pair, worst_round = [], 0.0, 0.0
    for w in funcs:
        pair = neshveyev_decompose(w, c, args.beta, tol)
        chk = check_pair(g, pair, c, args.beta, tol)
        back = neshveyev_reconstruct(g, pair, c, args.beta, tol)
        diag = diagonalize_kms(w, c, args.beta, tol)
        worst_pair = max(worst_pair, chk.residual)
        worst_round = max(worst_round, back.distance(w))
        pairs.append({**pair.as_dict(), "diagonalized": _functional_doc(diag)})
    report.results.update(diagonal_action=True, cocycle=c.as_dict(), pairs=pairs)
    report.residuals.update(conditions=worst_pair, roundtrip=worst_round)


def cmd_kms_battery(args, report):
    g = _load(report, args.model, "groupoid").groupoid()
    a = _action(report, args, g)
    rep = equivalence_battery(g, a, args.betas)
    d = rep.as_dict()
    report.hypotheses.update(d.pop("hypotheses"), hold=d.pop("hypotheses_hold"))
    report.results.update(d)
    if not rep.all_equal:
        report.status = NEGATIVE


def _graph_and_potential(report, args, required=False):
    gr = _load(report, args.model, "graph").graph()
    if args.potential:
        f = _load(report, args.potential, "potential").potential()
    elif required:
        raise MissingFlag("--potential is required")
    else:
        f = graphs.Potential.constant(gr)
    return gr, f


def cmd_graph_critical(args, report):
    gr, f = _graph_and_potential(report, args)
    tol = _tol(args, 1e-10)
    beta = graphs.critical_beta(gr, f, tol)
    hb, f1 = graphs.higher_block(gr, f)
    rho = graphs.transfer_matrix(hb, f1, beta).spectral_radius()
    sol = graphs.cylinder_conformal_solve(hb, f1, beta)
    report.results.update(critical_beta=beta, conformal_rays=sol.as_dicts())
    report.residuals["spectral_radius_minus_one"] = abs(rho - 1.0)


def cmd_graph_conformal(args, report):
    gr, f = _graph_and_potential(report, args)
    sol = graphs.cylinder_conformal_solve(gr, f, args.beta)
    a = graphs.transfer_matrix(gr, f, args.beta)
    report.results.update(
        beta=args.beta, rays=sol.as_dicts(), spectral_radius=a.spectral_radius(),
        scope="cylinder masses m_v = mu(Z(v)) and atoms at V_inf; no field-of-states data",
    )
    report.residuals["cylinder"] = max(
        (graphs.cylinder_residual(gr, f, args.beta, m, at) for m, at in sol.rays), default=0.0
    )
    if sol.is_empty:
        report.results["message"] = "no non-zero conformal measure at this beta"
        report.status = NEGATIVE


def cmd_graph_var(args, report):
    gr, f = _graph_and_potential(report, args, required=True)
    matches = [v for v in gr.vertices if str(v) == args.vertex]
    if not matches:
        raise UsageError(f"unknown vertex {args.vertex!r}")
    v = matches[0]
    value = graphs.var_nv(gr, f, args.n, v, args.horizon)
    bound = 2 * (f.depth - 1) * f.max_abs
    report.results.update(var=value, n=args.n, vertex=args.vertex, depth=f.depth, bound=bound)
    report.residuals["bound_excess"] = max(0.0, value - bound)


def cmd_remark007(args, report):
    rep = graphs.remark007_sequence(args.n, args.kappa, power=args.power)
    report.results.update(rep.as_dict())
    if not (rep.monotone and rep.mass_ok and rep.a_nonnegative):
        report.status = NEGATIVE


def cmd_make(args) -> str:
    n = args.n
    if args.builder in ("pair", "cyclic", "symmetric"):
        g = {"pair": pair_groupoid, "cyclic": cyclic_group, "symmetric": symmetric_group}[args.builder](n)
        return dump_document(groupoid_document(g))
    if args.builder == "o2":
        gr = graphs.DirectedGraph(["v"], [("a", "v", "v"), ("b", "v", "v")])
    elif args.builder == "complete":
        vs = list(range(n))
        gr = graphs.DirectedGraph(vs, [(f"e{i}{j}", i, j) for i in vs for j in vs])
    else:
        vs = list(range(n + 1))
        gr = graphs.DirectedGraph(vs, [(f"e{i}", i, i + 1) for i in range(n)])
    if args.constant is not None:
        return dump_document(graphs.potential_document(graphs.Potential.constant(gr, args.constant)))
    return dump_document(graphs.graph_document(gr))


COMMANDS = {
    ("check",): cmd_check,
    ("algebra",): cmd_algebra,
    ("dynamics",): cmd_dynamics,
    ("kms", "solve"): cmd_kms_solve,
    ("kms", "verify"): cmd_kms_verify,
    ("kms", "decompose"): cmd_kms_decompose,
    ("kms", "battery"): cmd_kms_battery,
    ("graph", "critical-beta"): cmd_graph_critical,
    ("graph", "conformal"): cmd_graph_conformal,
    ("graph", "var"): cmd_graph_var,
    ("remark007",): cmd_remark007,
}


def execute(argv: list[str]) -> tuple[int, str]:
    """Run one invocation; returns (exit status, stdout text).  Errors propagate."""
    args = build_parser().parse_args(argv)
    if args.command == "make":
        return OK, cmd_make(args)
    key = tuple(x for x in (args.command, getattr(args, "kms_command", None), getattr(args, "graph_command", None)) if x)
    handler = COMMANDS.get(key)
    if handler is None:
        raise UnknownCommand(" ".join(key))
    report = Report(command=list(key))
    handler(args, report)
    text = report.machine() if args.format == "machine" else report.pretty()
    return report.status, text + "\n"


def error_record(exc: BaseException) -> str:
    rec = {"error": exc.code if isinstance(exc, GkmsError) else type(exc).__name__, "message": str(exc)}
    for attr in ("offset", "location", "cycle", "witness"):
        if hasattr(exc, attr) and getattr(exc, attr) is not None:
            rec[attr] = canon(getattr(exc, attr))
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        status, text = execute(argv)
    except Exception as exc:  # every failure becomes one machine-readable line
        sys.stderr.write(error_record(exc) + "\n")
        return ERROR
    sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
