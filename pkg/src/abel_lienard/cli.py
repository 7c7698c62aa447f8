"""Command-line front end: check, solve, verify, invariants, reduce.

Exit status: 0 success, 1 condition violated or verification failed,
2 input error, 3 numerical failure. Results go to stdout, diagnostics to
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import conditions as cond
from .conditions import short_sci
from .errors import LienardError, NumericalError, PreconditionError, ProblemFileError
from .fileio import CSV_COLUMNS, ProblemFile, curve_to_csv, fmt, load_problem, read_curve_csv
from .invariants import (
    S3_VARIANTS,
    I3_FORMS,
    absolute_invariants,
    classical_particular_reduction,
    normal_form,
    relative_invariants,
)
from .model import ClassicalAbel, identically_zero, lienard_to_abel, quadratic_cubic_form
from .solvers import (
    solve_riccati,
    solve_theorem1,
    solve_theorem2,
    solve_theorem3,
    solve_theorem4,
)
from .verify import abel_residual, crosscheck_reference, lienard_residual, pointwise_lienard

EXIT_OK, EXIT_VIOLATED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
BOUNDS = {"abel": 1e-6, "lienard": 1e-5, "crosscheck": 1e-5}
CONDITION_CHOICES = ("t1", "t2", "t3", "t4", "riccati", "chiellini")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _need(constants: dict, key: str, theorem: str) -> float:
    if key not in constants:
        raise ProblemFileError(f"solve.constants.{key} is required for {theorem}")
    return constants[key]


# ------------------------------------------------------------------ check


def _report_lines(report) -> list[str]:
    lines = [f"{report.condition_id} {report.verdict}, residual {short_sci(report.residual_max)}"]
    for key, value in report.constants.items():
        lines.append(f"  {key} = {value:.12g}")
    if report.notes:
        lines.append(f"  note: {report.notes}")
    return lines


THEOREM_CONDITION = {"T1": "t1", "T2": "t2", "T3": "t3", "T4": "t4", "riccati": "riccati"}


def _one_check(pf: ProblemFile, which: str, form: str, P: float) -> list:
    prob, tol = pf.lienard, pf.condition_tol
    if which == "t1":
        return [cond.check_theorem1(prob, tol)]
    if which == "t2":
        return [cond.check_theorem2(prob, tol, pf.tolerances)]
    if which == "t3":
        if pf.particular is None:
            raise ProblemFileError("condition t3 needs a 'particular' block with v_p")
        return [cond.check_theorem3(prob, pf.particular, tol, form=form)]
    if which == "t4":
        return [cond.check_generalized_chiellini(prob, tol, P, "a"),
                cond.check_generalized_chiellini(prob, tol, P, "b")]
    if which == "riccati":
        if (prob.n, prob.m) != (3.0, 1.0):
            raise PreconditionError("the Riccati condition needs n = 3, m = 1")
        return [cond.check_riccati(prob.f, prob.k, prob.domain, tol, prob.samples)]
    ab = lienard_to_abel(prob)
    if (ab.alpha, ab.beta) != (1.0, 0.0) or not (
        identically_zero(prob.f, prob.grid) and identically_zero(prob.k, prob.grid)
    ):
        raise PreconditionError("the Chiellini condition needs dv/dy = g v^2 + h v^3")
    return [cond.check_chiellini(prob.h, prob.g, prob.domain, tol, prob.samples, "y")]


def _run_checks(pf: ProblemFile, which: str | None, form: str, P: float) -> tuple[list, bool]:
    """Reports plus whether all of them (True) or any of them (False) must hold."""
    if pf.classical is not None:
        eq = pf.classical
        if which not in (None, "chiellini"):
            raise ProblemFileError(f"condition {which} needs an 'equation' block")
        if not (identically_zero(eq.r, eq.grid) and identically_zero(eq.s, eq.grid)):
            raise PreconditionError("the Chiellini condition applies to y' = p y^3 + q y^2 (r = s = 0)")
        return [cond.check_chiellini(eq.p, eq.q, eq.domain, pf.condition_tol, eq.samples, eq.variable)], True
    if which is None and pf.solve is not None:
        which = THEOREM_CONDITION[pf.solve.theorem]
    if which is not None:
        return _one_check(pf, which, form, P), True
    prob = pf.lienard
    ids = [i.lower().replace("t4a", "t4") for i in cond.applicable_conditions(prob)]
    if pf.particular is not None and (prob.n, prob.m) == (2.0, 3.0):
        ids.append("t3")
    reports = []
    for w in ids:
        try:
            reports += _one_check(pf, w, form, P)
        except PreconditionError as exc:
            print(f"note: {w} not applicable: {exc}", file=sys.stderr)
    if not reports:
        raise PreconditionError("no integrability condition applies to this equation")
    return reports, False


def cmd_check(args) -> int:
    pf = load_problem(args.file)
    reports, need_all = _run_checks(pf, args.condition, args.form, args.P)
    if args.format == "yaml":
        print(yaml.safe_dump([r.to_dict() for r in reports], sort_keys=False), end="")
    else:
        for r in reports:
            print("\n".join(_report_lines(r)))
    verdicts = [r.satisfied for r in reports]
    ok = all(verdicts) if need_all else any(verdicts)
    return EXIT_OK if ok else EXIT_VIOLATED


# ------------------------------------------------------------------ solve / verify


def build_curve(pf: ProblemFile):
    if pf.solve is None:
        raise ProblemFileError("the problem file has no 'solve' block")
    if pf.lienard is None:
        raise ProblemFileError("solve needs an 'equation' block")
    spec, prob, tol = pf.solve, pf.lienard, pf.tolerances
    c = spec.constants
    x0 = c.get("x0")
    if spec.theorem == "T1":
        return solve_theorem1(prob, _need(c, "C", "T1"), spec.branch, x0, tol)
    if spec.theorem == "T2":
        return solve_theorem2(prob, _need(c, "S", "T2"), c.get("K0"), spec.branch, x0, spec.anchor,
                              spec.normalization, tol)
    if spec.theorem == "T3":
        if pf.particular is None:
            raise ProblemFileError("T3 needs a 'particular' block with v_p")
        if spec.anchor is None:
            raise ProblemFileError("T3 needs solve.anchor")
        return solve_theorem3(prob, pf.particular, _need(c, "S", "T3"), spec.anchor, x0, tol)
    if spec.theorem == "T4":
        if spec.anchor is None:
            raise ProblemFileError("T4 needs solve.anchor")
        return solve_theorem4(prob, _need(c, "S", "T4"), c.get("P", 1.0), spec.anchor, x0, tol)
    if (prob.n, prob.m) != (3.0, 1.0) or not (
        identically_zero(prob.g, prob.grid) and identically_zero(prob.h, prob.grid)
    ):
        raise PreconditionError("riccati needs n = 3, m = 1 and g = h = 0")
    return solve_riccati(prob.f, prob.k, _need(c, "K", "riccati"), _need(c, "C", "riccati"),
                         prob.domain, prob.samples, x0, tol)


def run_verification(curve, pf: ProblemFile) -> dict:
    """All three checks; Lienard and cross-check run on every monotone segment."""
    prob = pf.lienard
    out = {"abel": abel_residual(curve, prob).max_rel, "lienard": 0.0, "crosscheck": 0.0}
    segments = [s for s in curve.monotone_segments if s[1] - s[0] + 1 >= 5]
    if not segments:
        raise PreconditionError("no monotone segment with 5 or more samples")
    for i in range(len(curve.monotone_segments)):
        seg = curve.monotone_segments[i]
        if seg[1] - seg[0] + 1 < 5:
            continue
        out["lienard"] = max(out["lienard"], lienard_residual(curve, prob, i).max_rel)
        out["crosscheck"] = max(out["crosscheck"], crosscheck_reference(curve, prob, pf.tolerances, i).max_rel)
    return out


def _verdict_lines(results: dict) -> tuple[bool, list[str]]:
    ok, lines = True, []
    for key, value in results.items():
        passed = value <= BOUNDS[key]
        ok &= passed
        lines.append(f"{key} {'pass' if passed else 'FAIL'}: max_rel {short_sci(value)} (bound {BOUNDS[key]:g})")
    return ok, lines


def cmd_solve(args) -> int:
    pf = load_problem(args.file)
    curve = build_curve(pf)
    prob = pf.lienard
    res_abel = abel_residual(curve, prob).pointwise
    res_lien = pointwise_lienard(curve, prob).pointwise
    results = run_verification(curve, pf)
    ok, lines = _verdict_lines(results)
    header = {f"max_rel {k}": v for k, v in results.items()}
    for note in curve.notes:
        header.setdefault("note", note)
    text = curve_to_csv(curve, res_abel, res_lien, header)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for line in lines:
        print(line, file=sys.stderr)
    return EXIT_OK if ok else EXIT_VIOLATED


def cmd_verify(args) -> int:
    curve = read_curve_csv(args.curve)
    pf = load_problem(args.file)
    if pf.lienard is None:
        raise ProblemFileError("verify needs an 'equation' block")
    if len(curve.y) != pf.lienard.samples:
        print("note: curve length differs from domain.samples", file=sys.stderr)
    results = run_verification(curve, pf)
    ok, lines = _verdict_lines(results)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_VIOLATED


# ------------------------------------------------------------------ invariants / reduce


def _classical(pf: ProblemFile) -> ClassicalAbel:
    if pf.classical is not None:
        return pf.classical
    eq = quadratic_cubic_form(lienard_to_abel(pf.lienard))
    eq.require_cubic()
    return eq


def _table(columns: dict) -> str:
    names = list(columns)
    rows = [",".join(names)]
    for row in zip(*columns.values()):
        rows.append(",".join(fmt(v) for v in row))
    return "\n".join(rows) + "\n"


def cmd_invariants(args) -> int:
    eq = _classical(load_problem(args.file))
    seq = relative_invariants(eq, max(args.count, 4), args.variant)
    inv = absolute_invariants(seq, i3_form=args.i3_form)
    nan = np.full_like(seq.grid, np.nan)
    lines = [f"# S3 formula: {args.variant}", f"# I3 formula: {args.i3_form}"]
    for name in ("I1", "I2", "I3"):
        if getattr(inv, name) is None:
            lines.append(f"# {name}: undefined")
        elif inv.constant.get(name):
            lines.append(f"# {name}: constant {inv.values[name]:.12g}")
        else:
            lines.append(f"# {name}: not constant")
    cols = {eq.variable: seq.grid}
    for w in (3, 5, 7):
        cols[f"S{w}"] = seq[w]
    cols["I1"] = inv.I1 if inv.I1 is not None else nan
    cols["I2"] = inv.I2 if inv.I2 is not None else nan
    sys.stdout.write("\n".join(lines) + "\n" + _table(cols))
    return EXIT_OK


def cmd_reduce(args) -> int:
    eq = _classical(load_problem(args.file))
    if args.normal_form:
        nf = normal_form(eq)
        head = {"record": "normal_form", "equation": nf.equation, "integrable": nf.integrable,
                "I_value": nf.I_value}
        cols = {eq.variable: nf.grid, "omega": nf.omega, "xi": nf.xi, "I": nf.I}
    else:
        red = classical_particular_reduction(eq, args.particular)
        head = {"record": "particular_reduction", "y1": args.particular, "separable": red.separable,
                "max_residual": red.max_residual}
        cols = {eq.variable: red.grid, "E": red.E, "Phi1": red.Phi1, "Phi2": red.Phi2}
    lines = [f"# {k}: {json.dumps(v)}" for k, v in head.items()]
    sys.stdout.write("\n".join(lines) + "\n" + _table(cols))
    return EXIT_OK


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abel-lienard", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check integrability conditions")
    p.add_argument("file")
    p.add_argument("--condition", type=str.lower, choices=CONDITION_CHOICES)
    p.add_argument("--form", choices=cond.THEOREM3_FORMS, default="first_order",
                   help="which form of the T3 condition to check")
    p.add_argument("--P", type=float, default=1.0, help="P for the generalized Chiellini condition")
    p.add_argument("--format", choices=("text", "yaml"), default="text")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", help="construct a solution curve")
    p.add_argument("file")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="re-verify a curve CSV against its problem")
    p.add_argument("curve")
    p.add_argument("file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("invariants", help="relative and absolute invariants table")
    p.add_argument("file")
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--variant", choices=S3_VARIANTS, default="standard")
    p.add_argument("--i3-form", choices=I3_FORMS, default="standard")
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("reduce", help="normal form or particular-solution reduction")
    p.add_argument("file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--normal-form", action="store_true")
    group.add_argument("--particular", metavar="EXPR")
    p.set_defaults(func=cmd_reduce)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except NumericalError as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_NUMERIC
    except (LienardError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


__all__ = ["run", "main", "build_parser", "short_sci", "CSV_COLUMNS"]
