"""YAML problem files and CSV curve files.

Problem file layout (one problem per file, unknown keys are rejected)::

    equation:            # extended Lienard form ...
      n: 2
      m: 3
      f: "1"
      k: "-1"
      g: "3"
      h: "1"
    classical:           # ... or the classical Abel form (exactly one of the two)
      p: "1"
      q: "0"
      r: "1"
      s: "1"
    domain: {min: 0, max: 1, samples: 201}
    particular: {v_p: "-1"}
    solve:
      theorem: T1        # T1 | T2 | T3 | T4 | riccati
      constants: {C: 0.25, x0: 0}
      branch: "+"
      anchor: {y: 1, theta: 0.5}
      normalization: continuous
    tolerances: {quad_rel: 1.0e-10, condition: 1.0e-6}
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import LienardError, ProblemFileError
from .model import ClassicalAbel, LienardProblem, _as_expr
from .numerics import DEFAULT_TOL, Tolerances

TOP_KEYS = {"equation", "classical", "domain", "particular", "solve", "tolerances"}
EQUATION_KEYS = {"n", "m", "f", "k", "g", "h"}
CLASSICAL_KEYS = {"p", "q", "r", "s"}
DOMAIN_KEYS = {"min", "max", "samples"}
PARTICULAR_KEYS = {"v_p"}
SOLVE_KEYS = {"theorem", "constants", "branch", "anchor", "normalization"}
ANCHOR_KEYS = {"y", "theta"}
CONSTANT_KEYS = {"C", "S", "K0", "K", "P", "x0"}
TOLERANCE_KEYS = set(Tolerances.__dataclass_fields__) | {"condition"}
THEOREMS = ("T1", "T2", "T3", "T4", "riccati")
CSV_COLUMNS = ("y", "v", "u", "x", "residual_abel", "residual_lienard")


@dataclass
class SolveSpec:
    theorem: str
    constants: dict = field(default_factory=dict)
    branch: str = "+"
    anchor: tuple[float, float] | None = None
    normalization: str = "continuous"


@dataclass
class ProblemFile:
    lienard: LienardProblem | None
    classical: ClassicalAbel | None
    particular: str | None
    solve: SolveSpec | None
    tolerances: Tolerances
    condition_tol: float
    source: str = ""


def _check_keys(block, allowed: set, where: str) -> dict:
    if block is None:
        return {}
    if not isinstance(block, dict):
        raise ProblemFileError(f"'{where}' must be a mapping")
    unknown = set(block) - allowed
    if unknown:
        raise ProblemFileError(f"unknown key(s) in '{where}': {', '.join(sorted(map(str, unknown)))}")
    return block


def _number(value, where: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"'{where}' must be a number, got {value!r}") from exc


def parse_problem(data: dict, source: str = "") -> ProblemFile:
    data = _check_keys(data, TOP_KEYS, "top level")
    if ("equation" in data) == ("classical" in data):
        raise ProblemFileError("give exactly one of 'equation' or 'classical'")
    dom = _check_keys(data.get("domain"), DOMAIN_KEYS, "domain")
    if "min" not in dom or "max" not in dom:
        raise ProblemFileError("'domain' needs 'min' and 'max'")
    domain = (_number(dom["min"], "domain.min"), _number(dom["max"], "domain.max"))
    samples = int(_number(dom.get("samples", 201), "domain.samples"))
    lienard = classical = None
    try:
        if "equation" in data:
            eqb = _check_keys(data["equation"], EQUATION_KEYS, "equation")
            for key in ("n", "m", "f", "k"):
                if key not in eqb:
                    raise ProblemFileError(f"'equation' needs '{key}'")
            lienard = LienardProblem.from_strings(
                _number(eqb["n"], "equation.n"), _number(eqb["m"], "equation.m"),
                *(None if eqb.get(c) is None else str(eqb[c]) for c in "fkgh"),
                domain=domain, samples=samples,
            )
        else:
            cb = _check_keys(data["classical"], CLASSICAL_KEYS, "classical")
            if "p" not in cb:
                raise ProblemFileError("'classical' needs 'p'")
            classical = ClassicalAbel.from_strings(
                *(None if cb.get(c) is None else str(cb[c]) for c in "pqrs"), domain=domain, samples=samples
            )
    except ProblemFileError:
        raise
    except LienardError as exc:
        raise ProblemFileError(f"invalid equation: {exc}") from exc
    part = _check_keys(data.get("particular"), PARTICULAR_KEYS, "particular")
    particular = None if part.get("v_p") is None else str(part["v_p"])
    solve = None
    if "solve" in data:
        sb = _check_keys(data["solve"], SOLVE_KEYS, "solve")
        theorem = str(sb.get("theorem", ""))
        if theorem not in THEOREMS:
            raise ProblemFileError(f"solve.theorem must be one of {', '.join(THEOREMS)}")
        consts = _check_keys(sb.get("constants"), CONSTANT_KEYS, "solve.constants")
        anchor = None
        if sb.get("anchor") is not None:
            ab = _check_keys(sb["anchor"], ANCHOR_KEYS, "solve.anchor")
            if set(ab) != ANCHOR_KEYS:
                raise ProblemFileError("solve.anchor needs 'y' and 'theta'")
            anchor = (_number(ab["y"], "anchor.y"), _number(ab["theta"], "anchor.theta"))
        solve = SolveSpec(
            theorem=theorem,
            constants={k: _number(v, f"solve.constants.{k}") for k, v in consts.items()},
            branch=str(sb.get("branch", "+")),
            anchor=anchor,
            normalization=str(sb.get("normalization", "continuous")),
        )
    tb = _check_keys(data.get("tolerances"), TOLERANCE_KEYS, "tolerances")
    condition_tol = _number(tb.pop("condition", 1e-6), "tolerances.condition")
    try:
        tol = DEFAULT_TOL.replace(**{k: (int(v) if k == "max_iter" else _number(v, k)) for k, v in tb.items()})
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc
    return ProblemFile(lienard, classical, particular, solve, tol, condition_tol, source)


def load_problem(path) -> ProblemFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ProblemFileError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ProblemFileError(f"{path}: expected a mapping at the top level")
    return parse_problem(data, str(path))


# ------------------------------------------------------------------ CSV


def fmt(value: float) -> str:
    """Fixed 17-significant-digit formatting, stable across platforms."""
    return format(float(value), ".16e")


def _fmt_const(value) -> str:
    if isinstance(value, float):
        return fmt(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt_const(v) for v in value) + "]"
    return str(value)


def curve_to_csv(curve, residual_abel: np.ndarray, residual_lienard: np.ndarray, header: dict | None = None) -> str:
    out = io.StringIO()
    out.write(f"# theorem: {curve.theorem_id}\n")
    for key in sorted(curve.constants):
        out.write(f"# constant {key}: {_fmt_const(curve.constants[key])}\n")
    out.write("# pieces: " + " ".join(f"{a}-{b}" for a, b in curve.pieces) + "\n")
    for key, value in (header or {}).items():
        out.write(f"# {key}: {_fmt_const(value)}\n")
    out.write(",".join(CSV_COLUMNS) + "\n")
    with np.errstate(divide="ignore"):
        u = 1.0 / curve.v
    for row in zip(curve.y, curve.v, u, curve.x, residual_abel, residual_lienard):
        out.write(",".join(fmt(v) for v in row) + "\n")
    return out.getvalue()


@dataclass
class CurveData:
    """A curve read back from CSV; quacks like a SolutionCurve for verification."""

    theorem_id: str
    y: np.ndarray
    v: np.ndarray
    x: np.ndarray
    constants: dict
    pieces: list
    monotone_segments: list


def read_curve_csv(path) -> CurveData:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from exc
    theorem, constants, pieces, rows, header = "", {}, [], [], None
    for line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("theorem:"):
                theorem = body.split(":", 1)[1].strip()
            elif body.startswith("constant "):
                key, val = body[len("constant "):].split(":", 1)
                constants[key.strip()] = val.strip()
            elif body.startswith("pieces:"):
                pieces = [tuple(int(t) for t in p.split("-")) for p in body.split(":", 1)[1].split()]
            continue
        if not line.strip():
            continue
        if header is None:
            header = tuple(c.strip() for c in line.split(","))
            if header != CSV_COLUMNS:
                raise ProblemFileError(f"{path}: unexpected CSV columns {header}")
            continue
        try:
            rows.append([float(t) for t in line.split(",")])
        except ValueError as exc:
            raise ProblemFileError(f"{path}: bad numeric row {line!r}") from exc
    if header is None or len(rows) < 5:
        raise ProblemFileError(f"{path}: expected a header and at least 5 data rows")
    data = np.array(rows)
    y, v, x = data[:, 0], data[:, 1], data[:, 3]
    pieces = pieces or [(0, len(y) - 1)]
    from .solvers import _split_by_sign

    return CurveData(theorem, y, v, x, constants, pieces, _split_by_sign(v, pieces))
