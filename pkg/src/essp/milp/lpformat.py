"""CPLEX LP text export, a reader for the same grammar, and solution files.

Export grammar (one item per line, sections in this order)::

    \\ <comment lines>
    Minimize
     obj: <terms>
    Subject To
     <constraint name>: <terms> <= | = | >= <rhs>
    Bounds
     <lo> <= <name> <= <hi>          (integer variables and fixed binaries)
    Binaries
     <name> ...
    Generals
     <name> ...
    End

Terms are written ``+ 3 x_1_4_0 - 2.5 y_0_4``; long rows wrap onto
continuation lines that start with a space. Numbers use the shortest repr
that round-trips (integral values without a decimal point). A binary whose
bounds are not ``[0, 1]`` (fixed by a caller) is written as a general integer
with explicit bounds so every reader agrees on its domain.

Solution text is one ``<name> <value>`` pair per line; blank lines and lines
starting with ``#`` are ignored.
"""

import math
import re

import numpy as np

from essp.milp.model import BINARY, INTEGER, MilpModel, MilpSolution, Status

_WRAP = 78


class SolutionImportError(ValueError):
    pass


class LpParseError(ValueError):
    pass


def _num(v):
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _terms(pairs, names):
    out = []
    for i, a in pairs:
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        out.append(f"{sign} {names[i]}" if mag == 1 else f"{sign} {_num(mag)} {names[i]}")
    return out


def _wrap(head, tokens, tail=""):
    lines = []
    cur = head
    for tok in tokens + ([tail] if tail else []):
        if len(cur) + 1 + len(tok) > _WRAP and cur.strip():
            lines.append(cur)
            cur = "  " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return lines


def export_lp(model: MilpModel) -> str:
    names = [v.name for v in model.variables]
    out = [f"\\ Model {model.name}", "\\ Variables: " + str(model.num_vars)
           + ", constraints: " + str(model.num_constraints), "Minimize"]
    obj_terms = _terms(sorted(model.objective.items()), names)
    if not obj_terms:
        obj_terms = [f"0 {names[0]}"]
    if model.objective_constant:
        obj_terms.append(("+ " if model.objective_constant > 0 else "- ")
                         + _num(abs(model.objective_constant)))
    out += _wrap(" obj:", obj_terms)
    out.append("Subject To")
    for con in model.constraints:
        toks = _terms(zip(con.index.tolist(), con.coef.tolist()), names)
        if not toks:
            toks = [f"0 {names[0]}"]
        out += _wrap(f" {con.name}:", toks, f"{con.sense} {_num(con.rhs)}")
    binaries, generals, bounds = [], [], []
    for v in model.variables:
        if v.kind == BINARY and v.lower == 0 and v.upper == 1:
            binaries.append(v.name)
            continue
        generals.append(v.name)
        if math.isinf(v.upper):
            bounds.append(f" {v.name} >= {_num(v.lower)}")
        elif v.lower == v.upper:
            bounds.append(f" {v.name} = {_num(v.lower)}")
        else:
            bounds.append(f" {_num(v.lower)} <= {v.name} <= {_num(v.upper)}")
    if bounds:
        out.append("Bounds")
        out += bounds
    if binaries:
        out.append("Binaries")
        out += _wrap("", binaries)
    if generals:
        out.append("Generals")
        out += _wrap("", generals)
    out.append("End")
    return "\n".join(out) + "\n"


# ---- reader -------------------------------------------------------------

_SECTIONS = {
    "minimize": "obj", "minimise": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "gen": "gen",
    "end": "end",
}


def _parse_expr(tokens):
    """Parse ``[+|-] [coef] name ...``; returns ({name: coef}, constant)."""
    terms: dict[str, float] = {}
    const = 0.0
    sign = 1.0
    coef = None
    for tok in tokens:
        if tok in "+-":
            if coef is not None:
                const += sign * coef
                coef = None
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            val = float(tok)
        except ValueError:
            terms[tok] = terms.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
            sign, coef = 1.0, None
            continue
        coef = val if coef is None else coef * val
    if coef is not None:
        const += sign * coef
    return terms, const


def _split_statements(lines):
    """Tokenise a section and cut it into ``(label, tokens)`` statements."""
    toks = _TOKEN.findall(" ".join(lines))
    stmts = []
    label, cur = None, []
    i = 0
    while i < len(toks):
        tok = toks[i]
        if tok.endswith(":") and len(tok) > 1:
            if cur:
                stmts.append((label, cur))
                cur = []
            label = tok[:-1]
            i += 1
            continue
        if tok == ":" and cur:
            # "name :" with a space before the colon
            label = cur.pop()
            if cur:
                stmts.append((None, cur))
            cur = []
            i += 1
            continue
        cur.append(tok)
        if tok in _SENSE_TOKENS and i + 1 < len(toks):
            # rhs: optional sign then a number
            j = i + 1
            if toks[j] in "+-" and j + 1 < len(toks):
                cur.append(toks[j])
                j += 1
            cur.append(toks[j])
            stmts.append((label, cur))
            label, cur = None, []
            i = j + 1
            continue
        i += 1
    if cur:
        stmts.append((label, cur))
    return stmts


_SENSE_TOKENS = ("<=", ">=", "=", "<", ">", "=<", "=>")
_TOKEN = re.compile(r"[A-Za-z_][^\s:<>=+-]*:|[<>=]=?|[+-]|:"
                    r"|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[^\s:<>=+-]+")


def parse_lp(text: str, name="parsed") -> MilpModel:
    """Read a CPLEX LP file written by :func:`export_lp` (or a close relative)."""
    section = None
    lines: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "bin": [], "gen": []}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if section is None:
            raise LpParseError(f"content before first section: {raw!r}")
        lines[section].append(line)

    declared: dict[str, dict] = {}

    def var(nm):
        return declared.setdefault(nm, {"kind": None, "lo": 0.0, "hi": math.inf})

    obj_terms: dict[str, float] = {}
    obj_const = 0.0
    for _, toks in _split_statements(lines["obj"]):
        t, k = _parse_expr(toks)
        for nm, a in t.items():
            obj_terms[nm] = obj_terms.get(nm, 0.0) + a
            var(nm)
        obj_const += k

    rows = []
    for i, (cname, toks) in enumerate(_split_statements(lines["st"])):
        cname = cname or f"c{i}"
        ops = [j for j, tk in enumerate(toks) if tk in _SENSE_TOKENS]
        if len(ops) != 1:
            raise LpParseError(f"constraint {cname!r} needs exactly one sense")
        j = ops[0]
        sense = {"<": "<=", "=<": "<=", ">": ">=", "=>": ">="}.get(toks[j], toks[j])
        lhs, lconst = _parse_expr(toks[:j])
        rterms, rconst = _parse_expr(toks[j + 1:])
        for nm, a in rterms.items():
            lhs[nm] = lhs.get(nm, 0.0) - a
        for nm in lhs:
            var(nm)
        rows.append((cname, lhs, sense, rconst - lconst))

    for stmt in lines["bounds"]:
        toks = _TOKEN.findall(stmt)
        if len(toks) == 5:
            lo, _, nm, _, hi = toks
            var(nm).update(lo=float(lo), hi=float(hi))
        elif len(toks) == 3:
            a, op, c = toks
            if _is_number(a):
                a, c = c, a
                op = {"<=": ">=", ">=": "<=", "=": "="}[op]
            entry = var(a)
            val = float(c)
            if op == "=":
                entry.update(lo=val, hi=val)
            elif op == ">=":
                entry["lo"] = val
            else:
                entry["hi"] = val
        else:
            raise LpParseError(f"cannot read bound {stmt!r}")
    for stmt in lines["bin"]:
        for nm in stmt.split():
            var(nm)["kind"] = BINARY
    for stmt in lines["gen"]:
        for nm in stmt.split():
            var(nm)["kind"] = INTEGER

    model = MilpModel(name)
    for nm, d in declared.items():
        if d["kind"] == BINARY:
            model.add_var(nm, BINARY, 0.0, 1.0)
        elif d["kind"] == INTEGER:
            model.add_var(nm, INTEGER, d["lo"], d["hi"])
        else:
            raise LpParseError(f"variable {nm!r} is continuous; only integer models are supported")
    model.set_objective({model.index(nm): a for nm, a in obj_terms.items()}, obj_const)
    for cname, lhs, sense, rhs in rows:
        model.add_constraint({model.index(nm): a for nm, a in lhs.items()}, sense, rhs, cname)
    return model


def _is_number(tok):
    try:
        float(tok)
        return True
    except ValueError:
        return False


# ---- solutions ----------------------------------------------------------

def format_solution(model: MilpModel, x) -> str:
    return "".join(f"{v.name} {_num(round(val) if abs(val - round(val)) < 1e-9 else val)}\n"
                   for v, val in zip(model.variables, x))


def import_solution(model: MilpModel, text: str) -> MilpSolution:
    x = np.zeros(model.num_vars)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionImportError(f"line {lineno}: expected 'name value', got {raw!r}")
        nm, val = parts
        if not model.has_var(nm):
            raise SolutionImportError(f"line {lineno}: unknown variable {nm!r}")
        try:
            x[model.index(nm)] = float(val)
        except ValueError:
            raise SolutionImportError(f"line {lineno}: bad value {val!r}") from None
    problems = model.check(x)
    if problems:
        raise SolutionImportError(problems[0])
    x = np.round(x)
    obj = model.evaluate(x)
    return MilpSolution(Status.FEASIBLE, x, obj, -math.inf)
