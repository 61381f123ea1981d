"""Fixed-length mixed-integer model, its strengthenings, and LP/MPS text I/O.

Symbols are processed in canonical order (descending weight, ties by
descending frequency, then by label) so that the symmetry constraints can
refer to "the first symbol" and "adjacent tied symbols". Variable names always
carry the original 1-based labels, so nothing permuted leaks to the user.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from .bounds import IterationBounds, p_fixed_zero, s_fixed_zero
from .core import Evaluation, Instance, Sequence, dist, evaluate

LEVELS = ("basic", "ineqs", "enhanced")
INTEGRALITY_TOL = 1e-6


class ProvablyNoImprovement(Exception):
    """The bounds alone show that this length cannot hold an improving sequence."""


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class Settings:
    """Which strengthenings are active. Use :meth:`preset` for the three levels.

    ``count_bound``        occurrence upper bounds M_i
    ``fixings``            adjacency and incumbent-based p/s fixings
    ``lifting``            raise occurrence lower bounds to k*_i
    ``improvement_cap``    theta <= largest weight multiple below the incumbent
    ``symmetry``           first symbol at position 1, tied symbols ordered
    ``extended``           count selector variables d and their cuts
    ``skip``               skip lengths with K* > length
    ``lifted_count_bound`` occurrence upper bounds M*_i
    """

    level: str = "enhanced"
    count_bound: bool = True
    fixings: bool = True
    lifting: bool = True
    improvement_cap: bool = True
    symmetry: bool = True
    extended: bool = True
    skip: bool = True
    lifted_count_bound: bool = True

    @classmethod
    def preset(cls, level: str, **overrides) -> "Settings":
        if level not in LEVELS:
            raise ValueError(f"unknown setting {level!r}; expected one of {LEVELS}")
        ineqs = level in ("ineqs", "enhanced")
        enhanced = level == "enhanced"
        base = cls(
            level=level,
            count_bound=ineqs,
            fixings=ineqs,
            lifting=ineqs,
            improvement_cap=ineqs,
            symmetry=ineqs,
            extended=enhanced,
            skip=enhanced,
            lifted_count_bound=enhanced,
        )
        return replace(base, **overrides)


def canonical_order(inst: Instance) -> Tuple[int, ...]:
    """0-based original indices listed in canonical order."""
    return tuple(sorted(range(inst.n), key=lambda i: (-inst.w[i], -inst.f[i], i)))


def tied_pairs(inst: Instance, order: Tuple[int, ...]) -> List[int]:
    """Canonical positions c such that symbols c and c+1 share weight and frequency."""
    return [
        c for c in range(len(order) - 1)
        if inst.w[order[c]] == inst.w[order[c + 1]] and inst.f[order[c]] == inst.f[order[c + 1]]
    ]


@dataclass
class Variable:
    name: str
    kind: str  # "binary" or "integer"
    lb: int = 0
    ub: Optional[int] = 1

    @property
    def fixed(self) -> bool:
        return self.ub is not None and self.lb == self.ub


@dataclass
class Constraint:
    name: str
    terms: List[Tuple[int, int]]
    sense: str  # "<=", "=", ">="
    rhs: int


@dataclass
class Model:
    variables: List[Variable] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Optional[int] = None
    metadata: dict = field(default_factory=dict)
    index: Dict[str, int] = field(default_factory=dict)

    def add_var(self, name: str, kind: str = "binary", lb: int = 0, ub: Optional[int] = 1) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name}")
        self.index[name] = len(self.variables)
        self.variables.append(Variable(name, kind, lb, ub))
        return self.index[name]

    def add_constraint(self, name: str, terms, sense: str, rhs: int) -> None:
        terms = [(int(j), int(a)) for j, a in terms if a != 0]
        for j, _ in terms:
            if not 0 <= j < len(self.variables):
                raise ValueError(f"constraint {name} references undeclared variable {j}")
        self.constraints.append(Constraint(name, terms, sense, rhs))

    def fix(self, j: int, value: int) -> None:
        self.variables[j].lb = self.variables[j].ub = value

    def var(self, name: str) -> Variable:
        return self.variables[self.index[name]]

    def count(self, prefix: str) -> int:
        return sum(1 for v in self.variables if v.name.split("_")[0] == prefix)

    def constraint_count(self, family: str) -> int:
        return sum(1 for c in self.constraints if c.name.split("_")[0] == family)

    def free_variables(self) -> int:
        return sum(1 for v in self.variables if not v.fixed)

    def coefficients(self) -> Dict[Tuple[str, str], int]:
        return {
            (c.name, self.variables[j].name): a
            for c in self.constraints for j, a in c.terms
        }

    def to_arrays(self):
        """(c, A, row_lo, row_hi, lb, ub, integrality) for array-based MIP solvers."""
        nv = len(self.variables)
        rows, cols, vals = [], [], []
        row_lo = np.empty(len(self.constraints))
        row_hi = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            for j, a in con.terms:
                rows.append(r)
                cols.append(j)
                vals.append(a)
            row_lo[r] = con.rhs if con.sense in (">=", "=") else -np.inf
            row_hi[r] = con.rhs if con.sense in ("<=", "=") else np.inf
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), nv))
        c = np.zeros(nv)
        if self.objective is not None:
            c[self.objective] = 1.0
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([np.inf if v.ub is None else v.ub for v in self.variables], dtype=float)
        integrality = np.ones(nv)
        return c, A, row_lo, row_hi, lb, ub, integrality

    def violations(self, values: Dict[str, float], tol: float = 1e-6) -> List[str]:
        """Names of bounds/constraints violated by a full assignment."""
        out = []
        x = [values.get(v.name, 0.0) for v in self.variables]
        for v, val in zip(self.variables, x):
            if val < v.lb - tol or (v.ub is not None and val > v.ub + tol):
                out.append(f"bound:{v.name}")
        for con in self.constraints:
            act = sum(a * x[j] for j, a in con.terms)
            if (con.sense == ">=" and act < con.rhs - tol) or (
                con.sense == "<=" and act > con.rhs + tol) or (
                con.sense == "=" and abs(act - con.rhs) > tol):
                out.append(con.name)
        return out


def x_name(label: int, t: int) -> str:
    return f"x_{label}_{t}"


def build_fixed_length_model(
    inst: Instance, length: int, b: IterationBounds, cfg: Settings
) -> Model:
    """The fixed-length model plus every strengthening enabled in ``cfg``."""
    if b.length != length:
        raise ValueError(f"bounds were computed for length {b.length}, not {length}")
    L = length
    incumbent = b.has_incumbent
    order = canonical_order(inst)
    labels = [i + 1 for i in order]  # canonical position -> original label
    lower, upper = symbol_count_limits(inst, b, cfg)

    m = Model()
    m.metadata = {"instance": inst, "length": L, "settings": cfg, "order": order}
    n = inst.n
    X = {(c, t): m.add_var(x_name(labels[c], t)) for c in range(n) for t in range(1, L + 1)}
    P = {(c, t, u): m.add_var(f"p_{labels[c]}_{t}_{u}")
         for c in range(n) for t in range(1, L + 1) for u in range(1, L + 1)}
    S = {(c, t, u): m.add_var(f"s_{labels[c]}_{t}_{u}")
         for c in range(n) for t in range(1, L + 1) for u in range(1, L + 1)}
    D = {}
    if cfg.extended:
        for c in range(n):
            for j in range(1, upper[order[c]] + 1):
                D[c, j] = m.add_var(f"d_{labels[c]}_{j}")
    cap = b.theta_cap if (cfg.improvement_cap and incumbent) else None
    theta = m.add_var("theta", kind="integer", lb=0, ub=cap)
    m.objective = theta
    m.metadata.update(x=X, p=P, s=S, d=D)

    if cfg.fixings:
        for c in range(n):
            i = order[c]
            for t in range(1, L + 1):
                for u in range(1, L + 1):
                    if p_fixed_zero(inst, b, i, t, u):
                        m.fix(P[c, t, u], 0)
                    if s_fixed_zero(inst, b, i, t, u):
                        m.fix(S[c, t, u], 0)

    for c in range(n):
        lo = lower[order[c]]
        m.add_constraint(f"chosenmin_{labels[c]}", [(X[c, t], 1) for t in range(1, L + 1)], ">=", lo)
    for t in range(1, L + 1):
        m.add_constraint(f"position_{t}", [(X[c, t], 1) for c in range(n)], "=", 1)
    for c in range(n):
        for t in range(1, L + 1):
            m.add_constraint(f"pred_{labels[c]}_{t}",
                             [(X[c, t], 1)] + [(P[c, t, u], -1) for u in range(1, L + 1)], "=", 0)
    for c in range(n):
        for t in range(1, L + 1):
            m.add_constraint(f"succ_{labels[c]}_{t}",
                             [(X[c, t], 1)] + [(S[c, t, u], -1) for u in range(1, L + 1)], "=", 0)
    for c in range(n):
        for t in range(1, L + 1):
            for u in range(1, L + 1):
                m.add_constraint(f"predsuc_{labels[c]}_{t}_{u}", [(S[c, t, u], 1), (P[c, u, t], -1)], "=", 0)
    for t in range(1, L + 1):
        m.add_constraint(
            f"objpred_{t}",
            [(theta, 1)] + [(P[c, t, u], -inst.w[order[c]] * dist(t, u, L))
                            for c in range(n) for u in range(1, L + 1)],
            ">=", 0)
    for t in range(1, L + 1):
        m.add_constraint(
            f"objsucc_{t}",
            [(theta, 1)] + [(S[c, t, u], -inst.w[order[c]] * dist(u, t, L))
                            for c in range(n) for u in range(1, L + 1)],
            ">=", 0)
    if cfg.count_bound or (cfg.lifted_count_bound and incumbent):
        for c in range(n):
            m.add_constraint(f"ub_{labels[c]}", [(X[c, t], 1) for t in range(1, L + 1)],
                             "<=", upper[order[c]])
    if cfg.symmetry:
        add_symmetry_breaking(m, inst)
    if cfg.extended:
        add_extended_count_model(m, inst, b)
    return m


def symbol_count_limits(inst: Instance, b: IterationBounds, cfg: Settings):
    """Per-symbol (lower, upper) occurrence limits in original index order.

    Raises :class:`ProvablyNoImprovement` when the limits leave no room.
    """
    L = b.length
    lifting = cfg.lifting and b.has_incumbent
    if lifting and b.impossible:
        raise ProvablyNoImprovement(f"some symbol cannot beat {b.z_star} at length {L}")
    lower = list(b.k_star) if lifting else list(inst.f)
    lifted = cfg.lifted_count_bound and b.has_incumbent and not b.impossible
    upper = []
    for i in range(inst.n):
        cap = L - (inst.min_length - inst.f[i])
        if cfg.count_bound:
            cap = min(cap, b.M[i])
        if lifted:
            cap = min(cap, b.M_star[i])
        upper.append(cap)
    for i in range(inst.n):
        if upper[i] < lower[i]:
            raise ProvablyNoImprovement(
                f"symbol a{i + 1} needs {lower[i]} occurrences but at most {upper[i]} fit in length {L}")
    if sum(lower) > L:
        raise ProvablyNoImprovement(f"{sum(lower)} required occurrences exceed length {L}")
    return lower, upper


def add_symmetry_breaking(m: Model, inst: Instance) -> Model:
    """Pin the first canonical symbol to position 1 and order tied symbols by first use."""
    X = m.metadata["x"]
    order = m.metadata["order"]
    L = m.metadata["length"]
    labels = [i + 1 for i in order]
    m.fix(X[0, 1], 1)
    for c in tied_pairs(inst, order):
        for t in range(1, L + 1):
            m.add_constraint(
                f"sym_{labels[c]}_{t}",
                [(X[c, u], 1) for u in range(1, t + 1)] + [(X[c + 1, t], -1)],
                ">=", 0)
    return m


def extended_cut_terms(w_i: int, length: int, z_star: int, max_count: int) -> List[Tuple[int, int]]:
    """(j, z* - w_i*ceil(length/j)) for the counts j that could still beat z*."""
    out = []
    for j in range(1, max_count + 1):
        best = w_i * -(-length // j)
        if best <= z_star:
            out.append((j, z_star - best))
    return out


def add_extended_count_model(m: Model, inst: Instance, b: IterationBounds) -> Model:
    """Count selectors d[i, j] (symbol i occurs exactly j times) and the cuts they enable."""
    X, D = m.metadata["x"], m.metadata["d"]
    order = m.metadata["order"]
    L = m.metadata["length"]
    theta = m.objective
    for c, i in enumerate(order):
        js = sorted(j for (cc, j) in D if cc == c)
        m.add_constraint(
            f"dlink_{i + 1}",
            [(X[c, t], 1) for t in range(1, L + 1)] + [(D[c, j], -j) for j in js], "=", 0)
        m.add_constraint(f"dsel_{i + 1}", [(D[c, j], 1) for j in js], "=", 1)
    if b.has_incumbent:
        for c, i in enumerate(order):
            js = sorted(j for (cc, j) in D if cc == c)
            terms = extended_cut_terms(inst.w[i], L, b.z_star, max(js) if js else 0)
            m.add_constraint(
                f"dcut_{i + 1}", [(theta, 1)] + [(D[c, j], coef) for j, coef in terms],
                ">=", b.z_star)
    return m


# -- extraction ------------------------------------------------------------


@dataclass(frozen=True)
class Extraction:
    sequence: Sequence
    evaluation: Evaluation

    @property
    def objective(self) -> int:
        return self.evaluation.objective


def extract_sequence(m: Model, assignment: Dict[str, float]) -> Extraction:
    """Read the sequence off the x-variables and certify it with :func:`evaluate`."""
    inst: Instance = m.metadata["instance"]
    L = m.metadata["length"]
    symbols = []
    for t in range(1, L + 1):
        chosen = []
        for label in range(1, inst.n + 1):
            v = float(assignment.get(x_name(label, t), 0.0))
            if abs(v - round(v)) > INTEGRALITY_TOL or not -INTEGRALITY_TOL <= v <= 1 + INTEGRALITY_TOL:
                raise ExtractionError(f"position {t}: x_{label}_{t} = {v} is not binary")
            if round(v) == 1:
                chosen.append(label)
        if not chosen:
            raise ExtractionError(f"position {t} is unassigned")
        if len(chosen) > 1:
            raise ExtractionError(f"position {t} holds several symbols: {chosen}")
        symbols.append(chosen[0])
    seq = Sequence(tuple(symbols))
    return Extraction(seq, evaluate(inst, seq))


def sequence_assignment(m: Model, seq: Sequence) -> Dict[str, int]:
    """Integer point encoding ``seq`` with true predecessor/successor indicators."""
    inst: Instance = m.metadata["instance"]
    L = m.metadata["length"]
    if seq.length != L:
        raise ValueError(f"sequence has length {seq.length}, model has {L}")
    values = {v.name: 0 for v in m.variables}
    for label in range(1, inst.n + 1):
        pos = seq.positions(label)
        for k, t in enumerate(pos):
            values[x_name(label, t)] = 1
            prev = pos[k - 1]
            nxt = pos[(k + 1) % len(pos)]
            values[f"p_{label}_{t}_{prev}"] = 1
            values[f"s_{label}_{t}_{nxt}"] = 1
        if m.metadata["d"] and pos:
            values[f"d_{label}_{len(pos)}"] = 1
    values["theta"] = evaluate(inst, seq, partial=True).objective
    return values


def parse_assignment(text: str) -> Dict[str, float]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'name value', got {line!r}")
        values[parts[0]] = float(parts[1])
    return values


def format_assignment(values: Dict[str, float]) -> str:
    out = []
    for name, v in values.items():
        v = float(v)
        out.append(f"{name} {int(round(v)) if abs(v - round(v)) < 1e-9 else repr(v)}\n")
    return "".join(out)


# -- LP / MPS text ---------------------------------------------------------

_TERMS_PER_LINE = 8


def _format_terms(con: Constraint, variables: List[Variable]) -> List[str]:
    parts = []
    for k, (j, a) in enumerate(con.terms):
        sign = "-" if a < 0 else ("+" if k else "")
        mag = abs(a)
        parts.append(f"{sign} {mag} {variables[j].name}".strip())
    return parts


def emit_lp(m: Model) -> str:
    """CPLEX LP text. Fixed variables are emitted as integer columns with equal bounds."""
    meta = m.metadata
    lines = []
    cfg = meta.get("settings")
    if "length" in meta:
        lines.append(f"\\ wfsolve fixed-length model length={meta['length']}"
                     + (f" setting={cfg.level}" if cfg is not None else ""))
    lines.append("Minimize")
    lines.append(f" obj: {m.variables[m.objective].name}")
    lines.append("Subject To")
    for con in m.constraints:
        parts = _format_terms(con, m.variables)
        chunks = [" ".join(parts[k:k + _TERMS_PER_LINE]) for k in range(0, len(parts), _TERMS_PER_LINE)]
        if not chunks:
            chunks = ["0 " + m.variables[m.objective].name]
        lines.append(f" {con.name}: {chunks[0]}")
        lines.extend(f"   {chunk}" for chunk in chunks[1:])
        lines[-1] += f" {con.sense} {con.rhs}"
    lines.append("Bounds")
    for v in m.variables:
        if v.fixed:
            lines.append(f" {v.name} = {v.lb}")
        elif v.kind == "integer":
            lines.append(f" {v.lb} <= {v.name} <= {v.ub}" if v.ub is not None else f" {v.name} >= {v.lb}")
    generals = [v.name for v in m.variables if v.kind == "integer" or v.fixed]
    binaries = [v.name for v in m.variables if v.kind == "binary" and not v.fixed]
    for title, names in (("Generals", generals), ("Binaries", binaries)):
        if names:
            lines.append(title)
            for k in range(0, len(names), 10):
                lines.append(" " + " ".join(names[k:k + 10]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def emit_mps(m: Model, name: str = "WFS") -> str:
    """Free-format MPS with the same column names as :func:`emit_lp`."""
    senses = {"<=": "L", ">=": "G", "=": "E"}
    out = [f"NAME {name}", "ROWS", " N obj"]
    out += [f" {senses[c.sense]} {c.name}" for c in m.constraints]
    out.append("COLUMNS")
    col_rows: Dict[int, List[Tuple[str, int]]] = {j: [] for j in range(len(m.variables))}
    col_rows[m.objective].append(("obj", 1))
    for c in m.constraints:
        for j, a in c.terms:
            col_rows[j].append((c.name, a))
    out.append(" MARKER 'MARKER' 'INTORG'")
    for j, v in enumerate(m.variables):
        entries = col_rows[j] or [("obj", 0)]
        out += [f" {v.name} {row} {a}" for row, a in entries]
    out.append(" MARKER 'MARKER' 'INTEND'")
    out.append("RHS")
    out += [f" rhs {c.name} {c.rhs}" for c in m.constraints if c.rhs != 0]
    out.append("BOUNDS")
    for v in m.variables:
        if v.fixed:
            out.append(f" FX bnd {v.name} {v.lb}")
        elif v.kind == "binary":
            out.append(f" BV bnd {v.name}")
        else:
            out.append(f" LO bnd {v.name} {v.lb}")
            out.append(f" UP bnd {v.name} {v.ub}" if v.ub is not None else f" PL bnd {v.name}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


_SECTION = re.compile(r"^(minimize|minimum|min|subject to|such that|st|s\.t\.|bounds|generals?|binary|binaries|end)$", re.I)
_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$|^[+-]?inf(inity)?$", re.I)


def _num(tok: str) -> float:
    v = float(tok)
    return int(v) if v.is_integer() else v


def read_lp(text: str) -> Model:
    """Read the LP subset written by :func:`emit_lp` (one term = sign, coefficient, name)."""
    section = None
    objective_lines: List[str] = []
    con_lines: List[str] = []
    bound_lines: List[str] = []
    generals: List[str] = []
    binaries: List[str] = []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        if _SECTION.match(line):
            key = line.lower()
            section = {"minimum": "min", "minimize": "min", "min": "min", "subject to": "st",
                       "such that": "st", "st": "st", "s.t.": "st", "bounds": "bounds",
                       "general": "gen", "generals": "gen", "binary": "bin",
                       "binaries": "bin", "end": "end"}[key]
            continue
        if section == "min":
            objective_lines.append(line)
        elif section == "st":
            if re.match(r"^\S+:", line):
                con_lines.append(line)
            elif con_lines:
                con_lines[-1] += " " + line
            else:
                raise ValueError(f"constraint without a name: {line!r}")
        elif section == "bounds":
            bound_lines.append(line)
        elif section == "gen":
            generals.extend(line.split())
        elif section == "bin":
            binaries.extend(line.split())
        else:
            raise ValueError(f"unexpected line outside a section: {line!r}")

    m = Model()

    def var_index(name: str) -> int:
        if name not in m.index:
            m.add_var(name, kind="continuous", lb=0, ub=None)
        return m.index[name]

    def parse_terms(tokens: List[str]) -> List[Tuple[int, int]]:
        terms, sign, coef = [], 1, None
        for tok in tokens:
            if tok in "+-":
                sign = -1 if tok == "-" else 1
            elif _NUMBER.match(tok):
                coef = _num(tok)
            else:
                terms.append((var_index(tok), sign * (1 if coef is None else coef)))
                sign, coef = 1, None
        return terms

    obj_tokens = " ".join(objective_lines).split()
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    obj_terms = parse_terms(obj_tokens)
    if len(obj_terms) != 1 or obj_terms[0][1] != 1:
        raise ValueError("objective must be a single variable with coefficient 1")
    m.objective = obj_terms[0][0]

    for line in con_lines:
        name, body = line.split(":", 1)
        match = re.match(r"^(.*?)(<=|>=|=<|=>|=|<|>)\s*(\S+)\s*$", body)
        if not match:
            raise ValueError(f"cannot parse constraint {name!r}")
        lhs, sense, rhs = match.groups()
        sense = {"<": "<=", "=<": "<=", ">": ">=", "=>": ">="}.get(sense, sense)
        terms = parse_terms(lhs.split())
        m.constraints.append(Constraint(name.strip(), terms, sense, _num(rhs)))

    for line in bound_lines:
        toks = line.split()
        if len(toks) == 3 and toks[1] == "=":
            v = m.variables[var_index(toks[0])]
            v.lb = v.ub = _num(toks[2])
        elif len(toks) == 5 and toks[1] == toks[3] == "<=":
            v = m.variables[var_index(toks[2])]
            v.lb, v.ub = _num(toks[0]), _num(toks[4])
        elif len(toks) == 3 and toks[1] == ">=":
            m.variables[var_index(toks[0])].lb = _num(toks[2])
        elif len(toks) == 3 and toks[1] == "<=":
            m.variables[var_index(toks[0])].ub = _num(toks[2])
        else:
            raise ValueError(f"cannot parse bound {line!r}")
    for name in generals:
        m.variables[var_index(name)].kind = "integer"
    for name in binaries:
        v = m.variables[var_index(name)]
        v.kind, v.lb, v.ub = "binary", 0, 1
    return m


def model_summary(m: Model) -> dict:
    return {
        "variables": len(m.variables),
        "free_variables": m.free_variables(),
        "constraints": len(m.constraints),
        "theta_ub": m.variables[m.objective].ub,
    }
