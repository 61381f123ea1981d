"""Iterative length loop, incumbent handling and fixed-length backends."""

from __future__ import annotations

import logging
import os
import shlex
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from typing import List, Optional

from .bounds import IterationBounds, compute_bounds, should_skip
from .core import Instance, Sequence, evaluate, trivial_solution
from .model import (
    Model,
    ProvablyNoImprovement,
    Settings,
    build_fixed_length_model,
    canonical_order,
    emit_lp,
    extract_sequence,
    parse_assignment,
    symbol_count_limits,
    tied_pairs,
)

log = logging.getLogger(__name__)

IMPROVED = "improved"
NO_IMPROVING = "no_improving"
TIMED_OUT = "timed_out"
SKIPPED = "skipped"

# exit statuses expected from an external solver command
EXTERNAL_OPTIMAL = 0
EXTERNAL_INFEASIBLE = 2
EXTERNAL_TIME_LIMIT = 3


class BackendError(RuntimeError):
    pass


class BackendConfigError(BackendError):
    pass


class BackendExitError(BackendError):
    pass


class BackendOutputError(BackendError):
    pass


class CertificationError(BackendError):
    pass


@dataclass(frozen=True)
class SolveOutcome:
    status: str
    sequence: Optional[Sequence] = None
    objective: Optional[int] = None
    nodes: int = 0
    seconds: float = 0.0


class _Timeout(Exception):
    pass


class _Exhausted(Exception):
    pass


def native_branch_and_bound(
    inst: Instance,
    length: int,
    b: IterationBounds,
    cfg: Settings,
    budget: Optional[float] = None,
    prune: bool = True,
) -> SolveOutcome:
    """Depth-first search over position assignments, left to right.

    Honours the same restrictions as the model built for ``cfg``: occurrence
    limits, adjacency fixings, the improvement cap and the symmetry rules.
    With ``prune`` the search also discards a partial sequence when

    * a closed gap already reaches the bound, or
    * the occurrences still required, either by the lower limit or to keep
      every future gap within the bound, do not fit in the free positions, or
      cannot all be met before their deadlines.
    """
    start = time.perf_counter()
    if budget is not None and budget <= 0:
        return SolveOutcome(TIMED_OUT)
    incumbent = b.has_incumbent
    try:
        lower, upper = symbol_count_limits(inst, b, cfg)
    except ProvablyNoImprovement:
        return SolveOutcome(NO_IMPROVING, seconds=time.perf_counter() - start)

    L = length
    order = canonical_order(inst)
    n = inst.n
    w = [inst.w[i] for i in order]
    lo = [lower[i] for i in order]
    hi = [upper[i] for i in order]
    adjacency = [cfg.fixings and inst.f[i] == 1 for i in order]
    tie_prev = [-1] * n
    if cfg.symmetry:
        for c in tied_pairs(inst, order):
            tie_prev[c + 1] = c
    pin_first = cfg.symmetry
    cap = b.theta_cap if (cfg.improvement_cap and incumbent) else None
    # objective must stay strictly below U
    state = {"U": None if cap is None else cap + 1, "best": None, "nodes": 0}
    G = [L] * n

    def set_bound(U: Optional[int]) -> None:
        state["U"] = U
        for c in range(n):
            G[c] = L if U is None else min(L, (U - 1) // w[c])

    set_bound(state["U"])
    if min(G) < 1:
        return SolveOutcome(NO_IMPROVING, seconds=time.perf_counter() - start)
    first = [-1] * n
    last = [-1] * n
    cnt = [0] * n
    gmax = [0] * n
    seq = [0] * L
    deadline = None if budget is None else start + budget

    def feasible(t: int) -> bool:
        free = L - t
        need = 0
        dls = []
        for c in range(n):
            g = G[c]
            fc = first[c]
            if fc < 0:
                if g <= t:
                    return False
                e = lo[c]
                q = (L + g - 1) // g
                if q > e:
                    e = q
                dls.append(g - 1)
            else:
                e = lo[c] - cnt[c]
                q = (L + fc - last[c] - 1) // g
                if q > e:
                    e = q
                if e > 0:
                    dl = last[c] + g
                    if dl < t:
                        return False
                    dls.append(dl if dl < L else L - 1)
                else:
                    e = 0
            if cnt[c] + e > hi[c]:
                return False
            need += e
            if need > free:
                return False
        dls.sort()
        for k, dl in enumerate(dls):
            if dl - t < k:
                return False
        return True

    def leaf() -> None:
        value = 0
        for c in range(n):
            if cnt[c] < lo[c]:
                return
            g = gmax[c]
            wrap = L + first[c] - last[c]
            if wrap > g:
                g = wrap
            if w[c] * g > value:
                value = w[c] * g
        U = state["U"]
        if U is None or value < U:
            state["best"] = (value, tuple(seq))
            set_bound(value)
            if min(G) < 1:
                # every symbol has gap >= 1, so nothing can beat this value
                raise _Exhausted

    def rec(t: int) -> None:
        state["nodes"] += 1
        if deadline is not None and state["nodes"] & 1023 == 0 and time.perf_counter() > deadline:
            raise _Timeout
        if t == L:
            leaf()
            return
        U = state["U"]
        for c in range(n):
            if pin_first and t == 0 and c != 0:
                break
            if cnt[c] >= hi[c]:
                continue
            if tie_prev[c] >= 0 and first[tie_prev[c]] < 0:
                continue
            lc = last[c]
            if adjacency[c] and lc >= 0 and (lc == t - 1 or (t == L - 1 and first[c] == 0)):
                continue
            old_gmax = gmax[c]
            if lc >= 0:
                gap = t - lc
                if prune and U is not None and w[c] * gap >= U:
                    continue
                if gap > old_gmax:
                    gmax[c] = gap
            old_first = first[c]
            if old_first < 0:
                first[c] = t
            last[c] = t
            cnt[c] += 1
            seq[t] = c
            if not prune or feasible(t + 1):
                rec(t + 1)
                U = state["U"]
            cnt[c] -= 1
            last[c] = lc
            first[c] = old_first
            gmax[c] = old_gmax

    timed_out = False
    try:
        rec(0)
    except _Exhausted:
        pass
    except _Timeout:
        timed_out = True
    elapsed = time.perf_counter() - start
    best = state["best"]
    seq_out = None
    if best is not None:
        seq_out = Sequence(tuple(order[c] + 1 for c in best[1]))
        if evaluate(inst, seq_out).objective != best[0]:
            raise AssertionError("branch-and-bound objective disagrees with evaluate")
    if timed_out:
        return SolveOutcome(TIMED_OUT, seq_out, best and best[0], state["nodes"], elapsed)
    if best is None or (incumbent and best[0] >= b.z_star):
        return SolveOutcome(NO_IMPROVING, nodes=state["nodes"], seconds=elapsed)
    return SolveOutcome(IMPROVED, seq_out, best[0], state["nodes"], elapsed)


SOLVER_CMD_ENV = "WFS_SOLVER_CMD"


def bundled_solver_cmd() -> str:
    """Command template for the HiGHS runner shipped with the package."""
    return f"{shlex.quote(sys.executable)} -m wfsolve.highs_runner {{lp}} {{sol}} --time-limit {{time_limit}}"


def default_solver_cmd() -> Optional[str]:
    """Solver command from the environment, if any."""
    return os.environ.get(SOLVER_CMD_ENV) or None


def external_backend_solve(
    m: Model, solver_cmd: str, budget: Optional[float] = None, z_star: Optional[int] = None
) -> SolveOutcome:
    """Solve ``m`` with an external MIP program and certify its answer.

    ``solver_cmd`` is a template; ``{lp}``, ``{sol}`` and ``{time_limit}`` are
    substituted. Without ``{lp}`` the two paths are appended. The program must
    write ``name value`` lines to ``{sol}`` and exit with 0 (optimal),
    2 (infeasible) or 3 (time limit).
    """
    start = time.perf_counter()
    if not solver_cmd or not solver_cmd.strip():
        raise BackendConfigError("no external solver command configured")
    template = shlex.split(solver_cmd)
    exe = template[0]
    if shutil.which(exe) is None and not os.access(exe, os.X_OK):
        raise BackendConfigError(f"external solver {exe!r} not found")
    if budget is not None and budget <= 0:
        return SolveOutcome(TIMED_OUT)
    limit = "1e9" if budget is None else f"{budget:.3f}"
    with tempfile.TemporaryDirectory(prefix="wfsolve-") as tmp:
        lp_path = os.path.join(tmp, "model.lp")
        sol_path = os.path.join(tmp, "model.sol")
        with open(lp_path, "w") as fh:
            fh.write(emit_lp(m))
        args = [tok.format(lp=lp_path, sol=sol_path, time_limit=limit) for tok in template]
        if "{lp}" not in solver_cmd:
            args += [lp_path, sol_path]
        try:
            proc = subprocess.run(
                args, capture_output=True, text=True,
                timeout=None if budget is None else budget + 5.0,
            )
        except subprocess.TimeoutExpired:
            return SolveOutcome(TIMED_OUT, seconds=time.perf_counter() - start)
        except OSError as exc:
            raise BackendConfigError(f"cannot start {exe!r}: {exc}") from exc
        elapsed = time.perf_counter() - start
        if proc.returncode == EXTERNAL_INFEASIBLE:
            return SolveOutcome(NO_IMPROVING, seconds=elapsed)
        if proc.returncode not in (EXTERNAL_OPTIMAL, EXTERNAL_TIME_LIMIT):
            raise BackendExitError(
                f"external solver exited with status {proc.returncode}: {proc.stderr.strip()[-500:]}")
        text = None
        if os.path.exists(sol_path):
            with open(sol_path) as fh:
                text = fh.read()
    if proc.returncode == EXTERNAL_TIME_LIMIT:
        seq = obj = None
        if text:
            try:
                ext = extract_sequence(m, parse_assignment(text))
                seq, obj = ext.sequence, ext.objective
            except ValueError:
                pass
        return SolveOutcome(TIMED_OUT, seq, obj, seconds=elapsed)
    if text is None:
        raise BackendOutputError("external solver reported optimal but wrote no assignment file")
    try:
        values = parse_assignment(text)
    except ValueError as exc:
        raise BackendOutputError(f"unparseable assignment file: {exc}") from exc
    if "theta" not in values:
        raise BackendOutputError("assignment file lacks the objective variable theta")
    try:
        ext = extract_sequence(m, values)
    except ValueError as exc:
        raise CertificationError(f"external assignment does not encode a sequence: {exc}") from exc
    broken = m.violations(values)
    if broken:
        raise CertificationError(f"external assignment violates {broken[:5]}")
    if abs(values["theta"] - ext.objective) > 0.5:
        raise CertificationError(
            f"external objective {values['theta']:g} but the extracted sequence evaluates to {ext.objective}")
    if z_star is not None and ext.objective >= z_star:
        return SolveOutcome(NO_IMPROVING, seconds=elapsed)
    return SolveOutcome(IMPROVED, ext.sequence, ext.objective, seconds=elapsed)


def solve_fixed_length(
    inst: Instance,
    length: int,
    b: IterationBounds,
    cfg: Settings,
    backend: str = "native",
    budget: Optional[float] = None,
    solver_cmd: Optional[str] = None,
) -> SolveOutcome:
    if backend == "native":
        return native_branch_and_bound(inst, length, b, cfg, budget)
    if backend == "lp-export":
        if not solver_cmd:
            raise BackendConfigError("lp-export backend needs a solver command")
        try:
            m = build_fixed_length_model(inst, length, b, cfg)
        except ProvablyNoImprovement:
            return SolveOutcome(NO_IMPROVING)
        return external_backend_solve(m, solver_cmd, budget, b.z_star)
    raise BackendConfigError(f"unknown backend {backend!r}")


@dataclass
class IterationRecord:
    length: int
    skipped: bool
    status: str
    objective: Optional[int]
    incumbent: int
    bounds: dict
    nodes: int
    seconds: float
    cumulative: float

    def csv_row(self) -> dict:
        return {
            "T_len": self.length,
            "skipped": int(self.skipped),
            "status": self.status,
            "incumbent": self.incumbent,
            "K_star": "" if self.bounds.get("K_star") is None else self.bounds["K_star"],
            "theta_cap": "" if self.bounds.get("theta_cap") is None else self.bounds["theta_cap"],
            "nodes": self.nodes,
            "seconds": f"{self.seconds:.6f}",
        }


CSV_COLUMNS = ["T_len", "skipped", "status", "incumbent", "K_star", "theta_cap", "nodes", "seconds"]


@dataclass
class RunReport:
    setting: str
    backend: str
    initial_objective: int
    objective: int
    sequence: Sequence
    proven_optimal: bool
    termination: str
    iterations: List[IterationRecord] = field(default_factory=list)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "backend": self.backend,
            "initial_objective": self.initial_objective,
            "objective": self.objective,
            "sequence": list(self.sequence.symbols),
            "length": self.sequence.length,
            "proven_optimal": self.proven_optimal,
            "termination": self.termination,
            "seconds": self.seconds,
            "iterations": [vars(it).copy() for it in self.iterations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            setting=d["setting"],
            backend=d["backend"],
            initial_objective=d["initial_objective"],
            objective=d["objective"],
            sequence=Sequence(tuple(d["sequence"])),
            proven_optimal=d["proven_optimal"],
            termination=d["termination"],
            iterations=[IterationRecord(**it) for it in d["iterations"]],
            seconds=d["seconds"],
        )

    def trajectory(self) -> List[tuple]:
        """Timing-free view used for determinism checks."""
        return [(it.length, it.skipped, it.status, it.objective, it.incumbent, it.nodes)
                for it in self.iterations]


def run(
    inst: Instance,
    cfg: Settings,
    budget: Optional[float] = None,
    backend: str = "native",
    solver_cmd: Optional[str] = None,
) -> RunReport:
    """Solve the instance by scanning all admissible lengths in ascending order."""
    start = time.perf_counter()
    deadline = None if budget is None else start + budget
    best = trivial_solution(inst)
    z_star = evaluate(inst, best).objective
    report = RunReport(cfg.level, backend, z_star, z_star, best, False, "exhausted")
    for length in inst.lengths():
        b = compute_bounds(inst, length, z_star)
        t0 = time.perf_counter()
        if cfg.skip and should_skip(b):
            outcome = SolveOutcome(SKIPPED)
        else:
            remaining = None if deadline is None else deadline - t0
            outcome = solve_fixed_length(inst, length, b, cfg, backend, remaining, solver_cmd)
        if outcome.status == IMPROVED:
            if outcome.objective >= z_star:
                raise AssertionError("backend reported an improvement that does not improve")
            best, z_star = outcome.sequence, outcome.objective
        elif outcome.status == TIMED_OUT and outcome.objective is not None and outcome.objective < z_star:
            best, z_star = outcome.sequence, outcome.objective
        now = time.perf_counter()
        report.iterations.append(IterationRecord(
            length=length,
            skipped=outcome.status == SKIPPED,
            status=outcome.status,
            objective=outcome.objective,
            incumbent=z_star,
            bounds=b.snapshot(),
            nodes=outcome.nodes,
            seconds=now - t0,
            cumulative=now - start,
        ))
        log.debug("length %d: %s (z*=%d, %d nodes)", length, outcome.status, z_star, outcome.nodes)
        if outcome.status == TIMED_OUT:
            report.termination = "time-limit"
            break
    report.objective = z_star
    report.sequence = best
    report.proven_optimal = report.termination == "exhausted"
    report.seconds = time.perf_counter() - start
    return report
