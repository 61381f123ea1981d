"""Brute-force reference solvers.

Only :mod:`wfsolve.core` is imported here so that nothing in the bounding,
modelling or search code can leak into the reference answers. Enumeration
prunes a prefix only when the remaining positions cannot host the missing
occurrences; objective values are never used to cut the search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

from .core import Instance, Sequence, derive_seed, generate_instance, max_circular_gaps

DEFAULT_WORK_LIMIT = 5_000_000


class WorkLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleResult:
    objective: int
    sequence: Sequence


def brute_force_fixed_length(
    inst: Instance, length: int, work_limit: int = DEFAULT_WORK_LIMIT
) -> Optional[OracleResult]:
    """Optimum over all sequences of exactly ``length`` positions, or None if none is feasible."""
    if inst.n ** length > work_limit:
        raise WorkLimitExceeded(f"{inst.n}^{length} sequences exceed the work limit {work_limit}")
    if length < inst.min_length:
        return None
    n, w, f = inst.n, inst.w, inst.f
    counts = [0] * (n + 1)
    seq = [0] * length
    best: List = [None, None]

    def missing() -> int:
        return sum(max(0, f[i - 1] - counts[i]) for i in range(1, n + 1))

    def rec(t: int) -> None:
        if t == length:
            gaps = max_circular_gaps(seq, n)
            value = max(wi * g for wi, g in zip(w, gaps))
            if best[0] is None or value < best[0]:
                best[0] = value
                best[1] = tuple(seq)
            return
        for s in range(1, n + 1):
            seq[t] = s
            counts[s] += 1
            if missing() <= length - t - 1:
                rec(t + 1)
            counts[s] -= 1

    rec(0)
    if best[0] is None:
        return None
    return OracleResult(best[0], Sequence(best[1]))


def brute_force_global(inst: Instance, work_limit: int = DEFAULT_WORK_LIMIT) -> OracleResult:
    """Optimum over every admissible length; ties keep the shortest sequence."""
    total = sum(inst.n ** length for length in inst.lengths())
    if total > work_limit:
        raise WorkLimitExceeded(f"{total} sequences exceed the work limit {work_limit}")
    best = None
    for length in inst.lengths():
        res = brute_force_fixed_length(inst, length, work_limit)
        if res is not None and (best is None or res.objective < best.objective):
            best = res
    assert best is not None  # the instance invariant guarantees a feasible length
    return best


def min_max_gap(length: int, k: int) -> int:
    """Smallest achievable largest circular gap when placing ``k`` marks on ``length`` slots."""
    if not 1 <= k <= length:
        raise ValueError(f"need 1 <= k <= length, got k={k}, length={length}")
    best = length
    for marks in itertools.combinations(range(length), k):
        gap = length + marks[0] - marks[-1]
        for a, b in zip(marks, marks[1:]):
            if b - a > gap:
                gap = b - a
        if gap < best:
            best = gap
    return best


# -- the fixed reference suite -------------------------------------------

SUITE_SEED = 20201

def reference_suite() -> List[Tuple[str, Instance]]:
    """60 small instances: 50 with f_i = 1 and 10 with f_i in {1, 2}."""
    suite = []
    for index in range(50):
        seed = derive_seed(SUITE_SEED, index)
        n = 1 + index % 4
        T = n + seed % (10 - n)
        suite.append((f"g{index:02d}-n{n}-T{T}", generate_instance(n, T, seed)))
    for index in range(50, 60):
        seed = derive_seed(SUITE_SEED, index)
        n = 2 + index % 3
        T = 2 * n + seed % (10 - 2 * n)
        suite.append((f"m{index:02d}-n{n}-T{T}", generate_instance(n, T, seed, max_freq=2)))
    return suite


def write_reference(entries: Iterable[Tuple[str, int]]) -> str:
    return "".join(f"{name} {value}\n" for name, value in entries)


def read_reference(text: str) -> Dict[str, int]:
    table = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, value = line.split()
        table[name] = int(value)
    return table
