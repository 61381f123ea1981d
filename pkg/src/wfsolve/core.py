"""Problem data, sequences and the circular weight-distance objective.

Everything here is integral and immutable. Positions and symbol labels are
1-based at every public boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence as Seq, Tuple

MASK64 = (1 << 64) - 1


class InstanceError(ValueError):
    """Malformed or infeasible instance data.

    ``reason`` is one of ``"lines"``, ``"header"``, ``"token"``, ``"count"``,
    ``"non-positive"`` or ``"horizon"`` so callers can tell diagnostics apart.
    """

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


class SequenceFormatError(ValueError):
    pass


class InfeasibleSequenceError(ValueError):
    def __init__(self, violations: List[str]):
        super().__init__(violations[0])
        self.violations = violations


@dataclass(frozen=True)
class Instance:
    n: int
    T: int
    w: Tuple[int, ...]
    f: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(int(v) for v in self.w))
        object.__setattr__(self, "f", tuple(int(v) for v in self.f))
        if self.n < 1:
            raise InstanceError("header", f"symbol count must be positive, got {self.n}")
        if self.T < 1:
            raise InstanceError("header", f"horizon must be positive, got {self.T}")
        if len(self.w) != self.n:
            raise InstanceError("count", f"expected {self.n} weights, got {len(self.w)}")
        if len(self.f) != self.n:
            raise InstanceError("count", f"expected {self.n} frequencies, got {len(self.f)}")
        for i, v in enumerate(self.w, 1):
            if v < 1:
                raise InstanceError("non-positive", f"weight of symbol {i} is {v}, must be >= 1")
        for i, v in enumerate(self.f, 1):
            if v < 1:
                raise InstanceError("non-positive", f"frequency of symbol {i} is {v}, must be >= 1")
        if self.T < self.min_length:
            raise InstanceError(
                "horizon",
                f"horizon T={self.T} is below the total required occurrences {self.min_length}",
            )

    @property
    def min_length(self) -> int:
        return sum(self.f)

    def lengths(self) -> range:
        """All admissible sequence lengths, ascending."""
        return range(self.min_length, self.T + 1)


@dataclass(frozen=True)
class Sequence:
    symbols: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if not self.symbols:
            raise SequenceFormatError("a sequence needs at least one position")

    @property
    def length(self) -> int:
        return len(self.symbols)

    def positions(self, symbol: int) -> List[int]:
        """1-based positions at which ``symbol`` occurs."""
        return [t for t, s in enumerate(self.symbols, 1) if s == symbol]

    def rotate(self, r: int) -> "Sequence":
        r %= self.length
        return Sequence(self.symbols[r:] + self.symbols[:r])

    def __str__(self) -> str:
        return " ".join(f"a{s}" for s in self.symbols)


@dataclass(frozen=True)
class Evaluation:
    D: Tuple[int, ...]
    products: Tuple[int, ...]
    objective: int

    @property
    def binding(self) -> List[int]:
        """1-based labels of the symbols attaining the objective."""
        return [i for i, p in enumerate(self.products, 1) if p == self.objective]


def dist(t: int, t2: int, length: int) -> int:
    """Circular distance going backwards from ``t`` to ``t2`` on a cycle of ``length``.

    >>> dist(3, 1, 8), dist(1, 3, 8), dist(4, 4, 8)
    (2, 6, 8)
    """
    if not (1 <= t <= length and 1 <= t2 <= length):
        raise ValueError(f"positions ({t}, {t2}) outside 1..{length}")
    return t - t2 if t > t2 else length + t - t2


def max_circular_gaps(symbols: Seq[int], n: int) -> List[int]:
    """Largest circular gap per symbol for a 1-based symbol list (0 if absent)."""
    length = len(symbols)
    first = [0] * (n + 1)
    last = [0] * (n + 1)
    gap = [0] * (n + 1)
    for t, s in enumerate(symbols, 1):
        if last[s]:
            d = t - last[s]
            if d > gap[s]:
                gap[s] = d
        else:
            first[s] = t
        last[s] = t
    for s in range(1, n + 1):
        if last[s]:
            wrap = length + first[s] - last[s]
            if wrap > gap[s]:
                gap[s] = wrap
    return gap[1:]


def validate(inst: Instance, seq: Sequence, partial: bool = False) -> List[str]:
    """Return the list of violated conditions; empty means feasible.

    With ``partial=True`` the occurrence lower bounds are not checked, which is
    how incomplete heuristic sequences can still be scored.
    """
    violations = []
    if seq.length > inst.T:
        violations.append(f"length {seq.length} exceeds horizon T={inst.T}")
    counts = [0] * (inst.n + 1)
    for t, s in enumerate(seq.symbols, 1):
        if not 1 <= s <= inst.n:
            violations.append(f"position {t} holds symbol {s}, outside 1..{inst.n}")
        else:
            counts[s] += 1
    if not partial:
        for i in range(1, inst.n + 1):
            if counts[i] < inst.f[i - 1]:
                violations.append(
                    f"symbol a{i} occurs {counts[i]} times, needs at least {inst.f[i - 1]}"
                )
    return violations


def evaluate(inst: Instance, seq: Sequence, partial: bool = False) -> Evaluation:
    violations = validate(inst, seq, partial=partial)
    if violations:
        raise InfeasibleSequenceError(violations)
    gaps = max_circular_gaps(seq.symbols, inst.n)
    products = tuple(w * d for w, d in zip(inst.w, gaps))
    return Evaluation(D=tuple(gaps), products=products, objective=max(products))


def trivial_solution(inst: Instance) -> Sequence:
    """f_1 copies of a_1, then f_2 copies of a_2, and so on."""
    return Sequence(tuple(i for i in range(1, inst.n + 1) for _ in range(inst.f[i - 1])))


# -- text formats -----------------------------------------------------------


def _content_lines(text: str) -> List[str]:
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return lines


def _ints(line: str, what: str) -> List[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError:
        raise InstanceError("token", f"non-integer token in {what}: {line!r}") from None


def parse_instance(text: str) -> Instance:
    """Parse the three-line instance format (``n T`` / weights / frequencies)."""
    lines = _content_lines(text)
    if len(lines) != 3:
        raise InstanceError("lines", f"expected 3 content lines, found {len(lines)}")
    header = _ints(lines[0], "header")
    if len(header) != 2:
        raise InstanceError("header", f"header must be 'n T', got {lines[0]!r}")
    n, T = header
    if n < 1 or T < 1:
        raise InstanceError("header", f"header values must be positive, got n={n} T={T}")
    w = _ints(lines[1], "weights")
    if len(w) != n:
        raise InstanceError("count", f"expected {n} weights, got {len(w)}")
    f = _ints(lines[2], "frequencies")
    if len(f) != n:
        raise InstanceError("count", f"expected {n} frequencies, got {len(f)}")
    return Instance(n=n, T=T, w=tuple(w), f=tuple(f))


def format_instance(inst: Instance) -> str:
    return (
        f"{inst.n} {inst.T}\n"
        + " ".join(map(str, inst.w)) + "\n"
        + " ".join(map(str, inst.f)) + "\n"
    )


def parse_sequence(text: str) -> Sequence:
    lines = _content_lines(text)
    if len(lines) != 2:
        raise SequenceFormatError(f"expected 2 content lines, found {len(lines)}")
    try:
        length = int(lines[0])
        symbols = [int(tok) for tok in lines[1].split()]
    except ValueError:
        raise SequenceFormatError("sequence file holds a non-integer token") from None
    if len(symbols) != length:
        raise SequenceFormatError(f"header announces {length} positions, found {len(symbols)}")
    return Sequence(tuple(symbols))


def format_sequence(seq: Sequence) -> str:
    return f"{seq.length}\n" + " ".join(map(str, seq.symbols)) + "\n"


# -- deterministic instance generation ------------------------------------


class SplitMix64:
    """SplitMix64 (Steele, Lea, Flood 2014) with rejection-sampled bounded draws.

    Chosen because it is a handful of 64-bit integer operations, so the same
    seed produces the same instances in any language.
    """

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)``; draws >= the largest multiple are rejected."""
        limit = ((1 << 64) // bound) * bound
        while True:
            r = self.next_u64()
            if r < limit:
                return r % bound


def derive_seed(seed: int, index: int) -> int:
    """Per-file seed for the ``index``-th instance of a batch."""
    return SplitMix64((seed + index * 0xD1B54A32D192ED03) & MASK64).next_u64()


def generate_instance(n: int, T: int, seed: int, max_freq: int = 1) -> Instance:
    """Weights uniform on {1..2n}; frequencies are 1 unless ``max_freq`` > 1."""
    if n < 1:
        raise InstanceError("header", f"symbol count must be positive, got {n}")
    if T < n:
        raise InstanceError("horizon", f"horizon T={T} is below n={n}")
    rng = SplitMix64(seed)
    w = tuple(1 + rng.below(2 * n) for _ in range(n))
    if max_freq == 1:
        f = (1,) * n
    else:
        f = tuple(1 + rng.below(max_freq) for _ in range(n))
    return Instance(n=n, T=T, w=w, f=f)
