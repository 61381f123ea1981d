"""Incumbent-dependent bounds for one fixed sequence length.

``z_star=None`` stands for "no incumbent yet"; every incumbent-dependent
quantity then degrades to its plain counting version.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from .core import Instance, dist


class NoImprovingValue(ValueError):
    """Raised when no weight multiple lies strictly below the incumbent."""


def k_star(w_i: int, f_i: int, length: int, z_star: Optional[int]) -> Optional[int]:
    """Fewest occurrences of a symbol that still allow beating ``z_star``.

    A symbol placed k times on a cycle of ``length`` has largest gap at least
    ceil(length / k), so we need w_i * ceil(length / k) < z_star. Returns
    None when even ``k = length`` does not suffice.
    """
    if z_star is None:
        return f_i
    max_gap = (z_star - 1) // w_i
    if max_gap < 1:
        return None
    k = max(f_i, -(-length // max_gap))
    return k if k <= length else None


def theta_cap(w: Tuple[int, ...], z_star: int) -> int:
    """Largest positive multiple of some weight that is strictly below ``z_star``."""
    candidates = [wi * ((z_star - 1) // wi) for wi in w if z_star - 1 >= wi]
    if not candidates:
        raise NoImprovingValue(f"no multiple of the weights lies below {z_star}")
    return max(candidates)


def literature_count_bound(n: int, length: int) -> int:
    """The occurrence bound min(length/2, length - n - 1) as stated in the literature.

    Kept for reference only: it can cut off every optimal solution when the
    horizon is short (see ``tests/test_bounds.py``). :func:`count_bounds`
    is what the solvers use.
    """
    return min(length // 2, length - n - 1)


def count_bounds(inst: Instance, length: int) -> Tuple[int, ...]:
    """Occurrence upper bounds met by at least one optimal solution.

    Deleting one of two circularly adjacent copies of a symbol never increases
    any gap, so some optimal solution has no adjacent copies of a symbol unless
    that symbol sits exactly at its minimum count. Hence
    count_i <= max(f_i, length // 2); the other symbols need their f_j slots.
    """
    total = inst.min_length
    return tuple(
        min(max(fi, length // 2), length - (total - fi)) for fi in inst.f
    )


@dataclass(frozen=True)
class IterationBounds:
    length: int
    z_star: Optional[int]
    theta_cap: Optional[int]
    k_star: Tuple[Optional[int], ...]
    K_star: Optional[int]
    M: Tuple[int, ...]
    M_star: Tuple[int, ...]

    @property
    def has_incumbent(self) -> bool:
        return self.z_star is not None

    @property
    def impossible(self) -> bool:
        return any(k is None for k in self.k_star)

    def count_upper(self, i: int, lifted: bool) -> int:
        """Occurrence cap of 0-based symbol ``i``; the tighter bound when ``lifted``."""
        return min(self.M[i], self.M_star[i]) if lifted else self.M[i]

    def snapshot(self) -> dict:
        return {
            "z_star": self.z_star,
            "theta_cap": self.theta_cap,
            "k_star": list(self.k_star),
            "K_star": self.K_star,
            "M": list(self.M),
            "M_star": list(self.M_star),
        }


def compute_bounds(inst: Instance, length: int, z_star: Optional[int] = None) -> IterationBounds:
    if not inst.min_length <= length <= inst.T:
        raise ValueError(f"length {length} outside {inst.min_length}..{inst.T}")
    M = count_bounds(inst, length)
    if z_star is None:
        return IterationBounds(length, None, None, inst.f, inst.min_length, M, M)
    try:
        cap = theta_cap(inst.w, z_star)
    except NoImprovingValue:
        cap = 0
    ks = tuple(k_star(wi, fi, length, z_star) for wi, fi in zip(inst.w, inst.f))
    if any(k is None for k in ks):
        K = None
        M_star = M
    else:
        K = sum(ks)
        M_star = tuple(length - K + k for k in ks)
    return IterationBounds(length, z_star, cap, ks, K, M, M_star)


def should_skip(b: IterationBounds) -> bool:
    """True when no sequence of this length can beat the incumbent."""
    if b.z_star is None:
        return False
    return b.impossible or b.K_star > b.length


def adjacent_pair(t: int, t2: int, length: int) -> bool:
    """Distinct positions that are neighbours on the cycle."""
    return t != t2 and (abs(t - t2) == 1 or {t, t2} == {1, length})


def p_fixed_zero(
    inst: Instance, b: IterationBounds, i: int, t: int, t2: int,
    adjacency: bool = True, objective: bool = True,
) -> bool:
    """Whether predecessor indicator p[i, t, t2] (0-based ``i``) can be fixed to zero.

    Adjacency fixing is applied only to symbols with f_i = 1; for larger f_i
    an optimal solution may need adjacent copies.
    """
    if adjacency and inst.f[i] == 1 and adjacent_pair(t, t2, b.length):
        return True
    if objective and b.z_star is not None:
        return inst.w[i] * dist(t, t2, b.length) >= b.z_star
    return False


def s_fixed_zero(
    inst: Instance, b: IterationBounds, i: int, t: int, t2: int,
    adjacency: bool = True, objective: bool = True,
) -> bool:
    """Successor counterpart of :func:`p_fixed_zero`; the distance runs from t2 back to t."""
    if adjacency and inst.f[i] == 1 and adjacent_pair(t, t2, b.length):
        return True
    if objective and b.z_star is not None:
        return inst.w[i] * dist(t2, t, b.length) >= b.z_star
    return False


def fixed_pairs(inst: Instance, b: IterationBounds, i: int, successor: bool = False, **flags) -> List[Tuple[int, int]]:
    pred = s_fixed_zero if successor else p_fixed_zero
    L = b.length
    return [
        (t, t2)
        for t in range(1, L + 1)
        for t2 in range(1, L + 1)
        if pred(inst, b, i, t, t2, **flags)
    ]
