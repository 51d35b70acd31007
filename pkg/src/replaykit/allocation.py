"""Count-aware budget allocation across classes.

Each class with n_c available assets gets a quota k_c proportional to
sqrt(n_c), clipped to [m_min, u_c] where u_c = min(m_max, n_c,
floor(p_max * n_c)). The proportionality constant alpha is found by an
exponential bracket plus fixed-count bisection, then quotas are nudged by
greedy +-1 adjustments until they sum to the budget (or hit the caps).
"""

from __future__ import annotations

import math
from collections.abc import Mapping

from .errors import InfeasibleBudget, SchemaError
from .model import AllocationPlan, ClassInventory, ClassQuota

_DOUBLINGS = 60
_BISECTIONS = 64


def effective_cap(n_c: int, m_max: int, p_max: float) -> int:
    """Per-class quota ceiling: min(m_max, n_c, floor(p_max * n_c))."""
    if n_c < 1:
        raise SchemaError(f"n_c must be positive, got {n_c}")
    if m_max < 1:
        raise SchemaError(f"m_max must be positive, got {m_max}")
    if not 0 < p_max <= 1:
        raise SchemaError(f"p_max must be in (0, 1], got {p_max}")
    return min(m_max, n_c, math.floor(p_max * n_c))


def total_for_alpha(
    inventory: ClassInventory | Mapping[str, int],
    alpha: float,
    m_min: int,
    m_max: int,
    p_max: float,
) -> int:
    """Sum over classes of clip(round(alpha * sqrt(n_c)), m_min, u_c).

    Rounding is half away from zero; clip(x, lo, hi) = min(max(x, lo), hi),
    so the cap wins when u_c < m_min.
    """
    if alpha < 0:
        raise SchemaError(f"alpha must be non-negative, got {alpha}")
    counts = _counts(inventory)
    total = 0
    for n in counts.values():
        u = effective_cap(n, m_max, p_max)
        total += _clip(_round_half_away(alpha * math.sqrt(n)), m_min, u)
    return total


def allocate_budget(
    inventory: ClassInventory | Mapping[str, int],
    budget: int,
    m_min: int = 3,
    m_max: int = 20,
    p_max: float = 0.30,
) -> AllocationPlan:
    """Split a replay budget across classes.

    Alpha search: double from 1.0 until the total exceeds the budget (at most
    60 doublings), then 64 bisection iterations keep the largest tested alpha
    whose total still fits. Quotas from that alpha are then adjusted greedily:
    while under budget, increment the smallest quota that still has cap
    headroom (ties: larger n_c first, then lexicographically smaller label);
    while over budget, decrement the largest quota (same tie order), never
    below 1. Decrements may land below m_min; caps are never exceeded.

    Returns:
        AllocationPlan with quotas in sorted label order. shortfall > 0 only
        when the caps bind (sum of u_c below budget).

    Raises:
        InfeasibleBudget: budget below the class count, or empty inventory.
    """
    counts = _counts(inventory)
    if not counts:
        raise InfeasibleBudget("inventory is empty")
    if budget < 0:
        raise SchemaError(f"budget must be non-negative, got {budget}")
    if m_min < 1:
        raise SchemaError(f"m_min must be positive, got {m_min}")
    if m_max < m_min:
        raise SchemaError(f"m_max must be >= m_min, got {m_max} < {m_min}")
    if budget < len(counts):
        raise InfeasibleBudget(f"budget {budget} is below the class count {len(counts)}")

    caps = {label: effective_cap(n, m_max, p_max) for label, n in counts.items()}
    roots = {label: math.sqrt(n) for label, n in counts.items()}

    def total(alpha: float) -> int:
        return sum(_clip(_round_half_away(alpha * roots[c]), m_min, caps[c]) for c in counts)

    alpha = _search_alpha(total, budget)
    quotas = {c: _clip(_round_half_away(alpha * roots[c]), m_min, caps[c]) for c in counts}
    assigned = sum(quotas.values())

    while assigned < budget:
        candidates = [c for c in counts if quotas[c] < caps[c]]
        if not candidates:
            break  # caps bind; positive shortfall
        pick = min(candidates, key=lambda c: (quotas[c], -counts[c], c))
        quotas[pick] += 1
        assigned += 1
    while assigned > budget:
        candidates = [c for c in counts if quotas[c] >= 2]
        if not candidates:
            raise InfeasibleBudget(
                f"cannot reduce quotas below one per class to reach budget {budget}"
            )
        pick = min(candidates, key=lambda c: (-quotas[c], -counts[c], c))
        quotas[pick] -= 1
        assigned -= 1

    plan_quotas = tuple(
        ClassQuota(label, counts[label], caps[label], quotas[label]) for label in sorted(counts)
    )
    return AllocationPlan(budget, alpha, plan_quotas, budget - assigned)


def _search_alpha(total, budget: int) -> float:
    """Largest tested alpha with total(alpha) <= budget (0.0 when none fits)."""
    if total(0.0) > budget:
        return 0.0  # even the floor overshoots; the decrement pass finishes the job
    if total(1.0) > budget:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = 1.0, None
        alpha = 1.0
        for _ in range(_DOUBLINGS):
            alpha *= 2.0
            if total(alpha) > budget:
                hi = alpha
                break
            lo = alpha
        if hi is None:
            return lo  # totals saturated at the caps and never exceeded the budget
    for _ in range(_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if total(mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def _round_half_away(x: float) -> int:
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


def _clip(x: int, lo: int, hi: int) -> int:
    return min(max(x, lo), hi)


def _counts(inventory: ClassInventory | Mapping[str, int]) -> dict[str, int]:
    if isinstance(inventory, ClassInventory):
        return inventory.counts()
    counts = dict(inventory)
    for label, n in counts.items():
        if not isinstance(n, int) or n < 1:
            raise SchemaError(f"class {label!r} count must be a positive integer, got {n!r}")
    return counts
