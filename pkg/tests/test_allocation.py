"""Budget allocation: exact-arithmetic oracles and randomized properties.

The oracle evaluates clip(round(alpha * sqrt(n)), m_min, u) with rational
arithmetic only: round-half-away-from-zero of alpha*sqrt(n) is decided by
comparing alpha^2 * n against squared half-integers, which is exact for
rational alpha. Dyadic alphas (denominator 64) are also exact in binary
floating point, so oracle and implementation must agree bit-for-bit there.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from replaykit import allocate_budget, effective_cap, total_for_alpha
from replaykit.errors import InfeasibleBudget


# -- oracle -------------------------------------------------------------------

def round_half_away_exact(alpha: Fraction, n: int) -> int:
    """round(alpha * sqrt(n)) via exact comparisons of squares."""
    target = alpha * alpha * n
    t = 0
    while Fraction(2 * t + 1, 2) ** 2 <= target:
        t += 1
    return t


def cap_exact(n: int, m_max: int, p_max: Fraction) -> int:
    return min(m_max, n, math.floor(p_max * n))


def total_exact(counts, alpha: Fraction, m_min: int, m_max: int, p_max: Fraction) -> int:
    total = 0
    for n in counts.values():
        u = cap_exact(n, m_max, p_max)
        total += min(max(round_half_away_exact(alpha, n), m_min), u)
    return total


def scan_alpha_exact(counts, budget, m_min, m_max, p_max: Fraction):
    """Largest-interval alpha with TOTAL <= budget, by exhaustive breakpoint scan.

    Breakpoints sit where alpha * sqrt(n) crosses a half-integer, i.e. at
    alpha^2 = (2t-1)^2 / (4n). Returns a rational alpha^2 strictly inside the
    winning interval plus the per-class quotas there, or None when no
    interval is feasible.
    """
    breakpoints = {Fraction(0)}
    for n in counts.values():
        u = cap_exact(n, m_max, p_max)
        for t in range(1, u + 2):
            breakpoints.add(Fraction((2 * t - 1) ** 2, 4 * n))
    ordered = sorted(breakpoints)

    def quotas_at(alpha_sq: Fraction):
        out = {}
        for label, n in counts.items():
            t = 0
            while Fraction((2 * t + 1) ** 2, 4) <= alpha_sq * n:
                t += 1
            out[label] = min(max(t, m_min), cap_exact(n, m_max, p_max))
        return out

    best = None
    for i, point in enumerate(ordered):
        # evaluate just above the breakpoint (quotas are right-continuous and
        # constant until the next breakpoint)
        probe = point if i == len(ordered) - 1 else (point + ordered[i + 1]) / 2
        quotas = quotas_at(probe)
        if sum(quotas.values()) <= budget:
            best = (probe, quotas)
    return best


# -- stated examples -----------------------------------------------------------

def test_effective_cap_examples():
    assert effective_cap(100, 20, 0.30) == 20
    assert effective_cap(10, 20, 0.30) == 3
    assert effective_cap(2, 20, 0.30) == 0


def test_total_for_alpha_direct_evaluation():
    counts = {"a": 100, "b": 25, "c": 9}
    expected = total_exact(counts, Fraction("0.66"), 1, 20, Fraction(1))
    assert expected == 12  # 7 + 3 + 2
    assert total_for_alpha(counts, 0.66, 1, 20, 1.0) == expected


def test_total_for_alpha_at_zero():
    counts = {"a": 100, "b": 2}
    # round(0) = 0 is clipped up to m_min, then capped
    assert total_for_alpha(counts, 0.0, 3, 20, 0.30) == 3 + 0


def test_total_for_alpha_perfect_square():
    assert total_for_alpha({"a": 16}, 1.0, 1, 20, 1.0) == 4


def test_allocate_budget_breakpoint_scan():
    counts = {"a": 100, "b": 25, "c": 9}
    best = scan_alpha_exact(counts, 12, 1, 20, Fraction(1))
    assert best is not None
    _, quotas = best
    assert quotas == {"a": 7, "b": 3, "c": 2}
    assert sum(quotas.values()) == 12  # no greedy adjustment needed

    plan = allocate_budget(counts, 12, 1, 20, 1.0)
    assert {q.class_label: q.k_c for q in plan.quotas} == quotas
    assert plan.shortfall == 0


def test_allocate_budget_single_class_absorbs_budget():
    plan = allocate_budget({"only": 10}, 4, 1, 20, 1.0)
    assert plan.quotas[0].k_c == 4


def test_allocate_budget_infeasible_below_class_count():
    with pytest.raises(InfeasibleBudget):
        allocate_budget({"a": 5, "b": 5, "c": 5}, 2, 1, 20, 1.0)
    with pytest.raises(InfeasibleBudget):
        allocate_budget({}, 5, 1, 20, 1.0)


def test_allocate_budget_saturates_at_caps():
    # budget above the cap sum: every class maxes out, shortfall recorded
    counts = {"a": 10, "b": 20}
    plan = allocate_budget(counts, 100, 1, 20, 0.30)
    caps = {q.class_label: q.u_c for q in plan.quotas}
    assert caps == {"a": 3, "b": 6}
    assert {q.class_label: q.k_c for q in plan.quotas} == caps
    assert plan.shortfall == 100 - 9


def test_allocate_budget_decrements_when_floor_overshoots():
    # m_min floor sums to 15 but budget is 6: decrements go below m_min
    counts = {"a": 100, "b": 100, "c": 100}
    plan = allocate_budget(counts, 6, 5, 20, 1.0)
    assert plan.total() == 6
    assert [q.k_c for q in plan.quotas] == [2, 2, 2]


# -- oracle agreement on dyadic grids -------------------------------------------

def test_total_for_alpha_matches_exact_oracle():
    rng = np.random.default_rng(41)
    for _ in range(200):
        n_classes = int(rng.integers(1, 12))
        counts = {f"c{i:02d}": int(rng.integers(1, 501)) for i in range(n_classes)}
        m_min = int(rng.integers(1, 7))
        m_max = m_min + int(rng.integers(0, 26))
        p_exact = Fraction(int(rng.integers(1, 65)), 64)
        alpha_exact = Fraction(int(rng.integers(0, 1601)), 64)
        expected = total_exact(counts, alpha_exact, m_min, m_max, p_exact)
        got = total_for_alpha(counts, float(alpha_exact), m_min, m_max, float(p_exact))
        assert got == expected


def test_allocate_budget_matches_breakpoint_scan():
    rng = np.random.default_rng(42)
    for _ in range(40):
        n_classes = int(rng.integers(2, 8))
        counts = {f"c{i:02d}": int(rng.integers(1, 120)) for i in range(n_classes)}
        m_min = int(rng.integers(1, 4))
        m_max = m_min + int(rng.integers(0, 15))
        p_exact = Fraction(int(rng.integers(8, 65)), 64)
        budget = n_classes + int(rng.integers(0, 60))
        best = scan_alpha_exact(counts, budget, m_min, m_max, p_exact)
        plan = allocate_budget(counts, budget, m_min, m_max, float(p_exact))
        if best is None:
            # even alpha=0 overshoots; decrements must land exactly on budget
            assert plan.total() == budget
            continue
        _, quotas = best
        scanned = sum(quotas.values())
        caps = {c: cap_exact(n, m_max, p_exact) for c, n in counts.items()}
        if scanned == min(budget, sum(caps.values())):
            # greedy pass has nothing to do; quotas must match the scan exactly
            assert {q.class_label: q.k_c for q in plan.quotas} == quotas
        assert plan.total() == min(budget, sum(caps.values()))


# -- randomized properties -------------------------------------------------------

def _random_inventory(rng):
    n_classes = int(rng.integers(2, 61))
    counts = {f"c{i:02d}": int(rng.integers(1, 501)) for i in range(n_classes)}
    m_min = int(rng.integers(1, 7))
    m_max = m_min + int(rng.integers(0, 26))
    p_max = float(rng.integers(1, 101)) / 100.0
    return counts, m_min, m_max, p_max


def test_allocation_properties_randomized():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for round_index in range(400):
        counts, m_min, m_max, p_max = _random_inventory(rng)
        caps = {c: effective_cap(n, m_max, p_max) for c, n in counts.items()}
        budget = len(counts) + int(rng.integers(0, 700))
        plan = allocate_budget(counts, budget, m_min, m_max, p_max)
        quotas = {q.class_label: q.k_c for q in plan.quotas}

        # bounds
        for q in plan.quotas:
            assert q.u_c == caps[q.class_label]
            if q.u_c >= 1:
                assert 1 <= q.k_c <= q.u_c
            else:
                assert q.k_c == 0

        # totals
        floor_total = sum(min(m_min, u) for u in caps.values())
        if floor_total <= budget:
            assert plan.total() == min(budget, sum(caps.values()))
        else:
            assert plan.total() == budget
        assert plan.shortfall == budget - plan.total()

        # count-monotonicity with slack 1 among classes with identical caps
        by_cap: dict[int, list[str]] = {}
        for label, u in caps.items():
            by_cap.setdefault(u, []).append(label)
        for labels in by_cap.values():
            labels.sort(key=lambda l: counts[l])
            for i, small in enumerate(labels):
                for large in labels[i + 1 :]:
                    assert quotas[large] >= quotas[small] - 1

        # determinism under class iteration order
        if round_index % 10 == 0:
            shuffled = list(counts.items())
            rng.shuffle(shuffled)
            assert allocate_budget(dict(shuffled), budget, m_min, m_max, p_max) == plan

        # TOTAL(alpha) monotone on a grid
        if round_index % 10 == 0:
            grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0]
            totals = [total_for_alpha(counts, a, m_min, m_max, p_max) for a in grid]
            assert totals == sorted(totals)

        # budget monotonicity
        if round_index % 10 == 0:
            bigger = allocate_budget(counts, budget + int(rng.integers(1, 50)),
                                     m_min, m_max, p_max)
            assert bigger.total() >= plan.total()
    assert time.perf_counter() - start < 30.0
