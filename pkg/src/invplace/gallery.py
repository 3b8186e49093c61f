"""Analytic worst-case families: the integrality-gap family and the greedy grid."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

import numpy as np

from .core import NetworkInstance, Placement
from .demand import ScenarioSet
from .offline import off_expected
from .placement import greedy_place

GREEDY_BONUS = 1e-9
BRUTE_FORCE_MAX_N = 8


def one_hot_scenarios(m: int) -> ScenarioSet:
    """Unit demand at one uniformly chosen type."""
    return ScenarioSet.from_matrix(np.eye(m, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class TightFamilyInstance:
    n: int
    d: int
    inst: NetworkInstance
    scenarios: ScenarioSet
    server_sets: tuple

    @property
    def Q(self) -> int:
        return self.inst.Q


def build_tight(n: int, d: int) -> TightFamilyInstance:
    """``C(n, d)`` types, one per ``d``-subset of the ``n`` DCs, reward 1; ``Q = n/d``."""
    if d < 1 or n < d or n % d:
        raise ValueError(f"n={n} must be a positive multiple of d={d}")
    if math.comb(n, d) > 10**6:
        raise ValueError("too many demand types")
    sets = tuple(itertools.combinations(range(n), d))
    R = np.zeros((n, len(sets)))
    for j, s in enumerate(sets):
        R[list(s), j] = 1.0
    return TightFamilyInstance(n, d, NetworkInstance(R, n // d), one_hot_scenarios(len(sets)), sets)


def tight_ratio_closed_form(n: int, d: int) -> Fraction:
    """Best integral value over the fractional optimum 1, as an exact fraction."""
    q = n // d
    prod = Fraction(1)
    for l in range(d):
        prod *= Fraction(n - q - l, n - l)
    return 1 - prod


def _compositions(total: int, parts: int):
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield out


@dataclass(frozen=True)
class TightGap:
    integer_opt: float
    fractional_opt: float
    ratio: float
    brute_force: bool
    argmax: tuple = ()


def tight_gap(n: int, d: int, brute_force: bool = None) -> TightGap:
    """Integrality gap of the family; exhaustive over integer placements when small."""
    fam = build_tight(n, d)
    frac = off_expected(fam.inst, np.full(n, 1.0 / d), fam.scenarios)
    if brute_force is None:
        brute_force = n <= BRUTE_FORCE_MAX_N
    if brute_force:
        best, arg = -1.0, ()
        for x in _compositions(fam.Q, n):
            v = off_expected(fam.inst, x, fam.scenarios)
            if v > best + 1e-12:
                best, arg = v, tuple(x)
        return TightGap(best, frac, best / frac, True, arg)
    ratio = float(tight_ratio_closed_form(n, d))
    return TightGap(ratio * frac, frac, ratio, False)


# ---------------------------------------------------------------- greedy grid


def grid_column_rewards(Q: int) -> Tuple[int, ...]:
    """Unscaled rewards ``r_1..r_Q``: ``r_Q = (Q-1)^(Q-1)`` and ``Q r_i = sum_{j>=i} r_j``."""
    if Q < 2:
        raise ValueError("the grid needs Q >= 2")
    r = [0] * (Q + 1)
    r[Q] = (Q - 1) ** (Q - 1)
    tail = r[Q]
    for i in range(Q - 1, 0, -1):
        # (Q-1) r_i = sum_{j>i} r_j
        if tail % (Q - 1):
            raise ArithmeticError("recursion left the integers")
        r[i] = tail // (Q - 1)
        tail += r[i]
    return tuple(r[1:])


@dataclass(frozen=True, eq=False)
class GreedyGridInstance:
    Q: int
    inst: NetworkInstance
    scenarios: ScenarioSet
    column_rewards: tuple  # unscaled integers
    scale: Fraction  # multiply unscaled rewards by this
    perturbation: np.ndarray  # bonus on each DC's marginal gain

    @property
    def row_dcs(self) -> range:
        return range(self.Q)

    @property
    def column_dcs(self) -> range:
        return range(self.Q, 2 * self.Q - 1)


def build_greedy_grid(Q: int) -> GreedyGridInstance:
    """``Q x Q`` locations; DCs ``0..Q-1`` serve rows, ``Q..2Q-2`` the first ``Q-1`` columns.

    Location ``(a, c)`` is demand type ``a*Q + c`` and pays the column reward
    ``r_c`` from either DC covering it. Rewards are divided by
    ``max(Q^2, max r)`` so they stay in ``[0, 1]``.
    """
    cols = grid_column_rewards(Q)
    scale = Fraction(1, max(Q * Q, max(cols)))
    R = np.zeros((2 * Q - 1, Q * Q))
    for a in range(Q):
        for c in range(Q):
            v = float(cols[c] * scale)
            j = a * Q + c
            R[a, j] = v
            if c < Q - 1:
                R[Q + c, j] = v
    bonus = np.zeros(2 * Q - 1)
    bonus[Q:] = GREEDY_BONUS
    return GreedyGridInstance(Q, NetworkInstance(R, Q), one_hot_scenarios(Q * Q), cols, scale, bonus)


@dataclass(frozen=True)
class GreedyGap:
    greedy_value: float
    optimal_value: float
    ratio: float
    greedy_placement: tuple
    trace: tuple


def greedy_gap(Q: int) -> GreedyGap:
    if Q > 8:
        raise ValueError("Q^Q grows too fast beyond Q = 8")
    g = build_greedy_grid(Q)
    x, trace = greedy_place(g.inst, g.scenarios, Q, perturbation=g.perturbation, return_trace=True)
    greedy_value = off_expected(g.inst, x, g.scenarios)
    rows = np.zeros(2 * Q - 1, dtype=np.int64)
    rows[:Q] = 1
    optimal = off_expected(g.inst, Placement(rows), g.scenarios)
    return GreedyGap(greedy_value, optimal, greedy_value / optimal, tuple(x.x.tolist()), trace)


def greedy_gap_exact(Q: int) -> Tuple[Fraction, Fraction]:
    """Closed-form greedy and optimal values under the builder's scaling."""
    s = build_greedy_grid(Q).scale
    return Fraction(Q**Q - (Q - 1) ** Q, Q * Q) * s, Fraction(Q**Q, Q * Q) * s
