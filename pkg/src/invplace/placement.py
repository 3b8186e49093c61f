"""Placement procedures mapping training data to an integer placement."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ArrivalSequence, NetworkInstance, Placement, aggregate, rng_stream
from .demand import ScenarioSet
from .fulfillment import MyopicPolicy, PackedSequences, star_myopic_rewards
from .offline import fluid_placement_lp, off_expected, saa_placement
from .rounding import round_placement

IMPROVE_TOL = 1e-9
PROCEDURES = ("proportional", "fluid", "offline", "myopic", "greedy")


@dataclass(frozen=True, eq=False)
class PlacementReport:
    procedure: str
    x: Placement
    objective: float  # sample-average hindsight value on the training scenarios
    wall_clock: float
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "procedure": self.procedure,
            "x": self.x.x.tolist(),
            "Q": self.x.Q,
            "objective": self.objective,
            "wall_clock": self.wall_clock,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def largest_remainder(values, Q: int) -> Placement:
    """Integer vector summing to ``Q``: floors plus one unit for the largest remainders.

    Remainder ties go to the lowest index.
    """
    v = np.asarray(values, dtype=float)
    near = np.abs(v - np.round(v)) <= 1e-9
    v = np.where(near, np.round(v), v)
    base = np.floor(v).astype(np.int64)
    short = Q - int(base.sum())
    if short < 0:
        raise ValueError("floors already exceed Q")
    order = np.lexsort((np.arange(len(v)), -(v - base)))
    base[order[:short]] += 1
    return Placement(base)


def proportional_place(mean_demand, Q: int) -> Placement:
    """Inventory proportional to mean demand; all units at DC 0 if demand is zero."""
    d = np.asarray(mean_demand, dtype=float)
    if Q == 0:
        return Placement(np.zeros(len(d), dtype=np.int64))
    if d.sum() <= 0:
        x = np.zeros(len(d), dtype=np.int64)
        x[0] = Q
        return Placement(x)
    return largest_remainder(Q * d / d.sum(), Q)


def offline_place(inst: NetworkInstance, scenarios: ScenarioSet, Q: int, rng: np.random.Generator) -> Placement:
    """Sample-average LP placement, rounded dependently where it is fractional."""
    if Q == 0:
        return Placement(np.zeros(inst.n, dtype=np.int64))
    sol = saa_placement(inst, scenarios, Q)
    return round_placement(sol.x_hat.snapped(), rng)


def fluid_place(inst: NetworkInstance, mean_demand, Q: int, prefer: str = "rdc") -> Placement:
    x, _ = fluid_placement_lp(inst, mean_demand, Q, prefer=prefer)
    return largest_remainder(x.x, Q)


def _myopic_evaluator(inst: NetworkInstance, seqs: Sequence[ArrivalSequence]):
    """Returns ``f(X) -> mean myopic reward`` for a batch of placements."""
    if inst.star is not None:
        packed = PackedSequences.of(seqs, inst.m)
        return lambda X: star_myopic_rewards(inst, X, packed)

    from .harness import simulate

    def f(X):
        X = np.atleast_2d(X)
        return np.array([np.mean([simulate(inst, Placement(x), MyopicPolicy(), q).reward for q in seqs]) for x in X])

    return f


def _moves(x: np.ndarray):
    n = len(x)
    out = []
    for i in range(n):
        if x[i] == 0:
            continue
        for k in range(n):
            if k != i:
                y = x.copy()
                y[i] -= 1
                y[k] += 1
                out.append(y)
    return np.array(out, dtype=np.int64).reshape(-1, n)


@dataclass(frozen=True, eq=False)
class LocalSearchTrace:
    path: tuple  # placements visited
    values: tuple  # training myopic reward along the path


def myopic_place(
    inst: NetworkInstance,
    training_sequences: Sequence[ArrivalSequence],
    Q: int,
    init: Optional[Placement] = None,
    strategy: str = "best",
    max_iter: int = 100_000,
    return_trace: bool = False,
):
    """Single-unit-move local search on the mean myopic reward over training sequences.

    ``strategy`` is ``"best"`` (take the best improving move) or ``"first"``
    (take the first improving move in scan order).
    """
    seqs = list(training_sequences)
    if not seqs:
        raise ValueError("need at least one training sequence")
    if strategy not in ("best", "first"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if init is None:
        mean = np.mean([aggregate(q).D for q in seqs], axis=0)
        init = proportional_place(mean, Q)
    if init.Q != Q or init.n != inst.n:
        raise ValueError("initial placement does not match the instance")
    f = _myopic_evaluator(inst, seqs)
    x = init.x.copy()
    cur = float(f(x)[0])
    path, values = [x.copy()], [cur]
    if sum(len(q) for q in seqs) > 0:
        for _ in range(max_iter):
            cand = _moves(x)
            if len(cand) == 0:
                break
            vals = f(cand)
            gains = vals - cur
            if strategy == "best":
                k = int(np.argmax(gains))
            else:
                k = int(np.flatnonzero(gains > IMPROVE_TOL)[0]) if np.any(gains > IMPROVE_TOL) else 0
            if gains[k] <= IMPROVE_TOL:
                break
            x, cur = cand[k], float(vals[k])
            path.append(x.copy())
            values.append(cur)
    out = Placement(x)
    if return_trace:
        return out, LocalSearchTrace(tuple(Placement(p) for p in path), tuple(values))
    return out


def is_myopic_local_optimum(inst: NetworkInstance, seqs: Sequence[ArrivalSequence], x: Placement) -> bool:
    f = _myopic_evaluator(inst, list(seqs))
    cand = _moves(x.x)
    if len(cand) == 0:
        return True
    return bool(np.all(f(cand) - f(x.x)[0] <= IMPROVE_TOL))


def greedy_place(
    inst: NetworkInstance,
    scenarios: ScenarioSet,
    Q: int,
    perturbation=None,
    return_trace: bool = False,
):
    """Add one unit at a time at the DC with the largest increase in the
    sample-average hindsight value. ``perturbation`` is added to each DC's
    marginal gain when choosing (not to the reported value); ties go to the
    lowest index.
    """
    bonus = np.zeros(inst.n) if perturbation is None else np.asarray(perturbation, dtype=float)
    x = np.zeros(inst.n, dtype=np.int64)
    cur = 0.0
    trace = []
    for _ in range(Q):
        vals = np.empty(inst.n)
        for i in range(inst.n):
            x[i] += 1
            vals[i] = off_expected(inst, x, scenarios)
            x[i] -= 1
        score = vals - cur + bonus
        i = int(np.argmax(score))
        x[i] += 1
        cur = float(vals[i])
        trace.append(i)
    out = Placement(x)
    if return_trace:
        return out, tuple(trace)
    return out


def place(
    procedure: str,
    inst: NetworkInstance,
    scenarios: ScenarioSet,
    Q: int,
    seed: Optional[int] = None,
    prefer: str = "rdc",
) -> PlacementReport:
    """Run one procedure and report its training objective and timing."""
    t0 = time.perf_counter()
    mean = scenarios.mean_demand()
    inst = inst.with_Q(Q)
    if procedure == "proportional":
        x = proportional_place(mean, Q)
    elif procedure == "fluid":
        x = fluid_place(inst, mean, Q, prefer=prefer)
    elif procedure == "offline":
        x = offline_place(inst, scenarios, Q, rng_stream(seed or 0, 1))
    elif procedure == "myopic":
        # without recorded orders, replay each scenario type by type
        seqs = scenarios.sequences or [ArrivalSequence.from_scenario(s) for s in scenarios.scenarios]
        x = myopic_place(inst, seqs, Q)
    elif procedure == "greedy":
        x = greedy_place(inst, scenarios, Q)
    else:
        raise ValueError(f"unknown procedure {procedure!r}")
    obj = off_expected(inst, x, scenarios)
    return PlacementReport(procedure, x, obj, time.perf_counter() - t0, seed)
