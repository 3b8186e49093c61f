"""Policy simulation, adversarial orders, competitive ratios and the experiment grid."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import (
    ArrivalSequence,
    DemandScenario,
    NetworkInstance,
    Placement,
    StarNetwork,
    aggregate,
    expand_star,
    rng_stream,
)
from .demand import (
    CountExceedsLimit,
    ScenarioSet,
    SpatialModel,
    enumerate_orders,
    sample_scenarios,
)
from .fulfillment import (
    REJECT,
    FulfillmentState,
    Policy,
    PolicySpec,
    make_policy,
    oracle_reward,
)
from .offline import off_values, saa_placement

log = logging.getLogger(__name__)

DOMINANCE_TOL = 1e-9
RATIO_TOL = 1e-6
R_VALUES = (0.1, 0.5, 0.9)
LOAD_FACTORS = (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5)
PLACEMENTS = ("offline", "myopic", "proportional", "fluid")
POLICIES = ("myopic", "F-SP-s", "F-SP-r", "S-SP-s", "S-SP-r", "offline")


class InvariantViolation(AssertionError):
    pass


@dataclass
class DominanceLedger:
    """Every simulation compares its reward with the hindsight optimum."""

    checks: int = 0
    violations: int = 0
    worst_excess: float = 0.0

    def record(self, reward: float, bound: float):
        self.checks += 1
        excess = reward - bound
        if excess > DOMINANCE_TOL:
            self.violations += 1
            self.worst_excess = max(self.worst_excess, excess)

    def reset(self):
        self.checks = self.violations = 0
        self.worst_excess = 0.0


DOMINANCE = DominanceLedger()


@dataclass(frozen=True, eq=False)
class SimulationOutcome:
    reward: float
    decisions: np.ndarray  # DC index per request, -1 for rejected
    leftover: np.ndarray
    oracle: float
    type1_errors: Optional[int] = None
    type2_errors: Optional[int] = None
    spills_accepted: Optional[int] = None
    spills_rejected: Optional[int] = None


def simulate(
    inst: NetworkInstance,
    x: Placement,
    policy: Policy,
    J: ArrivalSequence,
    strict: bool = False,
) -> SimulationOutcome:
    """Feed ``J`` to ``policy`` one request at a time and collect rewards."""
    state = FulfillmentState.start(x, inst.m)
    policy.start(inst, x, J, state)
    day_len = getattr(getattr(policy, "spec", None), "day_length", 86400.0)
    inv = state.inventory
    R = inst.rewards
    star = inst.star is not None
    decisions = np.full(J.T, REJECT, dtype=np.int64)
    reward = 0.0
    acc = rej = 0
    for t in range(J.T):
        j = int(J.types[t])
        ts = float(J.timestamps[t])
        day = int(ts // day_len)
        if day > state.day:
            state.day = day
            state.time = ts
            policy.on_day(state, day)
        state.time = ts
        state.arrived[j] += 1
        i = policy.decide(state, j)
        if star and j > 0 and inv[j] == 0 and inv[0] > 0:
            if i == 0:
                acc += 1
            else:
                rej += 1
        if i != REJECT:
            if inv[i] <= 0 or R[i, j] <= 0:
                raise InvariantViolation(f"policy chose DC {i} for type {j} without stock or edge")
            inv[i] -= 1
            state.served[j] += 1
            reward += R[i, j]
            decisions[t] = i
    state.check()
    bound = oracle_reward(inst, x, J)
    DOMINANCE.record(reward, bound)
    if strict and reward > bound + DOMINANCE_TOL:
        raise InvariantViolation(f"online reward {reward} exceeds hindsight {bound}")
    t1 = t2 = None
    if star:
        served0 = int(np.sum((decisions >= 0) & (J.types == 0)))
        lost0 = int(np.sum(J.types == 0)) - served0
        t2 = min(acc, lost0)
        t1 = min(rej, int(inv[0]))
    return SimulationOutcome(float(reward), decisions, inv.copy(), bound, t1, t2, acc, rej)


def hindsight_errors(inst: NetworkInstance, x: Placement, J: ArrivalSequence, outcome: SimulationOutcome):
    """Type-1/type-2 counts recomputed from the hindsight solution alone.

    Valid for policies that always serve locally when they can.
    """
    D = aggregate(J).D
    xv = x.x
    x0 = int(xv[0])
    served0 = int(np.sum((outcome.decisions >= 0) & (J.types == 0)))
    local0 = min(x0, int(D[0]))
    type2 = local0 - served0
    spill_room = int(np.maximum(D[1:] - xv[1:], 0).sum())
    hindsight_spills = min(spill_room, x0 - local0)
    type1 = max(hindsight_spills - outcome.spills_accepted, 0)
    return type1, type2


# ---------------------------------------------------------------- adversary


@dataclass(frozen=True)
class AdversarialResult:
    value: float
    exact: bool
    orders_checked: int
    worst_order: tuple


def adversarial_value(
    inst: NetworkInstance,
    x: Placement,
    policy_factory,
    D: DemandScenario,
    limit: int = 100_000,
    rng: Optional[np.random.Generator] = None,
    samples: int = 1000,
) -> AdversarialResult:
    """Worst reward of a deterministic policy over arrival orders of ``D``.

    Exhaustive when the number of distinct orders is within ``limit``;
    otherwise the minimum over random orders plus a bait-first order, which
    only upper-bounds the adversarial value.
    """
    try:
        orders = enumerate_orders(D, limit)
        exact = True
    except CountExceedsLimit:
        exact = False
        rng = rng if rng is not None else rng_stream(0, 7)
        base = np.repeat(np.arange(D.m), D.D)
        orders = [ArrivalSequence.from_types(rng.permutation(base), D.m) for _ in range(samples)]
        # spillable types first, largest surplus over local stock first, local RDC demand last
        surplus = D.D - (x.x if len(x.x) == D.m else np.zeros(D.m))
        rank = sorted(range(D.m), key=lambda j: (j == 0, -surplus[j], j))
        orders.append(ArrivalSequence.from_types(np.repeat(rank, D.D[rank]), D.m))
    best, worst = np.inf, ()
    for q in orders:
        v = simulate(inst, x, policy_factory(), q).reward
        if v < best:
            best, worst = v, tuple(q.types.tolist())
    if not orders:
        best = 0.0
    return AdversarialResult(float(best), exact, len(orders), worst)


def omniscient_value(inst: NetworkInstance, test: ScenarioSet, Q: Optional[int] = None) -> float:
    """Fractional placement and hindsight fulfillment, both tuned on the test set."""
    return saa_placement(inst, test, Q).value


def competitive_ratio(mean_reward: float, omniscient: float) -> float:
    if omniscient <= 0:
        log.warning("omniscient value is zero; ratio defined as 1")
        return 1.0
    return float(mean_reward) / float(omniscient)


# ---------------------------------------------------------------- grid


def q_for_load_factor(mean_weekly: float, lf: float) -> int:
    """Inventory closest to the target load factor (half-way ties to even), at least one unit."""
    return max(1, int(round(mean_weekly / lf)))


@dataclass(frozen=True, eq=False)
class GridResult:
    rows: tuple  # (region, r, load_factor, placement, policy, ratio)
    csv_text: str
    manifest: dict
    errors: tuple = ()

    def table(self, weighting: str = "cells") -> Dict[tuple, float]:
        """Mean ratio per (r, placement, policy) over regions and load factors."""
        acc: Dict[tuple, list] = {}
        weights = self.manifest.get("region_weights", {})
        for reg, r, lf, pl, po, ratio in self.rows:
            w = 1.0 if weighting == "cells" else float(weights.get(str(reg), 1.0))
            acc.setdefault((r, pl, po), []).append((ratio, w))
        return {k: sum(a * w for a, w in v) / sum(w for _, w in v) for k, v in acc.items()}

    def curves(self) -> Dict[tuple, float]:
        """Mean ratio per (r, load_factor, placement, policy) over regions."""
        acc: Dict[tuple, list] = {}
        for reg, r, lf, pl, po, ratio in self.rows:
            acc.setdefault((r, lf, pl, po), []).append(ratio)
        return {k: float(np.mean(v)) for k, v in acc.items()}

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.csv_text.encode()).hexdigest()


def _fmt(v: float) -> str:
    return f"{v:.10f}"


def evaluate_cell(
    region,
    n_fdc: int,
    train: ScenarioSet,
    test: ScenarioSet,
    r: float,
    Q: int,
    placements: Sequence[str],
    policies: Sequence[str],
    seed: int,
    cell_key: Sequence[int],
) -> List[tuple]:
    """Ratios for every placement x policy pair of one (region, r, Q) cell."""
    from .placement import fluid_place, myopic_place, offline_place, proportional_place

    inst = expand_star(StarNetwork(n_fdc, r), Q)
    omni = omniscient_value(inst, test, Q)
    mean = train.mean_demand()
    out = []
    for p_idx, pl in enumerate(placements):
        if pl == "offline":
            x = offline_place(inst, train, Q, rng_stream(seed, *cell_key, p_idx))
        elif pl == "myopic":
            x = myopic_place(inst, train.sequences, Q)
        elif pl == "proportional":
            x = proportional_place(mean, Q)
        elif pl == "fluid":
            x = fluid_place(inst, mean, Q)
        else:
            raise ValueError(f"unknown placement {pl!r}")
        for po in policies:
            spec = PolicySpec.from_label(po)
            policy = make_policy(spec, train)
            rewards = [simulate(inst, x, policy, q).reward for q in test.sequences]
            out.append((pl, po, competitive_ratio(float(np.mean(rewards)), omni), x))
    return out


def run_grid(
    dataset,
    r_values: Sequence[float] = R_VALUES,
    load_factors: Sequence[float] = LOAD_FACTORS,
    placements: Sequence[str] = PLACEMENTS,
    policies: Sequence[str] = POLICIES,
    seed: int = 0,
) -> GridResult:
    """Evaluate every (region, r, load factor, placement, policy) combination.

    ``dataset`` is a list of region records with ``region_id``, ``n_fdc``,
    ``train``, ``test`` and ``mean_weekly_demand``. A failing cell is logged
    and skipped; the rest of the grid still runs.
    """
    t0 = time.perf_counter()
    start_checks, start_viol = DOMINANCE.checks, DOMINANCE.violations
    rows, errors, cells = [], [], []
    for g, reg in enumerate(dataset):
        mw = reg.mean_weekly_demand
        for a, r in enumerate(r_values):
            for b, lf in enumerate(load_factors):
                Q = q_for_load_factor(mw, lf)
                cells.append({"region": reg.region_id, "r": r, "load_factor": lf, "Q": Q})
                try:
                    res = evaluate_cell(reg.region_id, reg.n_fdc, reg.train, reg.test, r, Q,
                                        placements, policies, seed, (g, a, b))
                except Exception as e:  # keep going; the cell is reported as failed
                    log.error("cell region=%s r=%s lf=%s failed: %s", reg.region_id, r, lf, e)
                    errors.append(f"region={reg.region_id} r={r} lf={lf}: {e!r}")
                    continue
                for pl, po, ratio, _ in res:
                    rows.append((reg.region_id, r, lf, pl, po, ratio))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region", "r", "load_factor", "placement", "policy", "ratio"])
    for reg, r, lf, pl, po, ratio in rows:
        w.writerow([reg, f"{r:g}", f"{lf:g}", pl, po, _fmt(ratio)])
    text = buf.getvalue()
    over = [row for row in rows if row[5] > 1 + RATIO_TOL]
    manifest = {
        "seed": seed,
        "r_values": list(r_values),
        "load_factors": list(load_factors),
        "placements": list(placements),
        "policies": list(policies),
        "cells": cells,
        "region_weights": {str(reg.region_id): reg.mean_weekly_demand for reg in dataset},
        "tolerances": {"dominance": DOMINANCE_TOL, "ratio": RATIO_TOL},
        "versions": _versions(),
        "dominance_checks": DOMINANCE.checks - start_checks,
        "dominance_violations": DOMINANCE.violations - start_viol,
        "ratio_violations": len(over),
        "failed_cells": errors,
        "csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
    }
    log.info("grid finished in %.1fs", time.perf_counter() - t0)
    return GridResult(tuple(rows), text, manifest, tuple(errors))


def manifest_json(result: GridResult) -> str:
    return json.dumps(result.manifest, indent=2, sort_keys=True)


def _versions() -> dict:
    import platform

    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "invplace": __version__}


def oracle_dominates(result: GridResult, tol: float = RATIO_TOL) -> List[tuple]:
    """Cells where some online policy beats the hindsight-fulfillment column."""
    by: Dict[tuple, Dict[str, float]] = {}
    for reg, r, lf, pl, po, ratio in result.rows:
        by.setdefault((reg, r, lf, pl), {})[po] = ratio
    bad = []
    for k, v in by.items():
        if "offline" in v:
            for po, ratio in v.items():
                if ratio > v["offline"] + tol:
                    bad.append((*k, po))
    return bad


# ---------------------------------------------------------------- gap study


@dataclass(frozen=True)
class GapStudy:
    K_values: tuple
    mean_gap: tuple
    stderr: tuple
    exponent: float
    abs_gap: tuple


def gap_decay_study(
    inst: NetworkInstance,
    model,
    K_values: Sequence[int],
    holdout_size: int = 5000,
    seed: int = 0,
    resamples: int = 20,
) -> GapStudy:
    """In-sample minus holdout value of the sample-average placement, per ``K``.

    The exponent is the slope of ``log(mean gap)`` against ``log K``.
    """
    Ks = list(K_values)
    if Ks != sorted(Ks):
        raise ValueError("K_values must be ascending")
    holdout = sample_scenarios(model, holdout_size, rng_stream(seed, 0))
    means, ses, absg = [], [], []
    for a, K in enumerate(Ks):
        gaps = []
        for s in range(resamples):
            train = sample_scenarios(model, K, rng_stream(seed, 1, a, s))
            sol = saa_placement(inst, train)
            g_train = off_values(inst, sol.x_hat, train).mean()
            g_hold = off_values(inst, sol.x_hat, holdout).mean()
            gaps.append(g_train - g_hold)
        gaps = np.array(gaps)
        means.append(float(gaps.mean()))
        ses.append(float(gaps.std(ddof=1) / np.sqrt(len(gaps))) if len(gaps) > 1 else 0.0)
        absg.append(float(np.abs(gaps).mean()))
    pos = np.array(means) > 0
    if pos.sum() >= 2:
        slope = float(np.polyfit(np.log(np.array(Ks)[pos]), np.log(np.array(means)[pos]), 1)[0])
    else:
        slope = float("nan")
    return GapStudy(tuple(Ks), tuple(means), tuple(ses), slope, tuple(absg))


def random_star_model(n_fdc: int, mean_total: float, rng: np.random.Generator, spread: int = 3) -> SpatialModel:
    """Independent per-district demand, uniform on a window around a random mean."""
    w = rng.dirichlet(np.ones(n_fdc + 1))
    support, probs = [], []
    for mu in w * mean_total:
        lo = max(0, int(round(mu)) - spread)
        s = np.arange(lo, int(round(mu)) + spread + 1)
        support.append(s)
        probs.append(np.full(len(s), 1.0 / len(s)))
    return SpatialModel(tuple(support), tuple(probs))
