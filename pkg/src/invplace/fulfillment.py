"""Online fulfillment policies.

A policy sees the current inventory and the arriving request type and either
names a DC or rejects. Shadow-price policies value a unit of RDC inventory at
a dual price ``lam`` and spill a request to the RDC only when ``r > lam``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ArrivalSequence, NetworkInstance, aggregate, as_vector
from .demand import ScenarioSet
from .lp import LpProblem, solve_lp
from .offline import off_value

REJECT = -1
SECONDS_PER_DAY = 86400.0
KINDS = ("myopic", "fluid-sp", "stoch-sp", "oracle")


@dataclass
class FulfillmentState:
    inventory: np.ndarray
    time: float = 0.0
    day: int = 0
    served: Optional[np.ndarray] = None
    arrived: Optional[np.ndarray] = None

    @classmethod
    def start(cls, x, m: int) -> "FulfillmentState":
        inv = np.asarray(as_vector(x), dtype=np.int64).copy()
        return cls(inv, 0.0, 0, np.zeros(m, dtype=np.int64), np.zeros(m, dtype=np.int64))

    def check(self):
        if np.any(self.inventory < 0):
            raise AssertionError("inventory went negative")
        if np.any(self.served > self.arrived):
            raise AssertionError("served more requests than arrived")


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    resolve: str = "static"
    day_length: float = SECONDS_PER_DAY
    aggregate: str = "weighted-sum"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.resolve not in ("static", "daily"):
            raise ValueError(f"unknown resolve mode {self.resolve!r}")
        if self.aggregate not in ("weighted-sum", "unweighted-sum"):
            raise ValueError(f"unknown dual aggregation {self.aggregate!r}")

    @property
    def admissible(self) -> bool:
        """The oracle peeks at the whole sequence, so it is evaluation-only."""
        return self.kind != "oracle"

    @property
    def label(self) -> str:
        if self.kind == "myopic":
            return "myopic"
        if self.kind == "oracle":
            return "offline"
        head = "F-SP" if self.kind == "fluid-sp" else "S-SP"
        return f"{head}-{'r' if self.resolve == 'daily' else 's'}"

    @classmethod
    def from_dict(cls, d: dict) -> "PolicySpec":
        return cls(
            d["kind"],
            d.get("resolve", "static"),
            float(d.get("day_length", SECONDS_PER_DAY)),
            d.get("aggregate", "weighted-sum"),
        )

    @classmethod
    def from_json(cls, text: str) -> "PolicySpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_label(cls, label: str) -> "PolicySpec":
        table = {
            "myopic": cls("myopic"),
            "offline": cls("oracle"),
            "F-SP-s": cls("fluid-sp", "static"),
            "F-SP-r": cls("fluid-sp", "daily"),
            "S-SP-s": cls("stoch-sp", "static"),
            "S-SP-r": cls("stoch-sp", "daily"),
        }
        if label not in table:
            raise ValueError(f"unknown policy label {label!r}")
        return table[label]

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "resolve": self.resolve})


# ---------------------------------------------------------------- decisions


def myopic_decide(inst: NetworkInstance, state: FulfillmentState, j: int) -> int:
    """Highest immediate reward among stocked DCs serving ``j``; lowest index on ties."""
    col = inst.rewards[:, j]
    best, best_r = REJECT, 0.0
    for i in range(inst.n):
        if state.inventory[i] > 0 and col[i] > best_r:
            best, best_r = i, col[i]
    return best


def sp_decide(inst: NetworkInstance, state: FulfillmentState, j: int, lam) -> int:
    """Bid-price decision.

    On a star network local demand is always served when stocked and a
    spillover to the RDC happens iff ``r > lam``. On a general network ``lam``
    holds one price per DC and the DC maximizing ``r_ij - lam_i`` is used when
    that margin is positive.
    """
    if inst.star is not None:
        inv = state.inventory
        if j == 0:
            return 0 if inv[0] > 0 else REJECT
        if inv[j] > 0:
            return j
        if inv[0] > 0 and inst.star.r > float(lam):
            return 0
        return REJECT
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (inst.n,))
    best, best_m = REJECT, 0.0
    for i in range(inst.n):
        r = inst.rewards[i, j]
        if state.inventory[i] > 0 and r > 0 and r - lam[i] > best_m:
            best, best_m = i, r - lam[i]
    return best


# ---------------------------------------------------------------- shadow prices


def star_lambda(inst: NetworkInstance, x, Dmat) -> np.ndarray:
    """Per-scenario RDC dual of the hindsight LP with ``x`` fixed.

    This is the smallest optimal dual, i.e. the value of one extra RDC unit:
    ``1+eps`` while district-0 demand exceeds the RDC stock, ``r`` while
    unmet FDC demand remains, else 0. ``Dmat`` may be fractional.
    """
    if inst.star is None:
        raise ValueError("closed-form prices need a star network")
    xv = as_vector(x)
    D = np.atleast_2d(np.asarray(Dmat, dtype=float))
    spill = np.maximum(D[:, 1:] - xv[1:], 0.0).sum(axis=1)
    x0 = xv[0]
    return np.where(x0 < D[:, 0], inst.rewards[0, 0], np.where(x0 < D[:, 0] + spill, inst.star.r, 0.0))


def canonical_duals(inst: NetworkInstance, x, D, weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Supply-row duals of ``OFF(x, D)`` via the dual LP.

    Among all optimal duals the one minimizing ``weights . lam`` is returned
    (default: the sum), which makes degenerate cases deterministic.
    """
    xv = as_vector(x)
    d = np.asarray(getattr(D, "D", D), dtype=float)
    n, m = inst.n, inst.m
    ii, jj = np.nonzero(inst.rewards > 0)
    E = len(ii)
    # variables: mu (m) then lam (n); constraints -mu_j - lam_i <= -r_ij
    A = np.zeros((E, m + n))
    A[np.arange(E), jj] = -1.0
    A[np.arange(E), m + ii] = -1.0
    b = -inst.rewards[ii, jj]
    cost = np.concatenate([d, xv])
    first = solve_lp(LpProblem(-cost, A, b, ("<=",) * E), method="simplex")
    if not first.optimal:
        raise RuntimeError(f"dual LP ended with status {first.status}")
    best = -first.objective
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    A2 = np.vstack([A, cost[None]])
    b2 = np.concatenate([b, [best + 1e-10 * (1.0 + abs(best))]])
    c2 = -np.concatenate([np.zeros(m), w])
    second = solve_lp(LpProblem(c2, A2, b2, ("<=",) * (E + 1)), method="simplex")
    if not second.optimal:
        raise RuntimeError(f"dual face LP ended with status {second.status}")
    return np.maximum(second.x[m:], 0.0)


def compute_lambda_fluid(inst: NetworkInstance, mean_demand, x):
    """RDC price (star) or per-DC prices (general) from the mean-demand LP with ``x`` fixed."""
    if inst.star is not None:
        return float(star_lambda(inst, x, mean_demand)[0])
    w = np.ones(inst.n)
    return canonical_duals(inst, x, np.asarray(mean_demand, dtype=float), w)


def compute_lambda_stoch(inst: NetworkInstance, scenarios, x, aggregate: str = "weighted-sum"):
    """Sum of the scenario duals of the ``1/K``-weighted sample LP with ``x`` fixed.

    With ``x`` fixed the LP separates by scenario, so this is the mean of the
    per-scenario prices. ``aggregate="unweighted-sum"`` drops the ``1/K``
    weighting, which is only meant for sensitivity checks.
    """
    Dm = scenarios.matrix() if isinstance(scenarios, ScenarioSet) else np.atleast_2d(scenarios)
    K = len(Dm)
    scale = 1.0 if aggregate == "weighted-sum" else float(K)
    if inst.star is not None:
        return float(star_lambda(inst, x, Dm).mean() * scale)
    lam = np.mean([canonical_duals(inst, x, D) for D in Dm], axis=0)
    return lam * scale


# ---------------------------------------------------------------- policies


class Policy:
    """Base class: ``start`` once per sequence, then ``decide`` per request."""

    spec: PolicySpec

    def start(self, inst: NetworkInstance, x, seq: ArrivalSequence, state: FulfillmentState):
        self.inst = inst

    def decide(self, state: FulfillmentState, j: int) -> int:
        raise NotImplementedError

    def on_day(self, state: FulfillmentState, day: int):
        pass


class MyopicPolicy(Policy):
    spec = PolicySpec("myopic")

    def decide(self, state, j):
        return myopic_decide(self.inst, state, j)


class ShadowPricePolicy(Policy):
    """Fluid or stochastic shadow-price policy, static or re-solved daily."""

    def __init__(self, spec: PolicySpec, training: ScenarioSet, lam_override=None):
        if spec.kind not in ("fluid-sp", "stoch-sp"):
            raise ValueError("shadow-price policy needs a fluid-sp or stoch-sp spec")
        if spec.resolve == "daily" and training.sequences is None:
            raise ValueError("daily re-solving needs training sequences")
        self.spec = spec
        self.training = training
        self.lam_override = lam_override
        self.lam = None
        self.trace: list = []  # (day, lam) after every (re)solve
        self._window_cache: dict = {}

    def _demand(self, day: int) -> np.ndarray:
        if day not in self._window_cache:
            if day == 0:
                Dm = self.training.matrix().astype(float)
            else:
                Dm = self.training.truncated(day * self.spec.day_length).matrix().astype(float)
            self._window_cache[day] = Dm
        return self._window_cache[day]

    def _solve(self, x, day: int):
        if self.lam_override is not None:
            return self.lam_override
        Dm = self._demand(day)
        if self.spec.kind == "fluid-sp":
            return compute_lambda_fluid(self.inst, Dm.mean(axis=0), x)
        return compute_lambda_stoch(self.inst, Dm, x, self.spec.aggregate)

    def start(self, inst, x, seq, state):
        self.inst = inst
        self.lam = self._solve(state.inventory, 0)
        self.trace = [(0, self.lam)]

    def on_day(self, state, day):
        if self.spec.resolve == "daily":
            self.lam = self._solve(state.inventory, day)
            self.trace.append((day, self.lam))

    def decide(self, state, j):
        return sp_decide(self.inst, state, j, self.lam)


class OraclePolicy(Policy):
    """Follows an optimal hindsight flow for the whole sequence (not admissible)."""

    spec = PolicySpec("oracle")

    def start(self, inst, x, seq, state):
        self.inst = inst
        res = off_value(inst, state.inventory, aggregate(seq))
        self.flow = np.rint(res.flow).astype(np.int64)
        # serve from the best-paying DC first so local demand stays local
        self.order = [np.lexsort((np.arange(inst.n), -inst.rewards[:, j])) for j in range(inst.m)]

    def decide(self, state, j):
        for i in self.order[j]:
            if self.flow[i, j] > 0 and state.inventory[i] > 0:
                self.flow[i, j] -= 1
                return int(i)
        return REJECT


def make_policy(spec: PolicySpec, training: Optional[ScenarioSet] = None) -> Policy:
    if spec.kind == "myopic":
        return MyopicPolicy()
    if spec.kind == "oracle":
        return OraclePolicy()
    if training is None:
        raise ValueError(f"{spec.kind} needs training scenarios")
    return ShadowPricePolicy(spec, training)


def oracle_reward(inst: NetworkInstance, x, seq: ArrivalSequence) -> float:
    """Hindsight value of the sequence; independent of arrival order."""
    D = aggregate(seq)
    if inst.star is not None:
        from .offline import star_off_values

        return float(star_off_values(inst, x, D.D[None])[0])
    return off_value(inst, x, D).value


# ---------------------------------------------------------------- fast star myopic


@dataclass(frozen=True, eq=False)
class PackedSequences:
    """Sequences flattened for vectorized myopic evaluation on star networks."""

    types: np.ndarray
    rank: np.ndarray  # position of each request among earlier ones of its type
    seg: np.ndarray  # sequence index of each request
    counts: np.ndarray  # K x m
    starts: np.ndarray
    K: int

    @classmethod
    def of(cls, seqs: Sequence[ArrivalSequence], m: int) -> "PackedSequences":
        types, rank, seg, counts, starts = [], [], [], [], []
        pos = 0
        for k, q in enumerate(seqs):
            t = q.types
            rk = np.zeros(len(t), dtype=np.int64)
            for j in range(m):
                idx = np.flatnonzero(t == j)
                rk[idx] = np.arange(len(idx))
            types.append(t)
            rank.append(rk)
            seg.append(np.full(len(t), k))
            counts.append(np.bincount(t, minlength=m))
            starts.append(pos)
            pos += len(t)
        cat = lambda a: np.concatenate(a) if a else np.zeros(0, dtype=np.int64)  # noqa: E731
        return cls(cat(types), cat(rank), cat(seg), np.array(counts).reshape(len(seqs), m), np.array(starts), len(seqs))


def star_myopic_rewards(inst: NetworkInstance, X, packed: PackedSequences) -> np.ndarray:
    """Mean myopic reward over the packed sequences for each row of ``X``.

    FDC ``i`` serves the first ``x_i`` requests of its district; every other
    request (and all of district 0) falls to the RDC, which serves the first
    ``x_0`` of them in arrival order.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.int64))
    local = np.minimum(X[:, None, 1:], packed.counts[None, :, 1:]).sum(axis=(1, 2))
    if len(packed.types) == 0:
        return local / max(packed.K, 1)
    t = packed.types
    elig = (t[None, :] == 0) | (packed.rank[None, :] >= X[:, t])
    cs = np.cumsum(elig, axis=1)
    before = np.where(packed.starts > 0, cs[:, np.maximum(packed.starts - 1, 0)], 0)
    within = cs - before[:, packed.seg]
    took = elig & (within <= X[:, [0]])
    w = np.where(t == 0, inst.rewards[0, 0], inst.star.r)
    return (local + took.astype(float) @ w) / packed.K
