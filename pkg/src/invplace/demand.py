"""Stochastic demand models, scenario sets, and arrival-order enumeration."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import ArrivalSequence, DemandScenario, aggregate


class CountExceedsLimit(Exception):
    """The number of distinct arrival orders exceeds the enumeration limit."""

    def __init__(self, count: int, limit: int):
        super().__init__(f"{count} distinct arrival orders exceed the limit {limit}")
        self.count = count
        self.limit = limit


@dataclass(frozen=True, eq=False)
class TemporalModel:
    """At step ``t`` type ``j`` arrives with probability ``p[t, j]``; the slack is no arrival."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2:
            raise ValueError("p must be a T x m matrix")
        if np.any(p < 0) or np.any(p.sum(axis=1) > 1 + 1e-12):
            raise ValueError("each row of p must be a sub-probability vector")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def T(self) -> int:
        return self.p.shape[0]

    @property
    def m(self) -> int:
        return self.p.shape[1]

    def mean_demand(self) -> np.ndarray:
        return self.p.sum(axis=0)


@dataclass(frozen=True, eq=False)
class SpatialModel:
    """Independent per-type total demand with explicit finite pmfs."""

    support: tuple
    probs: tuple

    def __post_init__(self):
        sup, pr = [], []
        if len(self.support) != len(self.probs):
            raise ValueError("support and probs must have one entry per type")
        for s, q in zip(self.support, self.probs):
            s = np.asarray(s, dtype=np.int64)
            q = np.asarray(q, dtype=float)
            if s.shape != q.shape or s.ndim != 1 or len(s) == 0:
                raise ValueError("each pmf needs matching non-empty support and probabilities")
            if np.any(s < 0) or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
                raise ValueError("pmf must be non-negative on non-negative integers and sum to 1")
            s.setflags(write=False)
            q.setflags(write=False)
            sup.append(s)
            pr.append(q)
        object.__setattr__(self, "support", tuple(sup))
        object.__setattr__(self, "probs", tuple(pr))

    @classmethod
    def point_masses(cls, c: Sequence[int]) -> "SpatialModel":
        return cls(tuple([v] for v in c), tuple([1.0] for _ in c))

    @property
    def m(self) -> int:
        return len(self.support)

    def mean_demand(self) -> np.ndarray:
        return np.array([float(s @ q) for s, q in zip(self.support, self.probs)])


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple
    sequences: Optional[tuple] = None
    labels: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        sc = tuple(self.scenarios)
        if len(sc) < 1:
            raise ValueError("a scenario set needs at least one scenario")
        if len({s.m for s in sc}) != 1:
            raise ValueError("scenarios must share the number of demand types")
        object.__setattr__(self, "scenarios", sc)
        if self.sequences is not None:
            seqs = tuple(self.sequences)
            if len(seqs) != len(sc):
                raise ValueError("one sequence per scenario")
            for s, q in zip(sc, seqs):
                if aggregate(q) != s:
                    raise ValueError("paired sequence does not aggregate to its scenario")
            object.__setattr__(self, "sequences", seqs)

    @property
    def K(self) -> int:
        return len(self.scenarios)

    @property
    def m(self) -> int:
        return self.scenarios[0].m

    def matrix(self) -> np.ndarray:
        """K x m demand counts."""
        return np.stack([s.D for s in self.scenarios])

    def mean_demand(self) -> np.ndarray:
        return self.matrix().mean(axis=0)

    def subset(self, idx) -> "ScenarioSet":
        idx = list(idx)
        seqs = tuple(self.sequences[i] for i in idx) if self.sequences is not None else None
        labels = tuple(self.labels[i] for i in idx) if self.labels is not None else None
        return ScenarioSet(tuple(self.scenarios[i] for i in idx), seqs, labels)

    def truncated(self, start: float) -> "ScenarioSet":
        """Scenarios re-aggregated from the part of each sequence at or after ``start``."""
        if self.sequences is None:
            raise ValueError("truncation needs paired sequences")
        seqs = tuple(q.window(start) for q in self.sequences)
        return ScenarioSet(tuple(aggregate(q) for q in seqs), seqs, self.labels)

    @classmethod
    def from_matrix(cls, D) -> "ScenarioSet":
        return cls(tuple(DemandScenario(row) for row in np.asarray(D)))


def sample_temporal(model: TemporalModel, rng: np.random.Generator) -> ArrivalSequence:
    u = rng.random(model.T)
    cum = np.cumsum(model.p, axis=1)
    # index m means "no arrival"
    j = (u[:, None] >= cum).sum(axis=1)
    keep = j < model.m
    t = np.flatnonzero(keep).astype(float)
    return ArrivalSequence(t, j[keep], model.m)


def sample_spatial(model: SpatialModel, rng: np.random.Generator) -> DemandScenario:
    D = [int(rng.choice(s, p=q)) if len(s) > 1 else int(s[0]) for s, q in zip(model.support, model.probs)]
    return DemandScenario(np.array(D, dtype=np.int64))


def sample_scenarios(model, K: int, rng: np.random.Generator) -> ScenarioSet:
    """``K`` IID draws; temporal draws keep their sequences."""
    if isinstance(model, TemporalModel):
        seqs = [sample_temporal(model, rng) for _ in range(K)]
        return ScenarioSet(tuple(aggregate(q) for q in seqs), tuple(seqs))
    cols = []
    for s, q in zip(model.support, model.probs):
        cols.append(rng.choice(s, size=K, p=q) if len(s) > 1 else np.full(K, s[0]))
    return ScenarioSet.from_matrix(np.stack(cols, axis=1))


def multinomial_count(D: Sequence[int]) -> int:
    D = [int(v) for v in D]
    out = math.factorial(sum(D))
    for v in D:
        out //= math.factorial(v)
    return out


def enumerate_orders(D: DemandScenario, limit: int = 100_000) -> List[ArrivalSequence]:
    """Every distinct arrival order of the multiset of requests in ``D``."""
    count = multinomial_count(D.D)
    if count > limit:
        raise CountExceedsLimit(count, limit)
    out: List[ArrivalSequence] = []
    counts = [int(v) for v in D.D]
    T = sum(counts)
    buf = [0] * T

    def rec(pos):
        if pos == T:
            out.append(ArrivalSequence.from_types(list(buf), D.m))
            return
        for j, c in enumerate(counts):
            if c:
                counts[j] -= 1
                buf[pos] = j
                rec(pos + 1)
                counts[j] += 1

    rec(0)
    return out


def empirical_scenarios(sequences: Sequence[ArrivalSequence], labels=None) -> ScenarioSet:
    seqs = tuple(sequences)
    if not seqs:
        raise ValueError("need at least one sequence")
    return ScenarioSet(tuple(aggregate(q) for q in seqs), seqs, tuple(labels) if labels is not None else None)


# ---------------------------------------------------------------- CSV


def scenarios_to_csv(S: ScenarioSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario_id", "type_id", "count"])
    for k, s in enumerate(S.scenarios):
        for j, c in enumerate(s.D):
            w.writerow([k, j, int(c)])
    return buf.getvalue()


def sequences_to_csv(S: ScenarioSet) -> str:
    if S.sequences is None:
        raise ValueError("scenario set has no sequences")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario_id", "timestamp", "type_id"])
    for k, q in enumerate(S.sequences):
        for t, j in zip(q.timestamps, q.types):
            w.writerow([k, repr(float(t)), int(j)])
    return buf.getvalue()


def scenarios_from_csv(text: str, m: Optional[int] = None, sequences_text: Optional[str] = None) -> ScenarioSet:
    rows = list(csv.DictReader(io.StringIO(text)))
    counts: dict = {}
    max_j = -1
    for row in rows:
        k, j, c = int(row["scenario_id"]), int(row["type_id"]), int(row["count"])
        counts.setdefault(k, Counter())[j] += c
        max_j = max(max_j, j)
    m = m if m is not None else max_j + 1
    ids = sorted(counts)
    scen = []
    for k in ids:
        D = np.zeros(m, dtype=np.int64)
        for j, c in counts[k].items():
            D[j] = c
        scen.append(DemandScenario(D))
    seqs = None
    if sequences_text is not None:
        per: dict = {k: ([], []) for k in ids}
        for row in csv.DictReader(io.StringIO(sequences_text)):
            ts, ty = per.setdefault(int(row["scenario_id"]), ([], []))
            ts.append(float(row["timestamp"]))
            ty.append(int(row["type_id"]))
        seqs = tuple(ArrivalSequence(np.array(per[k][0]), np.array(per[k][1], dtype=np.int64), m) for k in ids)
    return ScenarioSet(tuple(scen), seqs)
