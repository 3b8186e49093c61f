"""Domain types: networks, placements, demand, and the JD-style star network."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

RDC_BONUS = 1e-7
SUM_TOL = 1e-9
NEG_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``(seed, *keys)``.

    Streams derived from the same experiment seed with different keys are
    independent, so work can be evaluated in any order or in parallel.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class StarNetwork:
    n_fdc: int
    r: float
    epsilon: float = RDC_BONUS

    def __post_init__(self):
        if self.n_fdc < 0:
            raise ValueError("n_fdc must be non-negative")
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"spillover reward must lie in (0, 1), got {self.r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    def to_json(self) -> str:
        return json.dumps({"n_fdc": self.n_fdc, "r": self.r, "epsilon": self.epsilon})

    @classmethod
    def from_json(cls, text: str) -> "StarNetwork":
        d = json.loads(text)
        return cls(int(d["n_fdc"]), float(d["r"]), float(d.get("epsilon", RDC_BONUS)))


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Bipartite DC x demand-type world with ``Q`` units to place.

    ``rewards[i, j]`` is collected when DC ``i`` serves a type-``j`` request.
    ``star`` records the star network the instance was expanded from, if any.
    """

    rewards: np.ndarray
    Q: int
    star: Optional[StarNetwork] = None

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=float)
        if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 1:
            raise ValueError("rewards must be a non-empty n x m matrix")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise ValueError("rewards must be finite and non-negative")
        over = r > 1.0
        if over.any():
            allowed = np.zeros_like(over)
            if self.star is not None:
                allowed[0, 0] = r[0, 0] == 1.0 + self.star.epsilon
            if np.any(over & ~allowed):
                raise ValueError("rewards must lie in [0, 1]")
        if int(self.Q) != self.Q or self.Q < 0:
            raise ValueError("Q must be a non-negative integer")
        object.__setattr__(self, "rewards", _frozen(r))
        object.__setattr__(self, "Q", int(self.Q))

    @property
    def n(self) -> int:
        return self.rewards.shape[0]

    @property
    def m(self) -> int:
        return self.rewards.shape[1]

    def with_Q(self, Q: int) -> "NetworkInstance":
        return NetworkInstance(self.rewards, Q, self.star)

    def to_dict(self) -> dict:
        d = {"n": self.n, "m": self.m, "rewards": self.rewards.tolist(), "Q": self.Q}
        if self.star is not None:
            d["star"] = {"n_fdc": self.star.n_fdc, "r": self.star.r, "epsilon": self.star.epsilon}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkInstance":
        if "rewards" not in d and "n_fdc" in d:
            star = StarNetwork(int(d["n_fdc"]), float(d["r"]), float(d.get("epsilon", RDC_BONUS)))
            return expand_star(star, int(d.get("Q", 0)))
        star = None
        if d.get("star"):
            s = d["star"]
            star = StarNetwork(int(s["n_fdc"]), float(s["r"]), float(s.get("epsilon", RDC_BONUS)))
        inst = cls(np.array(d["rewards"], dtype=float), int(d["Q"]), star)
        if ("n" in d and d["n"] != inst.n) or ("m" in d and d["m"] != inst.m):
            raise ValueError("n/m fields disagree with the reward matrix")
        return inst

    @classmethod
    def from_json(cls, text: str) -> "NetworkInstance":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class DegreeProfile:
    d_j: tuple
    d: int


def degree_profile(inst: NetworkInstance) -> DegreeProfile:
    dj = (inst.rewards > 0).sum(axis=0)
    return DegreeProfile(tuple(int(v) for v in dj), int(dj.max()))


def expand_star(s: StarNetwork, Q: int = 0) -> NetworkInstance:
    """Rewards for the RDC/FDC network: DC 0 serves everyone, FDC ``i`` only district ``i``."""
    k = s.n_fdc + 1
    r = np.zeros((k, k))
    r[0, :] = s.r
    r[0, 0] = 1.0 + s.epsilon
    for i in range(1, k):
        r[i, i] = 1.0
    return NetworkInstance(r, Q, s)


def load_factor(mean_total_demand: float, Q: int) -> float:
    if Q <= 0:
        raise ValueError("load factor needs Q >= 1")
    return float(mean_total_demand) / Q


@dataclass(frozen=True, eq=False)
class Placement:
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x)
        if x.ndim != 1:
            raise ValueError("placement must be a vector")
        if not np.all(np.equal(np.mod(x, 1), 0)) or np.any(x < 0):
            raise ValueError(f"placement must be non-negative integers, got {x}")
        object.__setattr__(self, "x", _frozen(x.astype(np.int64)))

    @classmethod
    def of(cls, x: Iterable[int], Q: int) -> "Placement":
        p = cls(np.asarray(list(x)))
        if p.Q != Q:
            raise ValueError(f"placement sums to {p.Q}, expected {Q}")
        return p

    @property
    def Q(self) -> int:
        return int(self.x.sum())

    @property
    def n(self) -> int:
        return len(self.x)

    def __eq__(self, other):
        return isinstance(other, Placement) and np.array_equal(self.x, other.x)

    def __hash__(self):
        return hash(self.x.tobytes())

    def __repr__(self):
        return f"Placement({self.x.tolist()})"


@dataclass(frozen=True, eq=False)
class FractionalPlacement:
    x: np.ndarray
    Q: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1:
            raise ValueError("placement must be a vector")
        if np.any(x < -NEG_TOL):
            raise ValueError(f"negative inventory {x.min()}")
        x = np.maximum(x, 0.0)
        if abs(x.sum() - self.Q) > SUM_TOL * max(1.0, self.Q):
            raise ValueError(f"fractional placement sums to {x.sum()}, expected {self.Q}")
        object.__setattr__(self, "x", _frozen(x))

    @property
    def n(self) -> int:
        return len(self.x)

    def is_integral(self, tol: float = 1e-6) -> bool:
        return bool(np.all(np.abs(self.x - np.round(self.x)) <= tol))

    def snapped(self, tol: float = 1e-6) -> "FractionalPlacement":
        """Snap near-integral coordinates, keeping the total at Q."""
        x = self.x.copy()
        near = np.abs(x - np.round(x)) <= tol
        x[near] = np.round(x[near])
        rest = ~near
        if rest.any():
            # absorb the rounding drift into the genuinely fractional part
            x[rest] += (self.Q - x.sum()) / rest.sum()
        elif x.sum() != self.Q:
            x[int(np.argmax(x))] += self.Q - x.sum()
        return FractionalPlacement(np.maximum(x, 0.0), self.Q)

    def __repr__(self):
        return f"FractionalPlacement({np.round(self.x, 9).tolist()}, Q={self.Q})"


AnyPlacement = Union[Placement, FractionalPlacement, Sequence[float], np.ndarray]


def as_vector(x: AnyPlacement) -> np.ndarray:
    if isinstance(x, (Placement, FractionalPlacement)):
        return np.asarray(x.x, dtype=float)
    return np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class DemandScenario:
    D: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.D)
        if D.ndim != 1 or np.any(D < 0) or not np.all(np.equal(np.mod(D, 1), 0)):
            raise ValueError(f"demand must be a non-negative integer vector, got {D}")
        object.__setattr__(self, "D", _frozen(D.astype(np.int64)))

    @property
    def m(self) -> int:
        return len(self.D)

    @property
    def total(self) -> int:
        return int(self.D.sum())

    def __eq__(self, other):
        return isinstance(other, DemandScenario) and np.array_equal(self.D, other.D)

    def __hash__(self):
        return hash(self.D.tobytes())

    def __repr__(self):
        return f"DemandScenario({self.D.tolist()})"


@dataclass(frozen=True, eq=False)
class ArrivalSequence:
    """Ordered requests: ``types[t]`` arrives at ``timestamps[t]`` (seconds)."""

    timestamps: np.ndarray
    types: np.ndarray
    m: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float).reshape(-1)
        ty = np.asarray(self.types, dtype=np.int64).reshape(-1)
        if ts.shape != ty.shape:
            raise ValueError("timestamps and types differ in length")
        if np.any(np.diff(ts) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if len(ty) and (ty.min() < 0 or ty.max() >= self.m):
            raise ValueError("request type out of range")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "types", _frozen(ty))

    @property
    def T(self) -> int:
        return len(self.types)

    def __len__(self):
        return self.T

    @classmethod
    def from_types(cls, types: Sequence[int], m: int) -> "ArrivalSequence":
        return cls(np.arange(len(types), dtype=float), np.asarray(types, dtype=np.int64), m)

    @classmethod
    def from_scenario(cls, D: DemandScenario) -> "ArrivalSequence":
        return cls.from_types(np.repeat(np.arange(D.m), D.D), D.m)

    def window(self, start: float) -> "ArrivalSequence":
        """Requests at or after ``start``."""
        keep = self.timestamps >= start
        return ArrivalSequence(self.timestamps[keep], self.types[keep], self.m, self.meta)

    def __repr__(self):
        return f"ArrivalSequence({self.types.tolist()})"


def aggregate(seq: ArrivalSequence) -> DemandScenario:
    return DemandScenario(np.bincount(seq.types, minlength=seq.m))
