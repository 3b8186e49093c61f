"""Hindsight-optimal fulfillment and the LPs built on it.

``OFF(x, D)`` is the value of the bipartite LP that serves total demand ``D``
from inventory ``x``; the sample-average and fluid placement LPs optimize
``x`` jointly with the per-scenario flows.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import AnyPlacement, DemandScenario, FractionalPlacement, NetworkInstance, as_vector
from .demand import ScenarioSet
from .lp import LpProblem, solve_lp, solve_transportation, transportation_lp

log = logging.getLogger(__name__)

MAX_SAA_SCENARIOS = 200
TIEBREAK_WEIGHT = 1e-9


@dataclass(frozen=True, eq=False)
class OffResult:
    value: float
    flow: np.ndarray
    duals: Optional[np.ndarray] = None  # per-DC duals of the supply rows


@dataclass(frozen=True, eq=False)
class SaaSolution:
    x_hat: FractionalPlacement
    value: float
    flows: np.ndarray  # K x n x m
    duals: np.ndarray  # K x n, duals of the 1/K-weighted supply rows

    def to_json(self) -> str:
        return json.dumps(
            {"x_hat": self.x_hat.x.tolist(), "Q": self.x_hat.Q, "value": self.value, "duals": self.duals.tolist()}
        )


def _demand_vec(D) -> np.ndarray:
    return np.asarray(D.D if isinstance(D, DemandScenario) else D, dtype=float)


def off_value(inst: NetworkInstance, x: AnyPlacement, D, duals: bool = False) -> OffResult:
    """Hindsight value of serving ``D`` from inventory ``x``.

    Integer ``x`` gives an integral optimal flow. With ``duals=True`` the LP is
    solved by simplex so the supply-row duals are available.
    """
    xv = as_vector(x)
    d = _demand_vec(D)
    if len(xv) != inst.n or len(d) != inst.m:
        raise ValueError("placement/demand dimensions do not match the instance")
    if duals:
        p = transportation_lp(inst.rewards, xv, d)
        sol = solve_lp(p)
        flow = sol.x.reshape(inst.n, inst.m)
        return OffResult(float((inst.rewards * flow).sum()), flow, sol.duals[inst.m:])
    value, flow = solve_transportation(inst.rewards, xv, d)
    return OffResult(value, flow)


def star_off_values(inst: NetworkInstance, x: AnyPlacement, Dmat) -> np.ndarray:
    """Closed-form ``OFF(x, D)`` for each row of ``Dmat`` on a star instance.

    FDCs serve their own district first; the RDC then serves district 0 at
    ``1 + eps`` and spends what is left on the unmet FDC demand at ``r``.
    """
    if inst.star is None:
        raise ValueError("instance is not a star network")
    xv = as_vector(x)
    D = np.atleast_2d(np.asarray(Dmat, dtype=float))
    local = np.minimum(xv[1:], D[:, 1:])
    excess = (D[:, 1:] - local).sum(axis=1)
    rdc_local = np.minimum(xv[0], D[:, 0])
    spill = np.minimum(xv[0] - rdc_local, excess)
    return local.sum(axis=1) + inst.rewards[0, 0] * rdc_local + inst.star.r * spill


def off_values(inst: NetworkInstance, x: AnyPlacement, scenarios: ScenarioSet) -> np.ndarray:
    """Per-scenario ``OFF(x, D^k)``; star instances use the closed form."""
    if inst.star is not None:
        return star_off_values(inst, x, scenarios.matrix())
    return np.array([off_value(inst, x, s).value for s in scenarios.scenarios])


def off_expected(inst: NetworkInstance, x: AnyPlacement, scenarios: ScenarioSet) -> float:
    return float(off_values(inst, x, scenarios).mean())


def _edges(inst: NetworkInstance):
    ii, jj = np.nonzero(inst.rewards > 0)
    return ii, jj


def saa_placement(
    inst: NetworkInstance,
    scenarios: ScenarioSet,
    Q: Optional[int] = None,
    method: str = "auto",
) -> SaaSolution:
    """Optimal fractional placement for the sample-average offline LP.

    Variables are ``x`` and one flow per (scenario, positive-reward edge);
    the objective is the mean over scenarios of the hindsight reward.
    """
    Q = inst.Q if Q is None else int(Q)
    if scenarios.K > MAX_SAA_SCENARIOS:
        idx = np.linspace(0, scenarios.K - 1, MAX_SAA_SCENARIOS).round().astype(int)
        log.warning("subsampling %d scenarios down to %d for the SAA LP", scenarios.K, MAX_SAA_SCENARIOS)
        scenarios = scenarios.subset(idx)
    n, m, K = inst.n, inst.m, scenarios.K
    ii, jj = _edges(inst)
    E = len(ii)
    Dm = scenarios.matrix().astype(float)
    nv = n + K * E
    rows_d, rows_s = K * m, K * n
    A = np.zeros((rows_d + rows_s + 1, nv))
    b = np.zeros(rows_d + rows_s + 1)
    c = np.zeros(nv)
    for k in range(K):
        off = n + k * E
        cols = off + np.arange(E)
        c[cols] = inst.rewards[ii, jj] / K
        A[k * m + jj, cols] = 1.0
        b[k * m:(k + 1) * m] = Dm[k]
        A[rows_d + k * n + ii, cols] = 1.0
        A[rows_d + k * n + np.arange(n), np.arange(n)] = -1.0
    A[-1, :n] = 1.0
    b[-1] = Q
    sense = ("<=",) * (rows_d + rows_s) + ("=",)
    sol = solve_lp(LpProblem(c, A, b, sense), method=method)
    if not sol.optimal:
        raise RuntimeError(f"SAA LP ended with status {sol.status}")
    x = sol.x[:n]
    flows = np.zeros((K, n, m))
    for k in range(K):
        flows[k, ii, jj] = sol.x[n + k * E:n + (k + 1) * E]
    duals = sol.duals[rows_d:rows_d + rows_s].reshape(K, n)
    value = float((flows * inst.rewards[None]).sum() / K)
    xp = FractionalPlacement(x * (Q / x.sum()) if x.sum() > 0 else x, Q)
    return SaaSolution(xp, value, flows, duals)


def tiebreak_weights(n: int, prefer: str = "rdc") -> np.ndarray:
    """Secondary-objective penalties per unit placed at each DC.

    ``"rdc"`` penalizes every FDC equally; ``"fdc"`` penalizes the RDC most and
    FDCs by index, so the lowest-index FDC is preferred.
    """
    if prefer == "rdc":
        w = np.ones(n)
        w[0] = 0.0
    elif prefer == "fdc":
        w = np.arange(-1, n - 1, dtype=float)
        w[0] = n
    else:
        raise ValueError(f"unknown tie-break {prefer!r}")
    return w


def fluid_placement_lp(inst: NetworkInstance, mean_demand: Sequence[float], Q: Optional[int] = None,
                       prefer: str = "rdc"):
    """Single-scenario placement LP with the mean demand as (fractional) demand.

    Returns ``(FractionalPlacement, value)``; the value excludes the tie-break term.
    """
    Q = inst.Q if Q is None else int(Q)
    dbar = np.asarray(mean_demand, dtype=float)
    if np.any(dbar < 0):
        raise ValueError("mean demand must be non-negative")
    n, m = inst.n, inst.m
    ii, jj = _edges(inst)
    E = len(ii)
    nv = n + E
    A = np.zeros((m + n + 1, nv))
    c = np.zeros(nv)
    c[:n] = -TIEBREAK_WEIGHT * tiebreak_weights(n, prefer)
    c[n:] = inst.rewards[ii, jj]
    A[jj, n + np.arange(E)] = 1.0
    A[m + ii, n + np.arange(E)] = 1.0
    A[m + np.arange(n), np.arange(n)] = -1.0
    A[-1, :n] = 1.0
    b = np.concatenate([dbar, np.zeros(n), [Q]])
    sol = solve_lp(LpProblem(c, A, b, ("<=",) * (m + n) + ("=",)), method="simplex")
    if not sol.optimal:
        raise RuntimeError(f"fluid LP ended with status {sol.status}")
    x = sol.x[:n]
    value = float(inst.rewards[ii, jj] @ sol.x[n:])
    return FractionalPlacement(x, Q), value


def lipschitz_check(inst: NetworkInstance, D, x: AnyPlacement, x2: AnyPlacement) -> bool:
    """Whether ``|OFF(x,D) - OFF(x2,D)| <= ||x - x2||_1`` (up to 1e-9)."""
    a = off_value(inst, x, D).value
    b = off_value(inst, x2, D).value
    return abs(a - b) <= np.abs(as_vector(x) - as_vector(x2)).sum() + 1e-9
