"""Dependent randomized rounding and the two-iteration assignment.

The rounding primitive is the star-graph case of pipage-style dependent
rounding: pairs of fractional weights exchange mass until one of them is
integral. It keeps marginals, keeps the sum within its floor/ceiling, and is
negatively correlated. Everything here is vectorized over independent trials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    AnyPlacement,
    DemandScenario,
    FractionalPlacement,
    NetworkInstance,
    Placement,
    as_vector,
    degree_profile,
)
from .demand import ScenarioSet
from .offline import OffResult, off_value, off_values

_INT_TOL = 1e-12
SNAP_TOL = 1e-6


def _integral(v: np.ndarray) -> np.ndarray:
    return (v <= _INT_TOL) | (v >= 1.0 - _INT_TOL)


def dependent_round(w, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Round weights in [0, 1] to bits.

    Returns a 0/1 vector, or a ``size x len(w)`` matrix of independent trials.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("weights must be a vector")
    if np.any(w < -_INT_TOL) or np.any(w > 1 + _INT_TOL):
        raise ValueError("weights must lie in [0, 1]")
    w = np.clip(w, 0.0, 1.0)
    B = 1 if size is None else int(size)
    n = len(w)
    W = np.zeros((B, n), dtype=np.int8)
    carry = np.full(B, -1, dtype=np.int64)
    cval = np.zeros(B)
    rows = np.arange(B)
    for i in range(n):
        b = w[i]
        if b <= _INT_TOL or b >= 1 - _INT_TOL:
            W[:, i] = int(round(b))
            continue
        has = carry >= 0
        # trials without a fractional partner just adopt i as the carry
        carry = np.where(has, carry, i)
        cval = np.where(has, cval, b)
        if not has.any():
            continue
        a = cval
        alpha = np.minimum(1.0 - a, b)
        beta = np.minimum(a, 1.0 - b)
        up = rng.random(B) * (alpha + beta) < beta
        a_up = np.where(1.0 - a <= b, 1.0, a + b)
        b_up = np.where(1.0 - a <= b, a + b - 1.0, 0.0)
        a_dn = np.where(a <= 1.0 - b, 0.0, a + b - 1.0)
        b_dn = np.where(a <= 1.0 - b, a + b, 1.0)
        a_new = np.where(up, a_up, a_dn)
        b_new = np.where(up, b_up, b_dn)
        a_fix = has & _integral(a_new)
        b_fix = has & _integral(b_new)
        W[rows[a_fix], carry[a_fix]] = np.round(a_new[a_fix]).astype(np.int8)
        W[b_fix, i] = np.round(b_new[b_fix]).astype(np.int8)
        keep_a = has & ~a_fix
        keep_b = has & a_fix & ~b_fix
        done = has & a_fix & b_fix
        carry = np.where(keep_b, i, np.where(done, -1, carry))
        cval = np.where(keep_a, a_new, np.where(keep_b, b_new, np.where(done, 0.0, cval)))
    left = carry >= 0
    if left.any():
        bit = rng.random(B) < cval
        W[rows[left], carry[left]] = bit[left].astype(np.int8)
    return W[0] if size is None else W


def _split_integer(x: np.ndarray, tol: float = SNAP_TOL):
    near = np.abs(x - np.round(x)) <= tol
    x = np.where(near, np.round(x), x)
    base = np.floor(x)
    return base.astype(np.int64), x - base


def round_placement(x: FractionalPlacement, rng: np.random.Generator, size: Optional[int] = None):
    """Round the fractional parts of ``x`` dependently; the integer parts stay.

    Returns a :class:`Placement`, or a ``size x n`` integer matrix of rounded
    placements when ``size`` is given. Every realization sums to ``Q``.
    """
    base, frac = _split_integer(as_vector(x))
    W = dependent_round(frac, rng, size=size if size is not None else 1)
    R = base[None, :] + W
    if np.any(R.sum(axis=1) != x.Q):
        raise AssertionError("dependent rounding broke the inventory total")
    return Placement(R[0]) if size is None else R


@dataclass(frozen=True, eq=False)
class YhlSplit:
    yL: np.ndarray
    yH: np.ndarray


def split_yhl(y_row, x_i: float) -> YhlSplit:
    """Saving probabilities for a DC rounded down (``yL``) or up (``yH``).

    Satisfies ``yH*xf + yL*(1-xf) = y``, ``0 <= yL <= yH <= 1``,
    ``sum(yL) <= floor(x)`` and ``sum(yH) <= floor(x) + 1``.
    """
    y = np.asarray(y_row, dtype=float)
    if np.any(y < -1e-12) or np.any(y > 1 + 1e-12):
        raise ValueError("y entries must lie in [0, 1]")
    if y.sum() > x_i + 1e-9:
        raise ValueError(f"sum(y) = {y.sum()} exceeds x = {x_i}")
    y = np.clip(y, 0.0, 1.0)
    fl = np.floor(x_i)
    xf = x_i - fl
    total = y.sum()
    if total <= fl or xf <= _INT_TOL:
        return YhlSplit(y.copy(), y.copy())
    lo = np.maximum((y - xf) / (1.0 - xf), 0.0)  # smallest yL keeping yH <= 1
    # sum(yH) <= fl + 1 needs sum(yL) at least this much; the bare lower
    # bound can miss it when many small entries share the fractional unit
    need = (total - xf * (fl + 1.0)) / (1.0 - xf)
    yL = lo
    if need > lo.sum():
        t = (need - lo.sum()) / (total - lo.sum())
        yL = lo + t * (y - lo)
    yH = (y - (1.0 - xf) * yL) / xf
    return YhlSplit(np.clip(yL, 0.0, 1.0), np.clip(yH, 0.0, 1.0))


def unit_split(flow: np.ndarray, D) -> tuple:
    """Split each type ``j`` into ``D_j`` unit-demand types.

    Returns ``(y, unit_type)``: ``y`` is ``n x T`` with every column summing
    to at most one, and row sums equal to those of ``flow``.
    """
    Dv = np.asarray(D.D if isinstance(D, DemandScenario) else D, dtype=np.int64)
    n, m = flow.shape
    unit_type = np.repeat(np.arange(m), Dv)
    y = np.zeros((n, len(unit_type)))
    col = 0
    for j in range(m):
        if Dv[j] == 0:
            continue
        cur, room = col, 1.0
        for i in range(n):
            amt = float(flow[i, j])
            while amt > 1e-15 and cur < col + Dv[j]:
                take = min(amt, room)
                y[i, cur] += take
                amt -= take
                room -= take
                if room <= 1e-15:
                    cur, room = cur + 1, 1.0
        col += Dv[j]
    return np.clip(y, 0.0, 1.0), unit_type


@dataclass(frozen=True, eq=False)
class AssignmentOutcome:
    R: np.ndarray  # rounded placement(s)
    Z: np.ndarray  # 0/1 assignment DC x unit type (per trial)
    reward: np.ndarray
    unit_type: np.ndarray
    Y: Optional[np.ndarray] = None  # saved-unit indicators


def two_stage_assign(
    inst: NetworkInstance,
    x: AnyPlacement,
    D: DemandScenario,
    off_flow=None,
    rng: Optional[np.random.Generator] = None,
    size: Optional[int] = None,
    keep_y: bool = False,
) -> AssignmentOutcome:
    """Round ``x``, save units for unit-demand types, and assign each type to
    the best DC holding a unit saved for it (lowest index on ties).
    """
    if rng is None:
        raise ValueError("an explicit random generator is required")
    xv = as_vector(x)
    Q = int(round(xv.sum()))
    if off_flow is None:
        off_flow = off_value(inst, xv, D)
    flow = off_flow.flow if isinstance(off_flow, OffResult) else np.asarray(off_flow, dtype=float)
    y, unit_type = unit_split(flow, D)
    n, T = y.shape
    B = 1 if size is None else int(size)
    base, frac = _split_integer(xv)
    X = dependent_round(frac, rng, size=B).astype(bool)
    R = base[None, :] + X
    if np.any(R.sum(axis=1) != Q):
        raise AssertionError("rounded placement lost units")
    Y = np.zeros((B, n, T), dtype=bool)
    for i in range(n):
        if T == 0:
            break
        s = split_yhl(y[i], base[i] + frac[i])
        hi = dependent_round(s.yH, rng, size=B).astype(bool)
        lo = dependent_round(s.yL, rng, size=B).astype(bool)
        Y[:, i, :] = np.where(X[:, i:i + 1], hi, lo)
    if T:
        rt = inst.rewards[:, unit_type]  # n x T
        score = np.where(Y, rt[None], -1.0)
        best = score.argmax(axis=1)  # B x T, first index on ties
        got = np.take_along_axis(score, best[:, None, :], axis=1)[:, 0, :] > 0
        Z = np.zeros((B, n, T), dtype=np.int8)
        bb, tt = np.nonzero(got)
        Z[bb, best[bb, tt], tt] = 1
        reward = (Z * rt[None]).sum(axis=(1, 2))
    else:
        Z = np.zeros((B, n, 0), dtype=np.int8)
        reward = np.zeros(B)
    if np.any(Z.sum(axis=2) > R):
        raise AssertionError("assignment exceeds rounded inventory")
    if size is None:
        return AssignmentOutcome(R[0], Z[0], reward[0], unit_type, Y[0] if keep_y else None)
    return AssignmentOutcome(R, Z, reward, unit_type, Y if keep_y else None)


def rounding_bound(d: int) -> float:
    if d <= 0:
        return 1.0
    return 1.0 - (1.0 - 1.0 / d) ** d


@dataclass(frozen=True)
class CertifyReport:
    ratio_hat: float
    stderr: float
    bound: float
    z_ratio_hat: float
    off_fractional: float
    trials: int

    @property
    def passed(self) -> bool:
        return self.ratio_hat >= self.bound - 3 * self.stderr


def certify_rounding(
    inst: NetworkInstance,
    x: AnyPlacement,
    scenarios: ScenarioSet,
    trials: int,
    rng: np.random.Generator,
    z_trials: int = 500,
) -> CertifyReport:
    """Monte Carlo estimate of ``E_R[OFF(R(x))] / OFF(x)``.

    ``OFF(R(x), D)`` is re-solved exactly for every distinct rounded placement;
    the assignment construction is reported separately as ``z_ratio_hat``.
    """
    if trials < 1000:
        raise ValueError("certification needs at least 1000 trials")
    xv = as_vector(x)
    Q = int(round(xv.sum()))
    xf = FractionalPlacement(xv, Q)
    bound = rounding_bound(degree_profile(inst).d)
    base = off_values(inst, xf, scenarios)
    off_x = float(base.mean())
    if off_x <= 0 or not np.any(_split_integer(xv)[1]):
        # nothing to round, or nothing to lose
        return CertifyReport(1.0, 0.0, bound, 1.0, off_x, trials)
    R = round_placement(xf, rng, size=trials)
    uniq, inv = np.unique(R, axis=0, return_inverse=True)
    table = np.array([off_values(inst, u, scenarios).mean() for u in uniq])
    v = table[np.asarray(inv).reshape(-1)]
    ratio = float(v.mean() / off_x)
    stderr = float(v.std(ddof=1) / np.sqrt(trials) / off_x) if trials > 1 else 0.0
    z_total = 0.0
    if z_trials:
        for s in scenarios.scenarios:
            if s.total == 0:
                continue
            out = two_stage_assign(inst, xf, s, None, rng, size=z_trials)
            z_total += float(out.reward.mean())
    z_ratio = z_total / base.sum() if z_trials else float("nan")
    return CertifyReport(ratio, stderr, bound, z_ratio, off_x, trials)
