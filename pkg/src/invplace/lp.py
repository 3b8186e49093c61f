"""Linear programs in maximization form, with dual values.

Two backends sit behind :func:`solve_lp`: a dense two-phase tableau simplex
(Dantzig pricing until the first degenerate pivot, then Bland's rule), and
HiGHS through :func:`scipy.optimize.linprog` for the large scenario LPs.
:func:`solve_transportation` is an independent successive-shortest-path
min-cost-flow route for the bipartite LP used by the offline surrogate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_TOL = 1e-6
_PIVOT_TOL = 1e-9
_RC_TOL = 1e-11
_AUTO_DENSE_LIMIT = 60_000


@dataclass(frozen=True, eq=False)
class LpProblem:
    """max c.x  s.t.  A x (<= or =) b,  x >= 0."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    sense: tuple

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float).reshape(-1, len(c)) if len(c) else np.zeros((0, 0))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        sense = tuple(self.sense)
        if len(c) == 0:
            raise ValueError("LP needs at least one variable")
        if A.shape[0] != len(b) or len(sense) != len(b):
            raise ValueError("constraint rows, rhs and senses disagree")
        if any(s not in ("<=", "=") for s in sense):
            raise ValueError("senses must be '<=' or '='")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("LP coefficients must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sense", sense)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b)


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    objective: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve_lp(p: LpProblem, method: str = "auto") -> LpSolution:
    """Solve ``p``; infeasibility and unboundedness are reported in ``status``.

    ``method`` is ``"simplex"`` (dense tableau), ``"highs"``, or ``"auto"``,
    which picks the tableau for problems up to ~6e4 tableau entries.
    """
    if method == "auto":
        method = "simplex" if p.n_vars * max(p.n_rows, 1) <= _AUTO_DENSE_LIMIT else "highs"
    if method == "simplex":
        return _Tableau(p).solve()
    if method == "highs":
        return _solve_highs(p)
    raise ValueError(f"unknown LP method {method!r}")


def certificate(p: LpProblem, sol: LpSolution) -> dict:
    """Primal/dual feasibility, duality gap and complementary-slackness residuals."""
    x, y = sol.x, sol.duals
    lhs = p.A @ x
    eq = np.array([s == "=" for s in p.sense], dtype=bool)
    slack = p.b - lhs
    primal = max(
        float(np.max(-slack[~eq], initial=0.0)),
        float(np.max(np.abs(slack[eq]), initial=0.0)),
        float(np.max(-x, initial=0.0)),
    )
    reduced = p.A.T @ y - p.c
    dual = max(float(np.max(-reduced, initial=0.0)), float(np.max(-y[~eq], initial=0.0)))
    gap = abs(float(p.c @ x) - float(p.b @ y))
    cs = max(
        float(np.max(np.abs(y[~eq] * slack[~eq]), initial=0.0)),
        float(np.max(np.abs(x * reduced), initial=0.0)),
    )
    return {"primal": primal, "dual": dual, "gap": gap, "cs": cs}


def is_certified(p: LpProblem, sol: LpSolution) -> bool:
    c = certificate(p, sol)
    scale = 1.0 + abs(sol.objective)
    return c["primal"] <= FEAS_TOL and c["dual"] <= OPT_TOL and c["gap"] <= OPT_TOL * scale and c["cs"] <= OPT_TOL


def to_lp_format(p: LpProblem, name: str = "problem") -> str:
    """Plain-text LP-style dump for cross-checking with external solvers."""

    def expr(coefs):
        terms = [f"{'+' if v >= 0 else '-'} {abs(v):.17g} x{j}" for j, v in enumerate(coefs) if v != 0]
        return " ".join(terms) if terms else "0 x0"

    lines = [f"\\ {name}", "Maximize", f" obj: {expr(p.c)}", "Subject To"]
    for i, (row, s, rhs) in enumerate(zip(p.A, p.sense, p.b)):
        lines.append(f" c{i}: {expr(row)} {s} {rhs:.17g}")
    lines += ["Bounds"] + [f" x{j} >= 0" for j in range(p.n_vars)] + ["End", ""]
    return "\n".join(lines)


# ---------------------------------------------------------------- tableau


class _Tableau:
    def __init__(self, p: LpProblem):
        self.p = p
        k, nv = p.A.shape
        A = p.A.copy()
        b = p.b.copy()
        # flip rows with negative rhs so the initial basis is feasible
        self.sign = np.where(b < 0, -1.0, 1.0)
        A *= self.sign[:, None]
        b *= self.sign
        slack_rows = [i for i in range(k) if p.sense[i] == "<="]
        art_rows = [i for i in range(k) if p.sense[i] == "=" or self.sign[i] < 0]
        ns, na = len(slack_rows), len(art_rows)
        self.nv, self.ns, self.na = nv, ns, na
        ncol = nv + ns + na
        M = np.zeros((k, ncol))
        M[:, :nv] = A
        for s, i in enumerate(slack_rows):
            M[i, nv + s] = self.sign[i]
        for a, i in enumerate(art_rows):
            M[i, nv + ns + a] = 1.0
        self.M = M  # standard-form columns, kept for dual recovery
        self.T = np.zeros((k + 1, ncol + 1))
        self.T[:k, :ncol] = M
        self.T[:k, -1] = b
        basis = np.full(k, -1, dtype=np.int64)
        for s, i in enumerate(slack_rows):
            if self.sign[i] > 0:
                basis[i] = nv + s
        for a, i in enumerate(art_rows):
            basis[i] = nv + ns + a
        self.basis = basis
        self.rows = np.arange(k)  # original row index of each tableau row

    def _price(self, cost: np.ndarray):
        # objective row holds reduced costs c_j - z_j; last entry is -objective
        k = len(self.basis)
        self.T[k, :-1] = cost
        self.T[k, -1] = 0.0
        cb = cost[self.basis]
        self.T[k] -= cb @ self.T[:k]

    def _pivot(self, r: int, col: int):
        T = self.T
        T[r] /= T[r, col]
        colv = T[:, col].copy()
        colv[r] = 0.0
        T -= np.outer(colv, T[r])
        self.basis[r] = col

    def _iterate(self, allowed: np.ndarray) -> str:
        T = self.T
        k = len(self.basis)
        bland = False
        for _ in range(50_000):
            rc = np.where(allowed, T[k, :-1], 0.0)
            cand = np.flatnonzero(rc > _RC_TOL)
            if cand.size == 0:
                return "optimal"
            col = int(cand[0]) if bland else int(cand[np.argmax(rc[cand])])
            colv = T[:k, col]
            pos = np.flatnonzero(colv > _PIVOT_TOL)
            if pos.size == 0:
                return "unbounded"
            ratios = T[pos, -1] / colv[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * (1 + abs(best))]
            r = int(ties[np.argmin(self.basis[ties])])
            if best <= 1e-12:
                bland = True
            self._pivot(r, col)
        raise RuntimeError("simplex iteration limit reached")

    def solve(self) -> LpSolution:
        nv, ns, na = self.nv, self.ns, self.na
        ncol = nv + ns + na
        k = len(self.basis)
        if na:
            cost = np.zeros(ncol)
            cost[nv + ns:] = -1.0
            self._price(cost)
            self._iterate(np.ones(ncol, dtype=bool))
            if -self.T[k, -1] < -FEAS_TOL * (1 + np.abs(self.p.b).max()):
                return LpSolution("infeasible")
            self._drive_out_artificials()
            k = len(self.basis)
        cost = np.zeros(ncol)
        cost[:nv] = self.p.c
        self._price(cost)
        allowed = np.ones(ncol, dtype=bool)
        allowed[nv + ns:] = False
        status = self._iterate(allowed)
        if status != "optimal":
            return LpSolution(status)
        z = np.zeros(ncol)
        z[self.basis] = self.T[:k, -1]
        x = np.maximum(z[:nv], 0.0)
        B = self.M[self.rows][:, self.basis]
        y_rows = np.linalg.solve(B.T, cost[self.basis])
        y = np.zeros(self.p.n_rows)
        y[self.rows] = y_rows
        y *= self.sign
        return LpSolution("optimal", x, y, float(self.p.c @ x))

    def _drive_out_artificials(self):
        nv, ns = self.nv, self.ns
        first_art = nv + ns
        keep = []
        for r in range(len(self.basis)):
            if self.basis[r] < first_art:
                keep.append(r)
                continue
            row = self.T[r, :first_art]
            nz = np.flatnonzero(np.abs(row) > _PIVOT_TOL)
            if nz.size:
                self._pivot(r, int(nz[0]))
                keep.append(r)
            # otherwise the row is redundant and is dropped
        if len(keep) < len(self.basis):
            k = len(self.basis)
            self.T = np.vstack([self.T[keep], self.T[k:k + 1]])
            self.basis = self.basis[keep]
            self.rows = self.rows[keep]


# ---------------------------------------------------------------- HiGHS


def _solve_highs(p: LpProblem) -> LpSolution:
    eq = np.array([s == "=" for s in p.sense], dtype=bool)
    kw = {}
    if (~eq).any():
        kw["A_ub"], kw["b_ub"] = p.A[~eq], p.b[~eq]
    if eq.any():
        kw["A_eq"], kw["b_eq"] = p.A[eq], p.b[eq]
    res = linprog(
        -p.c,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        **kw,
    )
    if res.status == 2:
        return LpSolution("infeasible")
    if res.status == 3:
        return LpSolution("unbounded")
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    y = np.zeros(p.n_rows)
    if (~eq).any():
        y[~eq] = -res.ineqlin.marginals
    if eq.any():
        y[eq] = -res.eqlin.marginals
    x = np.maximum(res.x, 0.0)
    return LpSolution("optimal", x, y, float(p.c @ x))


# ---------------------------------------------------------------- transportation


def transportation_lp(rewards, supply, demand) -> LpProblem:
    """The bipartite LP: rows 0..m-1 are demand rows, m..m+n-1 supply rows.

    Variables are the n*m entries of the flow in row-major order.
    """
    r = np.asarray(rewards, dtype=float)
    n, m = r.shape
    A = np.zeros((m + n, n * m))
    for j in range(m):
        A[j, j::m] = 1.0
    for i in range(n):
        A[m + i, i * m:(i + 1) * m] = 1.0
    b = np.concatenate([np.asarray(demand, dtype=float), np.asarray(supply, dtype=float)])
    return LpProblem(r.reshape(-1), A, b, ("<=",) * (m + n))


def _integral(v: np.ndarray) -> bool:
    return bool(np.all(v == np.round(v)))


def solve_transportation(rewards, supply, demand, method: Optional[str] = None):
    """Maximum-reward bipartite flow. Returns ``(value, flow)``.

    Integer supplies and demands go through successive shortest paths on the
    residual graph (costs = -rewards), which yields an integral optimal flow;
    fractional data falls back to :func:`solve_lp`.
    """
    r = np.asarray(rewards, dtype=float)
    s = np.asarray(supply, dtype=float)
    d = np.asarray(demand, dtype=float)
    if np.any(s < 0) or np.any(d < 0):
        raise ValueError("supplies and demands must be non-negative")
    if method is None:
        method = "ssp" if _integral(s) and _integral(d) else "lp"
    if method == "lp":
        sol = solve_lp(transportation_lp(r, s, d))
        flow = sol.x.reshape(r.shape)
        return float((r * flow).sum()), flow
    flow = _ssp(r, s, d)
    return float((r * flow).sum()), flow


def _ssp(r: np.ndarray, supply: np.ndarray, demand: np.ndarray) -> np.ndarray:
    n, m = r.shape
    flow = np.zeros((n, m))
    edge = r > 0
    if not edge.any():
        return flow
    neg = np.where(edge, -r, np.inf)
    tol = 1e-12
    while True:
        rs = supply - flow.sum(axis=1)
        rd = demand - flow.sum(axis=0)
        if not (rs > tol).any() or not (rd > tol).any():
            break
        dist_dc = np.where(rs > tol, 0.0, np.inf)
        pred_dc = np.full(n, -1)
        back = np.where(flow > tol, r, np.inf)
        dist_t = np.full(m, np.inf)
        pred_t = np.zeros(m, dtype=np.int64)
        for _ in range(n + m + 2):
            cand_t = dist_dc[:, None] + neg
            arg = np.argmin(cand_t, axis=0)
            val = cand_t[arg, np.arange(m)]
            # strict improvement only, so zero-cost cycles never enter the tree
            imp = val < dist_t - 1e-12
            dist_t = np.where(imp, val, dist_t)
            pred_t = np.where(imp, arg, pred_t)
            cand_d = dist_t[None, :] + back
            best_j = np.argmin(cand_d, axis=1)
            via = cand_d[np.arange(n), best_j]
            better = via < dist_dc - 1e-12
            if not better.any():
                break
            dist_dc = np.where(better, via, dist_dc)
            pred_dc = np.where(better, best_j, pred_dc)
        open_t = np.where(rd > tol, dist_t, np.inf)
        jstar = int(np.argmin(open_t))
        if not open_t[jstar] < -tol:
            break
        # walk the path backwards and find the bottleneck
        path = []
        j = jstar
        amount = rd[jstar]
        seen = 0
        while True:
            i = int(pred_t[j])
            path.append((i, j, +1))
            jb = int(pred_dc[i])
            if jb < 0:
                amount = min(amount, rs[i])
                break
            path.append((i, jb, -1))
            amount = min(amount, flow[i, jb])
            j = jb
            seen += 1
            if seen > n + m:
                raise RuntimeError("cycle in shortest-path tree")
        for i, j, sgn in path:
            flow[i, j] += sgn * amount
    return flow
