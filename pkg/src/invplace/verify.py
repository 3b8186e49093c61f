"""Statistical self-checks of the rounding machinery, reported as plain dicts."""

from __future__ import annotations

import numpy as np

from .core import FractionalPlacement, rng_stream
from .gallery import build_tight
from .rounding import certify_rounding, dependent_round, rounding_bound, split_yhl


def rounding_stats(w, W: np.ndarray) -> dict:
    """Marginal, sum and pairwise checks for trials ``W`` of weights ``w``."""
    w = np.asarray(w, dtype=float)
    N = W.shape[0]
    s = w.sum()
    sums = W.sum(axis=1)
    p2 = bool(np.all((sums == np.floor(s + 1e-12)) | (sums == np.ceil(s - 1e-12))))
    p = W.mean(axis=0)
    sig = np.sqrt(w * (1 - w) / N)
    p1_ok = np.abs(p - w) <= 3 * sig + 1e-15
    worst = 0.0
    p3_ok = True
    Wf = W.astype(float)
    for b in (1, 0):
        X = Wf if b == 1 else 1.0 - Wf
        joint = X.T @ X / N
        marg = X.mean(axis=0)
        sd = np.sqrt(joint * (1 - joint) / N)
        excess = joint - np.outer(marg, marg) - 3 * sd
        np.fill_diagonal(excess, -np.inf)
        worst = max(worst, float(excess.max()) if len(w) > 1 else -np.inf)
        p3_ok &= bool(np.all(excess <= 1e-15))
    return {"P1_fraction": float(p1_ok.mean()), "P2": p2, "P3": p3_ok, "P3_worst_excess": worst}


def rounding_report(seed: int, n_vectors: int = 50, trials: int = 100_000, max_n: int = 10) -> dict:
    rng = rng_stream(seed, 0)
    p1_hits = p1_total = 0
    p2_ok = p3_ok = True
    for v in range(n_vectors):
        n = int(rng.integers(2, max_n + 1))
        w = rng.random(n)
        W = dependent_round(w, rng_stream(seed, 1, v), size=trials)
        st = rounding_stats(w, W)
        p1_hits += st["P1_fraction"] * n
        p1_total += n
        p2_ok &= st["P2"]
        p3_ok &= st["P3"]
    split_ok = True
    for _ in range(1000):
        T = int(rng.integers(1, 6))
        x = float(rng.uniform(0, 4))
        y = rng.random(T)
        if y.sum() > x:
            y *= x / y.sum() * rng.random()
        s = split_yhl(y, x)
        xf = x - np.floor(x)
        split_ok &= bool(np.all(np.abs(s.yH * xf + s.yL * (1 - xf) - y) <= 1e-9))
        split_ok &= bool(np.all(s.yL <= s.yH + 1e-9) and s.yL.min() >= -1e-9 and s.yH.max() <= 1 + 1e-9)
        split_ok &= bool(s.yL.sum() <= np.floor(x) + 1e-9 and s.yH.sum() <= np.floor(x) + 1 + 1e-9)
    fam = build_tight(4, 2)
    cert = certify_rounding(fam.inst, FractionalPlacement(np.full(4, 0.5), 2), fam.scenarios, 20_000,
                            rng_stream(seed, 2), z_trials=0)
    p1_frac = p1_hits / p1_total
    out = {
        "seed": seed,
        "vectors": n_vectors,
        "trials": trials,
        "P1_fraction_within_3sigma": p1_frac,
        "P1": p1_frac >= 0.99,
        "P2": p2_ok,
        "P3": p3_ok,
        "split_yhl": split_ok,
        "rounding_tight_ratio": cert.ratio_hat,
        "rounding_tight_stderr": cert.stderr,
        "rounding_floor": rounding_bound(2),
        "rounding_certified": cert.passed,
    }
    out["passed"] = bool(out["P1"] and p2_ok and p3_ok and split_ok and cert.passed)
    return out
