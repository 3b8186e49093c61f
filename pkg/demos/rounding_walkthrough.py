"""Round a fractional placement and watch how much hindsight value survives.

Run from the repository root:  python demos/rounding_walkthrough.py
"""

import numpy as np

from invplace import rng_stream
from invplace.core import FractionalPlacement
from invplace.gallery import build_tight
from invplace.offline import saa_placement
from invplace.rounding import certify_rounding, dependent_round, rounding_bound, split_yhl

rng = rng_stream(11, 0)

w = np.array([0.3, 0.7, 0.5, 0.5, 0.25])
W = dependent_round(w, rng, size=200_000)
print("weights          ", w)
print("empirical means  ", W.mean(axis=0).round(3))
print("row sums seen    ", sorted(set(W.sum(axis=1).tolist())), "for a total of", w.sum())
cov = np.cov(W.T.astype(float))
off = cov[~np.eye(len(w), dtype=bool)]
print(f"pairwise covariances between {off.min():.4f} and {off.max():.4f} (noise is about 0.001)")

print()
s = split_yhl([0.6, 0.5, 0.3], 1.4)
print("unit-saving split at x = 1.4 for saving probabilities (0.6, 0.5, 0.3)")
print("  if rounded up  :", s.yH.round(3), "sum", round(float(s.yH.sum()), 3))
print("  if rounded down:", s.yL.round(3), "sum", round(float(s.yL.sum()), 3))

print()
fam = build_tight(4, 2)
half = FractionalPlacement(np.full(4, 0.5), 2)
rep = certify_rounding(fam.inst, half, fam.scenarios, 20_000, rng_stream(11, 1))
print("tight instance n=4 d=2, x = (0.5, 0.5, 0.5, 0.5)")
print(f"  kept {rep.ratio_hat:.4f} +- {rep.stderr:.4f} of the fractional value "
      f"(floor {rounding_bound(2):.4f}), unit assignment kept {rep.z_ratio_hat:.4f}")

sol = saa_placement(fam.inst, fam.scenarios)
print("  sample-average LP placement:", sol.x_hat.x.round(3), "value", round(sol.value, 4))
