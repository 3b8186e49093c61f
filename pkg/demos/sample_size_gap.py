"""How quickly the in-sample optimism of the sample-average placement fades.

Run from the repository root:  python demos/sample_size_gap.py
"""

from invplace import rng_stream
from invplace.core import StarNetwork, expand_star
from invplace.harness import gap_decay_study, random_star_model

inst = expand_star(StarNetwork(4, 0.5), 20)
model = random_star_model(4, 20, rng_stream(0, 99))
study = gap_decay_study(inst, model, [5, 20, 80], holdout_size=20_000, seed=0, resamples=10)
for K, g, se in zip(study.K_values, study.mean_gap, study.stderr):
    print(f"K={K:>3}: training value minus holdout value {g:.3f} +- {se:.3f}")
print(f"log-log slope {study.exponent:.2f}")
