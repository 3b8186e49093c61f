"""Walk through the two worst-case families and print their gaps.

Run from the repository root:  python demos/worst_cases.py
"""

from invplace.gallery import greedy_gap, tight_gap, tight_ratio_closed_form
from invplace.rounding import rounding_bound

print("Tight family: every d-subset of n DCs is a demand type with reward 1.")
print("The fractional optimum spreads Q = n/d units evenly and always scores 1.")
for n, d in [(4, 2), (6, 2), (6, 3), (8, 2)]:
    gap = tight_gap(n, d)
    closed = float(tight_ratio_closed_form(n, d))
    print(f"  n={n} d={d}: best integral {gap.integer_opt:.4f}, closed form {closed:.4f}, "
          f"rounding floor {rounding_bound(d):.4f}")

print()
print("Greedy grid: adding one unit at a time by marginal gain picks the column DCs,")
print("while one unit per row DC covers every location.")
for Q in range(2, 7):
    g = greedy_gap(Q)
    target = 1 - (1 - 1 / Q) ** Q
    print(f"  Q={Q}: greedy {g.greedy_value:.5f} / optimal {g.optimal_value:.5f} = {g.ratio:.5f} "
          f"(limit curve {target:.5f}), greedy order {list(g.trace)}")
