"""How conditioning on a few variables raises the index of a detailing.

Run with ``python3 demos/01_index_and_robustness.py``.
"""

from fractions import Fraction

import numpy as np

from huge_object import Detailing, HugeObjectOracle, index, two_point, uniform_bits
from huge_object.detailing import find_weakly_robust_exact, is_weakly_robust, refined_index, robustness_gains
from huge_object.estimators import EstimatorConfig, estimate_index, find_weakly_robust_detailing

# %% The index of the trivial detailing is the mean squared marginal.
mu = two_point(8)
det = Detailing.trivial(mu)
print("uniform over all strings:", index(Detailing.trivial(uniform_bits(8))))
print("all-zeros or all-ones:   ", index(det))

# Conditioning on a single coordinate reveals everything about a two-point mixture.
for u in ([], [0], [0, 5]):
    print(f"  U={u}: index {refined_index(det, u)}")

# %% Weak robustness: no small set of extra variables should gain much.
delta = Fraction(1, 5)
print("\ntrivial detailing robust?", is_weakly_robust(det, delta, 1))
u = find_weakly_robust_exact(det, delta, 1)
print("greedy refinement picks", sorted(u))
gains = robustness_gains(det, 1)
print("gain of each singleton:", sorted({float(g) for s, g in gains.items() if s}))

# %% The same search, from samples and queries only.
cfg = EstimatorConfig(sample_size_override=2000, index_set_override=64)
rng = np.random.default_rng(1)
o = HugeObjectOracle(mu, rng)
print("\nestimated index with U={0}:", round(estimate_index(o, [0], cfg, rng), 3))
found = find_weakly_robust_detailing(o, delta, 1, Fraction(1, 10), cfg, rng)
print("sampled search returned", sorted(found), "after", o.counters())
