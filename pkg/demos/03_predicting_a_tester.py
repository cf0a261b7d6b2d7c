"""Predicting a canonical tester from weights and types alone.

The predictor never touches samples. For a product distribution its only
error comes from index tuples that repeat a coordinate.
"""

from fractions import Fraction as F

from huge_object import Detailing, product_bernoulli, tv_distance
from huge_object.detailing import type_distribution, weight_distribution
from huge_object.oracle import acceptance_probability_exact, canonical_distribution_exact, rows_equal
from huge_object.predictor import accept_probability, simulated_distribution_exact

mu = product_bernoulli([F(1, 4), F(3, 4)] * 4)
det = Detailing.trivial(mu)
eta, lam = weight_distribution(det), type_distribution(det)
print("types:", {tuple(map(str, t)): str(w) for t, w in lam.dist.items()})

# %% Compare the simulated matrix law with the true one.
for s, q in ((1, 1), (2, 1), (1, 2), (2, 2)):
    sim = simulated_distribution_exact(s, q, eta, lam)
    real = canonical_distribution_exact(mu, s, q)
    t = rows_equal(s, q)
    print(f"s={s} q={q}: TV {float(tv_distance(sim, real)):.4f}, "
          f"acceptance predicted {float(accept_probability(s, q, eta, lam, t)):.4f} "
          f"vs exact {float(acceptance_probability_exact(mu, t)):.4f}")

# With q = 1 there is nothing to repeat and the laws coincide.
# With q = 2 a repeated pair (probability 1/8 here) shows one bit twice,
# which the simulator, drawing a fresh type per column, never does.
