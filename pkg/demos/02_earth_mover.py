"""Earth mover distances between bit-string and type distributions."""

from fractions import Fraction as F

from huge_object import Distribution, point_mass, uniform
from huge_object.emd import emd, emd_weighted_types, extend_implementation, hamming, kronecker, weighted_l1
from huge_object.typedist import Implementation, TypeDistribution

# %% Hamming ground metric, normalized by the string length.
a = uniform(["000", "011", "110"])
b = Distribution({"111": F(1, 2), "000": F(1, 2)})
d, plan = emd(a, b, hamming())
print("emd =", d)
for (x, y), w in plan.plan.items():
    print(f"  move {w} from {x} to {y}")

# The Kronecker metric turns the same problem into total variation.
print("kronecker emd =", emd(a, b, kronecker()).distance)

# %% Type vectors are compared coordinate-wise, weighted by the label distribution.
labels = (("0",), ("1",))
eta = Distribution({("0",): F(1, 4), ("1",): F(3, 4)})
lam = TypeDistribution(labels, Distribution({(F(0), F(1)): F(1, 2), (F(1, 2), F(1, 2)): F(1, 2)}))
ups = TypeDistribution(labels, Distribution({(F(0), F(1)): 1}))
print("\nweighted type distance:", emd_weighted_types(lam, ups, eta))

# %% An optimal plan between quantized type distributions can be pinned to variables.
h = Implementation(labels, [(F(0), F(1)), (F(1, 2), F(1, 2))])
ups2 = TypeDistribution(labels, Distribution({(F(0), F(1)): 1}), 2)
big = extend_implementation(h, ups2, weighted_l1(eta, labels))
for i, (src, dst) in enumerate(big.pairs):
    print(f"  variable {i}: {tuple(map(str, src))} -> {tuple(map(str, dst))}")
print("point mass distance check:", emd(point_mass("00"), point_mass("11"), hamming()).distance)
