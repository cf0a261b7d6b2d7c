"""Tolerant testing and distance estimation for the point-mass property."""

from fractions import Fraction as F

import numpy as np

from huge_object import HugeObjectOracle, point_mass, two_point
from huge_object.core_dist import Distribution
from huge_object.tolerant import DESK, estimate_distance, point_mass_property, tolerant_trace

prop = point_mass_property()
inputs = {
    "point mass": point_mass("01101001"),
    "skewed mixture": Distribution({"0" * 8: F(4, 5), "1" * 8: F(1, 5)}),
    "two-point": two_point(8),
}

# %% One traced run per input.
rng = np.random.default_rng(3)
for name, mu in inputs.items():
    tr = tolerant_trace(HugeObjectOracle(mu, rng), prop, F(1, 10), F(1, 2), cfg=DESK, rng=rng)
    res = tr["result"]
    print(f"{name:15s} distance {float(prop.distance(mu)):.2f}  U={tr['U']}  {res.verdict}  "
          f"after {res.checked} candidates")

# %% Distance estimates sweep overlapping bands and keep the first accepted one.
cfg = DESK.with_(amplification=3)
for name, mu in inputs.items():
    bands = []
    est = estimate_distance(HugeObjectOracle(mu, rng), prop, F(1, 4), cfg, rng, bands)
    print(f"{name:15s} estimate {est:.3f}  bands tried {len(bands)}")
