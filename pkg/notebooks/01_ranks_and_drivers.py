"""
Ranks, base copulas and drivers
===============================

From the 20-point example dataset to the integer driver of an IPU copula.
"""

import numpy as np

import ipucopula as ic
from ipucopula.families import marginal_alpha

# the embedded example dataset and its ranks
obs = ic.fixture_observations()
ranks = ic.compute_ranks(obs)
print(np.column_stack([obs.values, ranks.ranks]))

# shuffle of M: one diagonal segment per observed rank cell
base = ic.shuffle_of_m(ranks)
rng = np.random.default_rng(0)
print(ic.sample_base(base, rng, size=5))

# the worst-case shuffle flips the top corner to a countermonotone block:
# the lower-left half of the top cell loses its mass
wc = ic.worst_case_shuffle(ranks, corner_size=1)
lo, hi = [0.95, 0.95], [0.975, 0.975]
print(ic.rectangle_mass(base, lo, hi), ic.rectangle_mass(wc, lo, hi))

# driver Z = coordinatewise quantile transform of the base sample
spec = ic.DriverSpec(base, (ic.nb(5), ic.poisson(6)))
z = ic.sample_driver(spec, rng, size=100_000)
for k, fam in enumerate(spec.families):
    i = np.arange(6)
    freq = np.bincount(z[:, k], minlength=6)[:6] / len(z)
    print(fam.kind.value, np.round(freq, 4), np.round(marginal_alpha(fam, i), 4))
