"""
Density grids and upper tail dependence
=======================================

The NB copula with a comonotone driver keeps upper tail dependence,
the Poisson copula loses it.
"""

import numpy as np

import ipucopula as ic

sym_nb = ic.IpuModel(ic.DriverSpec(ic.comonotone(2), (ic.nb(5), ic.nb(5))))
sym_po = ic.IpuModel(ic.DriverSpec(ic.comonotone(2), (ic.poisson(6), ic.poisson(6))))

# midpoint grid; the mean approximates the integral over the unit square
for name, m in (("NB 5", sym_nb), ("Po 6", sym_po)):
    grid = ic.density_grid(m, 100)
    print(name, "integral", grid.values.mean(), "residual bound", grid.residual)

# density at a single point, with the truncation bound
print(ic.density(sym_nb, [0.3, 0.7], return_bound=True))

# closed form vs large-a approximation
for a in (1, 5, 10, 50):
    print(a, ic.lambda_u_nb_exact(a), ic.lambda_u_nb_asymptotic(a))

# plug-in estimates on simulated samples
u_nb = ic.simulate(sym_nb, 1_000_000, seed=1)
u_po = ic.simulate(sym_po, 1_000_000, seed=1)
for t in (0.9, 0.99, 0.999):
    print(t, ic.empirical_lambda_u(u_nb, t).estimate, ic.empirical_lambda_u(u_po, t).estimate)
