"""Scale-mixture lasso: the rate's Jeffreys prior is exactly 1/theta.

Coefficients are normal given exponential variances whose rate is
theta^2/2.  Every coefficient carries one unit of information on log theta,
so theta^2 I_y = p for any number of coefficients p.
"""

import numpy as np

from hifisher import EstimatorConfig
from hifisher.models import make_lasso
from hifisher.priors import jeffreys_grid, parse_grid

cfg = EstimatorConfig(n_outer=1000)
theta = np.geomspace(0.1, 10, 5)
for p in (1, 2, 5):
    g = jeffreys_grid(make_lasso(p=p), theta, cfg)
    scaled = [t**2 * r.i_marginal.scalar() for t, r in zip(theta, g.reports)]
    print(f"p={p}: theta^2 I_y = {np.round(scaled, 12).tolist()}  theta*pi = {np.round(theta * g.jeffreys, 12).tolist()}")

# 1/theta is log-divergent at both ends of (0, inf)
g = jeffreys_grid(make_lasso(p=1), parse_grid("0.01:100:200:log"), cfg)
print("tail exponents", [round(t.exponent, 9) for t in g.properness.tails], "verdict", g.verdict)
