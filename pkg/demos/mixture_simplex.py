"""Three-component Gaussian mixture over the weight simplex.

At each interior point of a barycentric grid the complete-data information
splits into the marginal part and the expected posterior latent part; the
square-root determinants of the two parts add up to at most that of the sum.
"""

import numpy as np

from hifisher import EstimatorConfig
from hifisher.models import gaussian_component, make_mixture
from hifisher.priors import barycentric_grid, jeffreys_grid, minkowski_check

model = make_mixture([gaussian_component(m, 1.0) for m in (-2.0, 0.0, 2.0)])
coords = barycentric_grid(3, 8)[:, 1:]
g = jeffreys_grid(model, coords, EstimatorConfig(n_outer=4000, seed=3))

print(f"{'weights':>22} {'jeffreys':>10} {'bound':>10} {'slack':>9} {'slack/SE':>9}")
for c, r, j, u in zip(coords, g.reports, g.jeffreys, g.upper_bound):
    rep = minkowski_check(r.i_marginal, r.e_iw_given_y)
    w = np.concatenate([[1 - c.sum()], c])
    print(f"{np.array2string(w, precision=3):>22} {j:10.4f} {u:10.4f} {rep.slack_half:9.4f} "
          f"{rep.slack_half / rep.slack_stderr:9.2f}")
