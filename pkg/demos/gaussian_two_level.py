"""Two-level Gaussian model: every Fisher term against its closed form.

``y | w ~ N(w, 1)`` and ``w | phi ~ N(0, 1/phi)``.  The observation level
does not involve ``phi``, so the marginal information is the latent
information minus the information left in ``w`` after seeing ``y``.
"""

import numpy as np

from hifisher import EstimatorConfig, decompose_two_level
from hifisher.models import make_gaussian2

model = make_gaussian2()
exact = EstimatorConfig(n_outer=1000)
mc = EstimatorConfig(n_outer=100_000, seed=1, analytic="none")

print(f"{'phi':>6} {'I_w':>10} {'E[I_w|y]':>10} {'I_y':>12} {'closed':>12} {'I_y (MC)':>12} {'SE':>9}")
for phi in np.geomspace(0.25, 4, 5):
    r = decompose_two_level(model, phi, exact)
    m = decompose_two_level(model, phi, mc)
    closed = 1 / (2 * phi**2 * (phi + 1) ** 2)
    print(
        f"{phi:6.3f} {r.i_w.scalar():10.5f} {r.e_iw_given_y.scalar():10.5f} {r.i_marginal.scalar():12.8f} "
        f"{closed:12.8f} {m.i_marginal.scalar():12.8f} {m.i_marginal.se[0, 0]:9.2e}"
    )
