"""Jeffreys prior for the Student-t degrees of freedom.

The Student-t law is a normal scale mixture with Gamma(theta/2, theta/2)
precisions.  The prior decays like theta^-2 (integrable), while near zero
theta^2 I_y -> 1, so the prior behaves like 1/theta there.
"""

import numpy as np

from hifisher import EstimatorConfig
from hifisher.models import make_studentt
from hifisher.oracle import score_variance_fisher
from hifisher.priors import jeffreys_grid, parse_grid

model = make_studentt()
cfg = EstimatorConfig(n_outer=1000)

print("decomposition vs score-variance oracle")
for t in (1.0, 5.0, 30.0):
    g = jeffreys_grid(model, [t], cfg)
    oracle = score_variance_fisher(model, t, cfg).scalar()
    print(f"  theta={t:5.1f}  I_y={g.reports[0].i_marginal.scalar():.10e}  oracle={oracle:.10e}")

g = jeffreys_grid(model, parse_grid("0.01:1000:200:log"), cfg)
print("\nsmall-theta behaviour of theta^2 I_y")
for k in (0, 20, 40, 60):
    t = g.coords[k, 0]
    print(f"  theta={t:8.4f}  theta^2 I_y={t**2 * g.reports[k].i_marginal.scalar():.4f}")

print("\ntail fits of the prior")
for tail in g.properness.tails:
    print(f"  boundary={tail.boundary}  exponent={tail.exponent:.3f} +- {tail.stderr:.3f}  {tail.status}")
print(f"verdict: {g.verdict}")
