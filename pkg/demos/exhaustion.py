# ---
# jupyter:
#   jupytext:
#     formats: py:light
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Growing the condenser
#
# Solve on nested subsets of the nodes.  Larger sets can only lower the
# minimal energy, and the last step is the full problem.

import numpy as np
from gaussvp import Condenser, ExternalField, Kernel, Plate, make_exhaustion, run_exhaustion

rng = np.random.default_rng(1)
a = rng.uniform(0, 1, (40, 3))
b = rng.uniform(0, 1, (30, 3)) + [1.5, 0, 0]
c = Condenser([Plate(1, a, 1.0, 1.0), Plate(-1, b, 1.0, 2.0)])
k = Kernel.riesz(1.5, 3)
f = ExternalField.tabulated([a[:, 2], np.zeros(len(b))])

rep = run_exhaustion(k, c, f, make_exhaustion(c, 6, "centroid"))
for s in rep.steps:
    print(f"step {s.step}  sizes {s.sizes}  value {s.value:.8f}  distance to final {s.distance_to_final:.2e}")
print("monotone:", rep.monotone_ok, " converged:", rep.converged)
