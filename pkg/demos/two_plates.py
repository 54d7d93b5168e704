# ---
# jupyter:
#   jupytext:
#     formats: py:light
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Two charged plates
#
# A positive grid at z=0 and a negative grid at z=1, Riesz kernel with
# alpha=2 in R^3.  We solve for the equilibrium, certify it and look at
# where the mass goes.

import numpy as np
from gaussvp import (Condenser, ExternalField, Kernel, Plate, SolverConfig, certify_equilibrium,
                     solve, weighted_potentials)
from gaussvp.geometry import grid_plate

top = grid_plate(20, 10, 0.1, z=0.0)
bottom = grid_plate(20, 10, 0.1, z=1.0)
c = Condenser([Plate(1, top, 1.0, 1.0), Plate(-1, bottom, 1.0, 1.0)])
k = Kernel.riesz(2, 3)
f = ExternalField.zero()

r = solve(k, c, f, SolverConfig(gap_tol_abs=1e-10))
print(f"value {r.value:.10f}  gap {r.gap:.1e}  iterations {r.iters}")
print("constants", r.constants)

# Mass piles up on the rim of each plate, as for a conductor.

w = r.lam.weights[0].reshape(20, 10)
print("corner / centre weight ratio:", w[0, 0] / w[10, 5])

# The certificate checks the pointwise conditions at every node.

cert = certify_equilibrium(k, c, f, r.lam)
print("certified:", cert.ok, " worst:", cert.worst())

# With equal plates the potential is flat on each plate: a W = C g.

W = weighted_potentials(k, r.lam, f)
print("spread of W on each plate:", [float(np.ptp(x)) for x in W])

# A field growing with x pushes the positive mass towards x < 0.

fx = ExternalField.tabulated([0.5 * top[:, 0], np.zeros(len(bottom))])
rx = solve(k, c, fx)
wx = rx.lam.weights[0].reshape(20, 10)
print("mass on x<0 vs x>0:", wx[:10].sum(), wx[10:].sum())
