# ---
# jupyter:
#   jupytext:
#     formats: py:light
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Capacity of a discretized sphere
#
# The Newtonian capacity of the unit sphere in R^3 is 1.  On a finite node
# set the answer depends on the diagonal of the Gram matrix; here it is the
# default effective radius (half the minimum node spacing).

import numpy as np
from gaussvp import Kernel, scalar_equilibrium
from gaussvp.geometry import balanced_sphere, fibonacci_sphere, newtonian_row_sums

# The Fibonacci lattice is nearly uniform but its row sums differ a little,
# which makes the equilibrium weights non-uniform.

x0 = fibonacci_sphere(200)
r0 = scalar_equilibrium(Kernel.newtonian(3).bind(x0), x0)
print("fibonacci: relative weight spread", np.ptp(r0.theta) / r0.theta.mean())

# Balancing the row sums fixes that.

x = balanced_sphere(200)
s = newtonian_row_sums(x)
print("balanced row-sum spread", np.ptp(s) / s.mean())
r = scalar_equilibrium(Kernel.newtonian(3).bind(x), x)
print("balanced: relative weight spread", np.ptp(r.theta) / r.theta.mean())

# Capacity under refinement.

for n in (100, 200, 400, 800):
    x = balanced_sphere(n)
    r = scalar_equilibrium(Kernel.newtonian(3).bind(x), x)
    print(f"n={n:4d}  C={r.capacity:.6f}  min potential={r.min_potential:.12f}  invariants={r.invariants_ok}")
