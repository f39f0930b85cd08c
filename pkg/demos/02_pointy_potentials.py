"""
Pointy potentials and the interaction field
===========================================

The potential S solves -S'' + nu = rho with a nonlocal source nu.  For
W(x) = exp(-|x|)/2 the source is S itself, which gives a screened
Poisson problem solved by a banded linear solve.
"""

# %%
import numpy as np

from aggrekin.grid import Grid1D
from aggrekin.potential import FieldSolver, PointyPotential

grid = Grid1D.from_domain(-2.5, 2.5, 400)
rho = np.zeros(grid.n)
rho[200] = 1.0 / grid.dx     # unit Dirac at x = 0

# %%
# Zero regular part: the field of a Dirac is a pure jump of size -1.
fld = FieldSolver(PointyPotential.zero(), grid)(rho)
print("zero potential, slopes left/right of the Dirac:", fld.half[200], fld.half[201])

# %%
# Screened case: S decays like exp(-|x|)/2 away from the mass.
fld = FieldSolver(PointyPotential.exp_half(), grid)(rho)
for xi in (0.5, 1.0, 1.5):
    i = int(np.argmin(np.abs(grid.x - xi)))
    print(f"x = {grid.x[i]:.3f}  S = {fld.S[i]:.5f}  exp(-|x|)/2 = {0.5 * np.exp(-abs(grid.x[i])):.5f}")

# %%
# Slopes always stay within the mass times (1 + w0), here 1 * (1 + 1).
print("max |d_x S| =", np.abs(fld.half).max())
