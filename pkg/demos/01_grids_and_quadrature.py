"""
Grids, velocity quadrature and the W1 distance
==============================================

Spatial nodes, the trapezoid rule on the velocity set and the
cumulative-mass form of the one-dimensional Wasserstein distance.
"""

# %%
# A spatial grid stores cell averages at the left node of each cell.
import numpy as np

from aggrekin.grid import Grid1D, VelocityGrid, cumulative_mass, trapezoid, wasserstein1

grid = Grid1D.from_domain(-2.5, 2.5, 10)
print("nodes:", grid.x)
print("dx =", grid.dx)

# %%
# The trapezoid rule integrates v^2 over [-1, 1]; the error decays like dv^2.
for nv in (4, 8, 16, 32):
    vg = VelocityGrid(1.0, nv)
    approx = trapezoid(vg.v ** 2, vg)
    print(f"N_v = {nv:3d}  I(v^2) = {approx:.6f}  error = {approx - 2 / 3:.2e}")

# %%
# The two-speed set {-1, +1} uses unit weights.
two = VelocityGrid.two(1.0)
print("two-speed weights:", two.weights)

# %%
# W1 between two unit masses is the L1 distance of their cumulative masses.
grid = Grid1D.from_domain(-1, 1, 200)
a = np.where(np.abs(grid.x + 0.5) < 0.1, 1.0, 0.0)
b = np.where(np.abs(grid.x - 0.3) < 0.1, 1.0, 0.0)
a /= grid.dx * a.sum()
b /= grid.dx * b.sum()
print("total mass:", cumulative_mass(a, grid)[-1])
print("W1 (expected about 0.8):", wasserstein1(a, b, grid))
