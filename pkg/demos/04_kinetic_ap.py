"""
Kinetic relaxation model and its small-eps limit
================================================

The two-speed run-and-tumble model is advanced by splitting exact
relaxation and Lax-Friedrichs transport.  The step does not depend on
eps, and as eps -> 0 the density matches the limit scheme.
"""

# %%
from aggrekin.diagnostics import compare_ap
from aggrekin.kinetic import run_kinetic
from aggrekin.models import preset

p = preset("chemo_kinetic_two_speed")
grid = p.grid(400)
rho0 = p.initial_density(grid)

# %%
# Step sizes for very different eps.
for eps in (1.0, 1e-3, 1e-10):
    tr = run_kinetic(rho0, grid, p.vgrid, p.equilibrium, p.potential, eps, horizon=0.0, steps=1)
    print(f"eps = {eps:7.0e}  dt = {tr.grid.dt:.6f}")

# %%
# Gap to the limit scheme after 100 steps.
for row in compare_ap(rho0, grid, p.vgrid, p.equilibrium, p.potential,
                      [0.1, 1e-2, 1e-3, 1e-6, 1e-10], steps=100):
    print(f"eps = {row.eps:7.0e}  max |rho_kin - rho_lim| = {row.gap:.3e}")

# %%
# Lie and Strang splittings at moderate eps.
for splitting in ("lie", "strang"):
    tr = run_kinetic(rho0, grid, p.vgrid, p.equilibrium, p.potential, 1e-2, horizon=1.0,
                     splitting=splitting)
    print(f"{splitting:6s}  max rho at t = 1: {tr.final.rho.max():.4f}")
