"""
Diagnostics: refinement, blow-up onset and the wrong velocity
=============================================================

Convergence orders are reported, not asserted.  The blow-up indicator
fires once a single cell holds a fraction K of the mass.
"""

# %%
import numpy as np

from aggrekin.diagnostics import blowup_indicator, refinement_study
from aggrekin.macro import run_macro
from aggrekin.models import preset

p = preset("vpfp_one_bump")
table = refinement_study(p.initial, p.domain, p.law, p.potential, [100, 200, 400, 800], horizon=0.5)
for row in table.rows:
    print(f"nx = {row.nx:4d}  W1 error vs next grid = {row.error:.3e}")
print(f"fitted order: {table.order:.2f}")

# %%
# Blow-up onset under one refinement.
for nx in (400, 800):
    grid = p.grid(nx)
    rho0 = p.initial_density(grid)
    tr = run_macro(rho0, grid, p.law, p.potential, 4.0, on_step=lambda s, g: (s.t, s.rho.max()))
    t, peaks = np.array(tr.reports).T
    print(f"nx = {nx}  onset (K = 0.1): {blowup_indicator(t, peaks, grid.dx, 0.1, grid.dx * rho0.sum()):.3f}")

# %%
# The naive face velocity a(d_x S) gives a visibly different evolution.
p = preset("chemo_two_bumps")
grid = p.grid(400)
rho0 = p.initial_density(grid)
finals = {m: run_macro(rho0, grid, p.law, p.potential, p.horizon, mode=m).final.rho
          for m in ("volpert_literal", "naive")}
gap = np.abs(finals["naive"] - finals["volpert_literal"]).max()
print(f"naive vs chain-rule velocity: gap / max rho = {gap / finals['volpert_literal'].max():.3f}")
