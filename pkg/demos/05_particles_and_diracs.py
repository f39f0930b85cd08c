"""
Dirac masses: grid versus particle dynamics
===========================================

Two grid Diracs of mass 1/2 under the chemotaxis law approach each other
and merge.  The particle ODE follows the jump of A(d_x S) across each
Dirac.  The grid moves mass at half speed, so the oracle runs at speed 1/2.
"""

# %%
import numpy as np

from aggrekin.diagnostics import half_centroids
from aggrekin.grid import Grid1D
from aggrekin.macro import cfl_dt, initial_state, macro_step, sup_velocity_bound
from aggrekin.models import ParticleSystem, particle_evolve, preset
from aggrekin.potential import FieldSolver

p = preset("chemo_two_bumps")
g0 = Grid1D.from_domain(-2.5, 2.5, 1000)
x = g0.x
rho0 = np.zeros(g0.n)
left, right = int(np.argmin(np.abs(x + 0.7))), int(np.argmin(np.abs(x - 0.7)))
rho0[[left, right]] = 0.5 / g0.dx

oracle = particle_evolve(ParticleSystem([0.5, 0.5], [x[left], x[right]], p.law, speed=0.5), 6.0)
print("particle merge (t, x, m):", oracle.merges[0])

# %%
c = sup_velocity_bound(p.law, 1.0, p.potential.w0)
grid = g0.with_dt(cfl_dt(c, g0.dx))
solver = FieldSolver(p.potential, grid)
state = initial_state(rho0, solver)
marks = [1.0, 2.0, 3.0, 4.0, 5.0]
while marks:
    state = macro_step(state, p.law, solver, c)
    if state.t >= marks[0]:
        cl, cr = half_centroids(state.rho, grid)
        pos, _ = oracle.at(state.t)
        print(f"t = {state.t:5.3f}  grid ({cl:+.4f}, {cr:+.4f})  particles {np.round(pos, 4)}")
        marks.pop(0)
