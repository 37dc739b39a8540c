# %% [markdown]
# # Negative energy data and the start of a collapse
#
# The amplitude of a unit Gaussian is tuned so E[u0] = -0.5. The energy is
# λ²Q - λ^{q+2}P, so the root past its maximum is bracketed by doubling and
# solved with brentq. A short adaptive run shows ‖Δu‖ growing and dt
# shrinking; configs/blowup.toml follows it all the way to the dt floor.

# %%
import numpy as np

from ibnls import EvolveConfig, GridSpec, ModelParams, build_grid, evolve
from ibnls.dynamics import energy
from ibnls.runner import amplitude_for_energy

grid = build_grid(GridSpec(1, 1024, 20.0))
params = ModelParams(1, 0.3, nu=1.0).with_(epsilon=grid.h / 2)
shape = grid.field(np.exp(-grid.r ** 2 / 2))
lam, e0 = amplitude_for_energy(shape, params, 0.5)
print(f"amplitude = {lam:.10f}, E0 = {e0:.12f}")

# %%
u0 = grid.field(lam * shape.values)
run = evolve(u0, params, EvolveConfig(dt0=1e-5, t_end=0.06, adaptive=True, cfl=2.5e-5, cadence=5000))
for t, dt, lap, e in zip(run.t, run.dt, run.lap_norm, run.energy):
    print(f"t={t:.5f}  dt={dt:.2e}  ‖Δu‖/‖Δu0‖={lap / run.lap_norm[0]:.3f}  E={e:+.6f}")
print("halt:", run.halt_reason, " final energy:", energy(run.final_state.u, params))
