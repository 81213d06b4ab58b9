# %% [markdown]
# # ST-Adam next to Adam
# Dropping the bias-correction rescale makes early steps larger.

# %%
import numpy as np

from visualmixer.stadam import (
    OptimizerState, StAdamParams, adam_step, oscillation_benchmark, optimize, quadratic,
    quadratic_grad, st_adam_step,
)

p = StAdamParams(eta=1.0)
print("first ST-Adam step", st_adam_step(np.zeros(1), np.ones(1), OptimizerState.zeros(1), p)[0])
print("first Adam step   ", adam_step(np.zeros(1), np.ones(1), OptimizerState.zeros(1), p)[0])

# %%
for name in ("st-adam", "adam"):
    traj = optimize(quadratic, quadratic_grad, (5.0, 5.0), StAdamParams(eta=0.01), 5000, 1e-3, name)
    print(name, "steps", traj.steps, "final loss", traj.losses[-1])

# %% Noisy quadratic: the same heavy-tailed noise sequence for both optimizers.
for amp in (0.0, 2.0):
    print(oscillation_benchmark(seed=42, amplitude=amp).to_text())
