# %% [markdown]
# # Choosing window sizes
# The lower bound comes from the normal approximation of shuffled VFE; the
# upper bound from how often a 2x2 kernel's output moves by more than d.

# %%
from visualmixer.calibration import (
    calibrate, enumerate_induction_table, estimate_alpha0, format_table, lower_bound_ws,
    upper_bound_ws, vfe_shuffle_distribution,
)

dist = vfe_shuffle_distribution(8, 224, 224)
print("ws=8 on 224x224: mean", dist.mean, "variance", dist.variance)

# %%
for target in (4, 24, 60, 100, 300):
    print(f"target {target:>4}: median ws_l={lower_bound_ws(target, 224, 224)}"
          f"  99% ws_l={lower_bound_ws(target, 224, 224, 0.99)}")

# %% Single-window confidence, then the window growth it allows.
alpha0 = estimate_alpha0(4.0)
for alpha in (alpha0, alpha0**4, 0.01, 1e-4):
    m, ws_u = upper_bound_ws(alpha, alpha0)
    print(f"alpha={alpha:.3g}  m={m:.3f}  ws_u={ws_u}")

# %%
print(calibrate(d=4.0, alpha=0.01, target_vfe=24, width=224, height=224).to_record())

# %% [markdown]
# Enumerating binary 3x3 inputs against the five sorted sign patterns.
# %%
print("\n".join(format_table(enumerate_induction_table())))
