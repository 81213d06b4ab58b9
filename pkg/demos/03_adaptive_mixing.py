# %% [markdown]
# # Adaptive shuffling and its inverse
# Flat regions are shuffled with large windows; busy regions are split first.

# %%
import numpy as np

from visualmixer.imagecore import ImageTensor
from visualmixer.mixer import MixKey, invert_image, mean_ws_used, obfuscate_image

gen = np.random.default_rng(0)
img = np.full((3, 64, 64), 120, dtype=np.uint8)
img[:, :, 32:] = gen.integers(0, 256, size=(3, 64, 32))
t = ImageTensor(img)

# %%
shuffled, plan = obfuscate_image(t, (2, 16), MixKey(2024, "two-halves"))
print("entries", len(plan.entries), "initial ws", plan.initial_ws, "floor", plan.floor_ws)
print("flat half mean ws ", mean_ws_used(plan, lambda r: r.x0 + r.w <= 32))
print("noisy half mean ws", mean_ws_used(plan, lambda r: r.x0 >= 32))

# %% The plan is a text record; with it the shuffle can be undone exactly.
print("\n".join(plan.to_text().splitlines()[:9]))
assert invert_image(shuffled, plan) == t
print("inverse ok")
