# %% [markdown]
# # How far does a key-less attacker get?
# Counting orderings first, then a greedy reassembly that minimizes gradient
# energy window by window.

# %%
import math

from visualmixer.attack import attack_sweep, format_sweep, search_space_from_sizes
from visualmixer.corpus import corpus_dir

for side in (2, 3, 4, 6, 8):
    est = search_space_from_sizes([side * side])
    print(f"one {side}x{side} window: log2 orderings = {est.log2_sum:8.2f}  over 128 bits: {est.exceeds_threshold}")
print("log2(36!) =", math.log2(math.factorial(36)))

# %% Attack on the bundled 24x24 grayscale corpus (about a minute).
print("\n".join(format_sweep(attack_sweep(corpus_dir("attack"), (2, 3)))))
