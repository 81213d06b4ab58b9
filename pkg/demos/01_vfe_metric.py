# %% [markdown]
# # Visual Feature Entropy on a real image
# VFE sums squared neighbour differences inside each window. Shuffling pixels
# inside windows breaks local smoothness, so VFE goes up.

# %%
from visualmixer.corpus import corpus_dir
from visualmixer.imagecore import load_image
from visualmixer.mixer import MixKey, uniform_shuffle
from visualmixer.vfe import multichannel_vfe, vfe_report

img = load_image(sorted(corpus_dir("natural").glob("*.png"))[0])
print("shape", img.shape)

# %%
for ws in (2, 4, 8, 32):
    print(f"ws={ws:2d}  vfe={multichannel_vfe(img, ws):10.2f}")

# %% Shuffle on a fixed 4x4 grid and measure again.
shuffled, _ = uniform_shuffle(img, 4, MixKey(1, "demo"))
print("before", multichannel_vfe(img, 32), "after", multichannel_vfe(shuffled, 32))

# %% The per-region report is line oriented, ready for a CSV reader.
rep = vfe_report(img, 16)
print("\n".join(rep.to_lines()[:6]))
print("median region VFE", rep.median_region_vfe)
