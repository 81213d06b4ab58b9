# %% [markdown]
# # Whole-dataset pipeline through the command line
# calibrate -> obfuscate -> invert, all through the same entry point.

# %%
import shutil
import tempfile
from pathlib import Path

from visualmixer.cli import dispatch
from visualmixer.corpus import corpus_dir
from visualmixer.imagecore import load_image

work = Path(tempfile.mkdtemp())
src = work / "in"
src.mkdir()
for p in sorted(corpus_dir("natural").glob("*.png"))[:10]:
    shutil.copy(p, src / p.name)

# %%
dispatch(["calibrate", "--d", "4", "--alpha", "0.01", "--target-vfe", "4", "--n", "200000"])

# %%
dispatch(["obfuscate", "--in", str(src), "--out", str(work / "out"), "--seed", "7",
          "--ws-lower", "2", "--ws-upper", "8", "--plans", str(work / "plans")])
print((work / "out" / "visualmixer.key").read_text().splitlines()[0:5])

# %%
dispatch(["invert", "--in", str(work / "out"), "--plan", str(work / "plans"), "--out", str(work / "back")])
same = all(load_image(p) == load_image(work / "back" / p.name) for p in src.glob("*.png"))
print("all restored:", same)
shutil.rmtree(work)
