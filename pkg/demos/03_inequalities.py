# %% [markdown]
# # Constant-free inequality ratios
#
# The Gagliardo-Nirenberg ratio ‖∇u‖/(‖Δu‖^{1/2}‖u‖^{1/2}) never exceeds one
# on the lattice (Cauchy-Schwarz in frequency). The interpolation cases have
# unknown constants, so only homogeneity and boundedness are checked.

# %%
import numpy as np

from ibnls.analysis import gn_ratio
from ibnls.runner import gn_corpus, interpolation_corpus

gn = gn_corpus(seed=0, count=100)
print(f"GN ratio over 100 random band-limited fields: min {gn.min():.4f}  max {gn.max():.4f}")

# %%
for case, b in (("n=1", 0.3), ("n=2", 0.3), ("n=3", 0.3), ("n=4", 0.3), ("n=5", 1.0)):
    ratios, scale_err = interpolation_corpus(case, b, seed=0, count=20)
    print(f"{case}: median {np.median(ratios):.3e}  max/median {ratios.max() / np.median(ratios):.2f}  "
          f"scaling error {scale_err:.1e}")
