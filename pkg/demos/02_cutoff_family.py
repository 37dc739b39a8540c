# %% [markdown]
# # The radial cut-off and its defect functions
#
# chi(s) = 2s on [0,1], then 2s - 2(s-1)^k, a Hermite bridge and zero past
# s = 2. phi_R = R² phi(r/R) has phi_R' = 2r inside |x| <= R, so the defects
# Phi1 and Phi2 vanish there and settle at 16 and 16N/(N+4-b) outside 2R.

# %%
import numpy as np

from ibnls.cutoff import Phi1, Phi2, build_chi, radial_derivative, verify_cutoff_properties

spec = build_chi(k=8, b=1.0, N=5, R=1.0)
print(f"bridge starts at s1 = {spec.s1:.6f}")
for s in (0.5, 1.0, 1.2, spec.s1, 1.9, 2.0, 3.0):
    print(f"s={s:5.3f}  chi={radial_derivative(spec, 1, s):9.6f}  "
          f"Phi1={float(Phi1(spec, s)):9.5f}  Phi2={float(Phi2(spec, s)):9.5f}")

# %% [markdown]
# Scale covariance: the normalized derivative sups do not depend on R.

# %%
report = verify_cutoff_properties(build_chi(8, 0.3), [4, 8, 16, 32])
print("audit:", "PASS" if report.passed else "FAIL")
for R in (4, 8, 16, 32):
    sups = np.asarray(report.entries[f"R={R}.normalized_sup"])
    print(f"  R={R:2d}  sup|d^j phi_R| R^(j-2), j=0..6: " + " ".join(f"{v:9.3f}" for v in sups))
