"""
Choosing gains for a noisy V2V link
===================================

A follower feeds its predecessor's acceleration forward with gain ``k_a``,
but the received value is scaled by a random factor ``w`` within
``1 +/- 1/rho``. That uncertainty sets a floor on the time headway. This
script computes the floor, finds the ``k_a`` that minimises it, and draws the
feasible ``(k_p, k_v)`` region for a headway just above it.
"""

# %%
# Setup
# -----
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from noisy_platoon import feasible_region, headway_lower_bound, ka_upper_bound, optimal_ka_headway

out = Path(os.environ.get("NOISY_PLATOON_OUT", "out")) / "demos"
out.mkdir(parents=True, exist_ok=True)
rho, tau0 = 5.0, 0.5

# %%
# The headway floor as a function of k_a
# --------------------------------------
# Above ``1 / (1 + 1/rho)`` no headway works at all. In between the floor is
# unimodal, with a closed-form minimiser.
kmax = ka_upper_bound(rho)
k_star, h_star = optimal_ka_headway(rho, tau0)
ks = np.linspace(0.01, 0.97 * kmax, 300)
print(f"k_a,max = {kmax:.4f}   k_a* = {k_star:.4f}   h* = {h_star:.4f} s")
print(f"floor at k_a = 0.5: {headway_lower_bound(0.5, rho, tau0):.4f} s")

fig, ax = plt.subplots(figsize=(6, 3.5))
for r in (2.0, 5.0, 20.0, np.inf):
    kk = ks[ks < 0.97 * ka_upper_bound(r)]
    ax.plot(kk, [headway_lower_bound(k, r, tau0) for k in kk], label=f"rho={r:g}")
ax.plot(k_star, h_star, "k*")
ax.set_xlabel("$k_a$")
ax.set_ylabel("$h_{w,lb}$ (s)")
ax.set_ylim(0, 4)
ax.legend()
fig.tight_layout()
fig.savefig(out / "headway_floor.png", dpi=120)

# %%
# The feasible region
# -------------------
# Pick a headway 2% above the floor. The admissible ``(k_p, k_v)`` pairs form
# a thin wedge just below the ``k_v`` axis intercept.
hw = 1.02 * h_star
region = feasible_region(k_star, rho, tau0, hw)
poly = region.polygon()
kp_c, kv_c = region.centroid()
print(f"h_w = {hw:.4f} s, region corners:\n{poly}")
print(f"centroid k_p = {kp_c:.5f}, k_v = {kv_c:.4f}")

fig, ax = plt.subplots(figsize=(5, 4))
ax.fill(poly[:, 0], poly[:, 1], alpha=0.4)
ax.plot(kp_c, kv_c, "k*")
ax.set_xlabel("$k_p$")
ax.set_ylabel("$k_v$")
fig.tight_layout()
fig.savefig(out / "feasible_region.png", dpi=120)
