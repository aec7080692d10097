"""
Does the averaged model predict the mean?
=========================================

Each noisy run draws a fresh factor per link per step. The sample mean over
many runs should track the averaged dynamics, with an error that falls like
``1/sqrt(M)``. Runs use independent streams spawned from one seed.
"""

# %%
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from noisy_platoon import ChannelSpec, GainSet, PlatoonConfig, monte_carlo_mean, simulate

out = Path(os.environ.get("NOISY_PLATOON_OUT", "out")) / "demos"
out.mkdir(parents=True, exist_ok=True)
platoon = PlatoonConfig(n_followers=12)
channel = ChannelSpec(5.0)
gains = GainSet(0.5, 0.63, 0.009, 0.95)
averaged = simulate(platoon, gains, channel, "averaged")

# %%
# Error against ensemble size
# ---------------------------
# A few hundred runs take a minute or two; keep M small here.
sizes = (25, 100)
results = {m: monte_carlo_mean(platoon, gains, channel, m, seed=2023) for m in sizes}
for m, mc in results.items():
    a = mc.agreement(averaged)
    print(f"M={m:4d}: rms error {a.rms_error:.2e} m, inside 2-sigma band {100 * a.coverage:.1f}%")
print("error ratio", results[25].agreement(averaged).rms_error / results[100].agreement(averaged).rms_error,
      "(expect about 2)")

# %%
# The band for follower 6
# -----------------------
# The band is millimetres wide, so plot the deviation from the averaged
# model rather than the trajectories themselves.
mc = results[100]
i = 5
hw = mc.halfwidth["delta"][:, i]
fig, ax = plt.subplots(figsize=(6, 3.5))
ax.fill_between(mc.mean.t, -hw, hw, alpha=0.3, label="+/- 2 sigma/sqrt(M)")
ax.plot(mc.mean.t, mc.mean_delta[:, i] - averaged.delta[:, i], "k", lw=0.8, label="MC mean - averaged")
ax.set_xlabel("t (s)")
ax.set_ylabel(r"$\delta_6$ error (m)")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(out / "monte_carlo_band.png", dpi=120)
