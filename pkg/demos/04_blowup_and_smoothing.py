# %% [markdown]
# # Blow-up monitor and local smoothing norms
#
# A mass-supercritical focusing run (alpha = 7 in d = 1) against the
# defocusing desk run.  A crossing of the H^2 threshold is evidence of
# blow-up, never a proof.

# %%
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from pathlib import Path

from snls.dyadic import SpaceTimeField, resolvable_bands, xk_norm, littlewood_paley_project, xtilde_norm
from snls.runner import run
from snls.scenarios import scenario

out = Path(__file__).resolve().parent / "out" if "__file__" in globals() else Path("out")
out.mkdir(exist_ok=True)

# %%
sup = run(scenario("supercritical-focusing"))
calm = run(scenario("desk-defocusing"))
for name, rec in (("supercritical", sup), ("defocusing", calm)):
    print(f"{name:14s} warnings={rec.config.warnings[:1]}  suspected blow-up at {rec.metadata['blowup_suspected_at']}")

# %%
fig, ax = plt.subplots(figsize=(5, 3.2))
ax.semilogy(sup.series["t"], sup.series["h2"] / sup.series["h2"][0], label="alpha=7, focusing")
ax.semilogy(calm.series["t"], calm.series["h2"] / calm.series["h2"][0], label="alpha=3, defocusing")
ax.axhline(sup.config.blowup_factor, color="k", lw=0.8, ls="--")
ax.set_xlabel("t")
ax.set_ylabel("||X(t)||_H2 / ||x||_H2")
ax.legend()
fig.tight_layout()
fig.savefig(out / "blowup_monitor.png", dpi=120)

# %% [markdown]
# Local smoothing norms of the stored defocusing trajectory, per band.

# %%
traj = calm.trajectories["direct"][::50]
times = calm.times[::50]
u = SpaceTimeField(calm.grid, times, traj)
for k in resolvable_bands(calm.grid):
    print(f"band {k:+d}: 2^k ||S_k u||^2 = {2.0**k * xk_norm(littlewood_paley_project(u, k), k) ** 2:.4e}")
print("X~ norm:", xtilde_norm(u))
