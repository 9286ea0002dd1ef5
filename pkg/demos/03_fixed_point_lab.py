# %% [markdown]
# # The fixed-point step at desk scale
#
# Empirical Strichartz constant, the stopping rule for the ball, the
# measured contraction factor and plain Picard iteration, on the short
# `picard-desk` scenario.

# %%
import numpy as np
from fractions import Fraction

from snls.picard import ball_and_stopping_time, picard_lab, stopping_process
from snls.scenarios import scenario

# %%
rep = picard_lab(scenario("picard-desk"), samples=16, iterations=6, contraction_pairs=8)
for key in ("pair", "theta", "x_h2", "C_hat", "tau1", "M1", "kappa_hat", "geometric_ratio", "solver_match_linf_l2"):
    print(f"{key:22s} {rep[key]}")

# %% [markdown]
# Successive Picard increments in the L^q L^p metric shrink geometrically.

# %%
inc = np.array(rep["picard_increments"])
print(np.array2string(inc, precision=3))
print("ratios:", np.array2string(inc[1:] / inc[:-1], formatter={"float_kind": "{:.2e}".format}))

# %% [markdown]
# The stopping process for a constant C: a larger data norm stops earlier.

# %%
t = np.linspace(0, 0.05, 501)
for h in (0.5, 1.0, 2.0):
    ball = ball_and_stopping_time(h, 3, t, np.ones_like(t), Fraction(5, 6))
    print(f"||x||_H2={h}: tau1={ball.tau:.4f}  M1={ball.radius:.2f}  Z(0.01)={stopping_process(0.01, 1.0, h, 3, Fraction(5, 6)):.3f}")
