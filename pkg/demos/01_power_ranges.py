# %% [markdown]
# # Admissible powers and Strichartz pairs
#
# Every range is exact rational arithmetic: endpoints such as 5/3 are
# `Fraction`s, and membership at an endpoint is decided without rounding.

# %%
from fractions import Fraction

from snls.exponents import SCOPES, power_range, proof_pair, theta_gap

# %% [markdown]
# The local H^2 range opens a gap for d = 5, 6, 7 and keeps only the low
# branch from d = 8 on.

# %%
for d in range(1, 11):
    print(f"d={d:2d}  local-H2: {power_range(d, 'local-H2')}")

# %% [markdown]
# Global ranges depend on the sign of the nonlinearity.

# %%
for d in (1, 2, 3):
    for lam in (1, -1):
        print(f"d={d} lam={lam:+d}  global-H1: {str(power_range(d, 'global-H1', lam=lam)):12s}"
              f"  global-H2: {power_range(d, 'global-H2', lam=lam)}")

# %% [markdown]
# Membership right at the edges of the gap in d = 5.

# %%
rng = power_range(5, "local-H2")
for a in (Fraction(5, 3) - Fraction(1, 10**9), Fraction(5, 3), Fraction(19, 10), Fraction(2), Fraction(5)):
    print(f"alpha={str(a):>12s}  in range: {a in rng}")

# %% [markdown]
# The pair used in the first fixed-point step, with its admissibility
# certificate and the Hoelder gap theta = 1 - 2/q.

# %%
for d, alpha in ((1, 3), (2, 3), (3, Fraction(5, 2))):
    pair = proof_pair(d, alpha, "step1")
    print(f"d={d} alpha={alpha}: (p, q) = {pair}, theta = {theta_gap(pair.q)}")
    print("   ", pair.certificate)

# %%
print("scopes:", ", ".join(SCOPES))
