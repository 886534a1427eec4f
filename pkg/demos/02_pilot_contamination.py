# coding: utf-8

# # Pilot contamination
#
# Every cell reuses the same pilots, so a base station's channel estimate is
# the sum of its own terminals' channels and those of the co-pilot terminals
# elsewhere. The resulting interference does not average out as M grows.

# In[1]:

import numpy as np

from vlmimo import multicell as mc

rng = np.random.default_rng(3)
layout, drop, profile = mc.build_layout_and_drop(rng)
print("cells:", layout.n_cells, " terminals per cell:", drop.K)


# ## Limiting SIRs
#
# With infinitely many antennas the SIR depends only on the large-scale
# coefficients. ZF pays for nulling with a smaller limit than MF.

# In[2]:

for kind in ("MF", "ZF"):
    sir = mc.asymptotic_sir_all(kind, profile)
    print(f"{kind}: median SIR {10 * np.log10(np.median(sir)):5.1f} dB, "
          f"mean log2(1+SIR) {np.mean(np.log2(1 + sir)):.2f} bits")


# ## Finite arrays
#
# Explicit precoding through contaminated estimates. The SIR keeps climbing
# with M toward the limits above.

# In[3]:

res = mc.finite_m_sir_monte_carlo([20, 100, 400], rng, drops=4)
for M in res.M_list:
    row = "  ".join(f"{t} {np.median(10 * np.log10(res.samples(M, t))):6.1f} dB"
                    for t in res.techniques)
    print(f"M={M:4d}  median SIR  {row}")


# ## Empirical CDF
#
# The CDF pairs are what the multicell experiment writes to disk.

# In[4]:

x, p = mc.sir_cdf(res.asymptotic["MF"])
for q in (0.05, 0.5, 0.95):
    print(f"MF limit, {q:.0%} quantile: {x[np.searchsorted(p, q)]:.1f} dB")
