# coding: utf-8

# # Uplink detection when M is close to K
#
# Linear MMSE is close to optimal when M is much larger than K. With a
# square system it is not, and iterative or search-based detectors close
# most of the gap to maximum likelihood.

# In[1]:

import numpy as np

from vlmimo import detection as det
from vlmimo.numerics import crandn

rng = np.random.default_rng(5)
M = K = 8
rho = 10 ** 1.2
G = crandn(rng, M, K)
q = det.qpsk_map(rng.integers(0, 2, 2 * K))
x = np.sqrt(rho / K) * G @ q + crandn(rng, M)


# ## One received vector, every detector
#
# The metric is the squared distance to the received vector. The ML oracle
# scores all 4^8 candidates and so can never be beaten.

# In[2]:

runs = {
    "MMSE": det.detect_linear_mmse(G, x, rho),
    "MMSE-SIC": det.detect_mmse_sic(G, x, rho),
    "BI-GDFE": det.detect_bigdfe(G, x, rho),
    "LAS": det.detect_random_step(G, x, rho, "LAS"),
    "TS": det.detect_random_step(G, x, rho, "TS"),
    "FCSD": det.detect_fcsd(G, x, rho, r=4),
    "ML": det.detect_ml_oracle(G, x, rho),
}
for name, res in runs.items():
    print(f"{name:9s} metric {res.metric:7.2f}  symbol errors {np.sum(res.q_hat != q)}"
          f"  est. flops {res.flops:.2e}")


# ## Bit error rates
#
# A short run; the experiment driver uses a 500-error stop rule. The
# interference-free genie gives each terminal its whole channel norm.

# In[3]:

pts = det.ber_experiment(M, K, [4.0, 8.0, 12.0], ["MMSE", "MMSE-SIC", "TS"], rng,
                         target_errors=100, max_vectors=1500, batch=50)
for p in pts:
    lo, hi = p.ci()
    print(f"{p.technique:9s} rho={p.rho_db:4.1f} dB  BER {p.ber:.2e}  [{lo:.1e}, {hi:.1e}]")
