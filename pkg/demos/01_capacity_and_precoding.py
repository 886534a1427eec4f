# coding: utf-8

# # Capacity and linear precoding with many antennas
#
# A base station with M antennas serves K single-antenna terminals. As M
# grows past K the channel columns become nearly orthogonal, so simple
# linear precoders approach the sum capacity.

# In[1]:

import numpy as np

from vlmimo import capacity as cap
from vlmimo import precoding as pre
from vlmimo.numerics import crandn

rng = np.random.default_rng(1)
K = 15


# ## Column orthogonality
#
# The normalised Gram matrix G^H G / M tends to the identity. Its largest
# off-diagonal entry shrinks like 1/sqrt(M).

# In[2]:

for M in (15, 60, 240, 960):
    G = crandn(rng, M, K)
    Z = G.conj().T @ G / M
    off = np.abs(Z - np.diag(np.diag(Z))).max()
    print(f"M={M:4d}  max |off-diagonal| = {off:.3f}")


# ## Forward sum capacity against linear precoders
#
# The forward sum capacity is a concave maximisation over the power split;
# ZF and MF sum rates come from the closed forms for large arrays.

# In[3]:

for M in (15, 40, 100):
    G = crandn(rng, M, K)
    alpha = M / K
    print(f"M={M}")
    for rho_db in (-10, 0, 10, 20):
        rho = 10 ** (rho_db / 10)
        dpc, alloc = cap.forward_sum_capacity(G, rho)
        zf = K * np.log2(1 + cap.table1_sinr("ZF", alpha, rho)) if alpha > 1 else 0.0
        mf = K * np.log2(1 + cap.table1_sinr("MF", alpha, rho))
        print(f"  rho={rho_db:4d} dB  sum capacity {dpc:6.1f}  ZF {zf:6.1f}  MF {mf:6.1f}"
              f"  (KKT residual {cap.kkt_residual(G, rho, alloc.gamma):.1e})")


# ## Monte-Carlo SINR against the closed forms
#
# Each trial draws a channel, precodes QPSK symbols and splits the received
# power into the wanted coefficient and everything else.

# In[4]:

for tech in ("ZF", "MF"):
    for alpha in (2, 4):
        s = pre.measure_forward_sinr(tech, alpha * K, K, 10.0, trials=500, rng=rng)
        closed = 10 * np.log10(cap.table1_sinr(tech, alpha, 10.0))
        print(f"{tech} alpha={alpha}: measured {s.power_ratio_db:5.2f} dB, closed form {closed:5.2f} dB")
