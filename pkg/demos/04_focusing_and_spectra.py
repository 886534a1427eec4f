# coding: utf-8

# # Spatial focusing and eigenvalue spread
#
# Matching the array to one point concentrates energy there. With more
# antennas the neighbourhood of that point usually gets darker, although a
# single scatterer draw can buck the trend, so several draws are shown.

# In[1]:

import numpy as np

from vlmimo import channel as ch
from vlmimo.harness.experiments import focusing_grid, ordered_eigenvalues
from vlmimo.numerics import NeumannConfig, crandn, neumann_inverse

rng = np.random.default_rng(7)
pts = focusing_grid(10.0, 0.25)
for draw in range(5):
    cover = [np.mean(ch.normalized_field_strength(ch.ScattererField.draw(M, rng), pts) <= -5)
             for M in (10, 100)]
    print(f"draw {draw}: fraction of the 10x10 wavelength square at <= -5 dB, "
          f"M=10 {cover[0]:.2f}, M=100 {cover[1]:.2f}")


# ## Eigenvalues of G^H G
#
# A tall channel has eigenvalues packed near M; a square one spreads them
# over decades, which is what hurts linear detection and precoding.

# In[2]:

for K, M in ((6, 128), (6, 6)):
    lam = ordered_eigenvalues(K, M, 300, rng)
    spread = np.median(10 * np.log10(lam[:, 0] / lam[:, -1]))
    print(f"{K}x{M}: median largest/smallest ratio {spread:.1f} dB")


# ## Approximate inversion
#
# Because the spectrum of G^H G / M is confined near one for tall channels,
# a few Neumann terms already invert it well.

# In[3]:

K, M = 50, 400
G = crandn(rng, M, K)
Z = G.conj().T @ G
exact = np.linalg.inv(Z)
for L in (1, 2, 4, 8):
    approx = neumann_inverse(Z, NeumannConfig(terms=L, delta=1.0), M, K)
    print(f"L={L}: relative error {np.linalg.norm(approx - exact) / np.linalg.norm(exact):.3%}")
