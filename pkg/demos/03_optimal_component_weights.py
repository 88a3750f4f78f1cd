"""What the loss is actually minimizing: the closed-form optimal split.

For a fixed target grid the quadratic objective has an exact minimizer:
eigenstate k contributes to component i in proportion to 1/(E_k - Lambda_i)^2.
No network involved here — this is the ceiling any trained model chases, and
it shows the energy spread of the components shrinking like 1/N.
"""

import numpy as np

from specquench import build_lambda_grid, component_moments, ideal_sigma, ideal_split

rng = np.random.default_rng(7)

# a toy dense spectrum with a random normalized overlap vector
energies = np.sort(rng.uniform(-4.0, 4.0, 400))
amps = rng.normal(size=400)
amps /= np.linalg.norm(amps)

print("optimal split for N = 4 components:")
lambdas = build_lambda_grid(energies[0], energies[-1], 4).lambdas
g = ideal_split(energies, amps, lambdas)
c2, lam, sig2 = component_moments(g, energies)
for i in range(4):
    print(
        f"  target {lambdas[i]:+6.3f}   weight {c2[i]:.4f}   "
        f"mean energy {lam[i]:+6.3f}   spread {np.sqrt(sig2[i]):.4f}"
    )
# components share eigenstates, so they are not orthogonal and the
# weights need not sum to 1 -- the split conserves amplitudes, not weight
print(f"  total weight {c2.sum():.4f} (< 1: components overlap)")
recon = g.sum(axis=0)
print(f"  max |sum_i g_ik - b_k| = {np.abs(recon - amps).max():.2e}")

print("\nspread vs component count (expect roughly 1/N):")
prev = None
for n in (2, 4, 8, 16, 32, 64):
    lam_n = build_lambda_grid(energies[0], energies[-1], n).lambdas
    s = ideal_sigma(energies, amps, lam_n)
    note = "" if prev is None else f"   ratio {s / prev:.3f}"
    print(f"  N = {n:3d}   sigma = {s:.5f}{note}")
    prev = s
