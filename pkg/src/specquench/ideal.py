"""Closed-form optimum of the window loss in the unrestricted limit.

When the variational family can reach every state in the sector, the loss
decouples over energy levels.  Writing the components in the eigenbasis,
Phi_i = sum_k g[i, k] |E_k>, the loss is sum_ik g[i, k]^2 (E_k - L_i)^2
subject to the linear constraint sum_i g[i, k] = b_k (b_k the eigenbasis
amplitudes of the initial state, real and possibly signed).  The stationary
point splits each amplitude in proportion to inverse squared distance:

    g[i, k] = b_k * (E_k - L_i)^{-2} / sum_j (E_k - L_j)^{-2},

which ties out with the constraint.  An exact resonance E_k == L_i sends
the whole amplitude to component i (the continuous limit of the formula).
"""

from __future__ import annotations

import numpy as np


def ideal_split(energies: np.ndarray, amplitudes: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    """Optimal eigenbasis amplitudes g[i, k] of component i at level k.

    ``energies`` are the eigenvalues E_k, ``amplitudes`` the (signed, real)
    overlaps b_k of the initial state, ``lambdas`` the distinct target
    energies L_i.
    """
    energies = np.asarray(energies, dtype=np.float64)
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if energies.shape != amplitudes.shape:
        raise ValueError("energies and amplitudes must align")
    if len(np.unique(lambdas)) != len(lambdas):
        raise ValueError("target energies must be distinct")

    d2 = (energies[None, :] - lambdas[:, None]) ** 2  # (N, K)
    g = np.zeros_like(d2)
    resonant = d2 == 0.0
    hit = resonant.any(axis=0)
    if np.any(hit):
        # Distinct lambdas: at most one component can resonate per level.
        g[:, hit] = np.where(resonant[:, hit], amplitudes[hit], 0.0)
    free = ~hit
    if np.any(free):
        inv = 1.0 / d2[:, free]
        g[:, free] = amplitudes[free] * inv / inv.sum(axis=0, keepdims=True)
    return g


def split_objective(g: np.ndarray, energies: np.ndarray, lambdas: np.ndarray) -> float:
    """Unscaled loss of a feasible split: sum_ik g[i,k]^2 (E_k - L_i)^2."""
    energies = np.asarray(energies, dtype=np.float64)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    d2 = (energies[None, :] - lambdas[:, None]) ** 2
    return float(np.sum(g**2 * d2))


def component_moments(g: np.ndarray, energies: np.ndarray):
    """Per-component weight, mean energy, and energy variance.

    The weight of component i on level k is g[i, k]^2, so c2_i = sum_k g^2,
    lam_i is the component's Rayleigh quotient and sigma2_i its energy
    variance about lam_i.  Zero-weight components report lam = nan and
    sigma2 = 0; weighted averages skip them.
    """
    energies = np.asarray(energies, dtype=np.float64)
    w = g**2
    c2 = w.sum(axis=1)
    if c2.sum() == 0:
        raise ValueError("split carries no weight")
    lam = np.full(len(c2), np.nan)
    sigma2 = np.zeros(len(c2))
    live = c2 > 0
    lam[live] = (w[live] @ energies) / c2[live]
    sigma2[live] = (w[live] @ energies**2) / c2[live] - lam[live] ** 2
    sigma2 = np.maximum(sigma2, 0.0)
    return c2, lam, sigma2


def weighted_sigma2(c2: np.ndarray, sigma2: np.ndarray) -> float:
    """Weight-averaged energy variance sum_i c2_i sigma2_i / sum_i c2_i."""
    c2 = np.asarray(c2, dtype=np.float64)
    total = c2.sum()
    if total == 0:
        raise ValueError("no weight")
    return float(np.dot(c2, np.asarray(sigma2, dtype=np.float64)) / total)


def ideal_sigma(energies: np.ndarray, amplitudes: np.ndarray, lambdas: np.ndarray) -> float:
    """|sigma| of the closed-form optimum: the floor any ansatz approaches."""
    g = ideal_split(energies, amplitudes, lambdas)
    c2, _, sigma2 = component_moments(g, energies)
    return float(np.sqrt(weighted_sigma2(c2, sigma2)))
