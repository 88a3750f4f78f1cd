"""Variational decomposition: shared ansatz states mixed into components.

A family provides M+1 states U_j with U_0 pinned to the initial state.  A
trainable mixing matrix A turns them into N components

    Phi_i = sum_j (A_ij - colmean_j A + delta_{j0}/N) U_j,

so sum_i Phi_i == U_0 holds exactly for any A: the centered matrix sums to
zero down each column and the delta term contributes U_0 once.  Components
are unnormalized; their norms c_i = |Phi_i| are the spectral amplitudes.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn


class MixingMatrix(nn.Module):
    """Trainable (N, M+1) matrix behind the sum-preserving construction."""

    def __init__(self, n_components: int, n_states: int, seed: int = 0):
        super().__init__()
        if n_components < 1 or n_states < 1:
            raise ValueError("need at least one component and one state")
        self.n_components = n_components
        self.n_states = n_states
        gen = torch.Generator().manual_seed(seed)
        scale = 1.0 / (n_components * math.sqrt(n_states))
        raw = (torch.rand(n_components, n_states, generator=gen, dtype=torch.float64) * 2 - 1) * scale
        self.raw = nn.Parameter(raw)
        anchor = torch.zeros(1, n_states, dtype=torch.float64)
        anchor[0, 0] = 1.0 / n_components
        self.register_buffer("anchor", anchor)

    def coefficients(self) -> torch.Tensor:
        """Effective mix B with sum_i B[i, j] == (j == 0)."""
        return self.raw - self.raw.mean(dim=0, keepdim=True) + self.anchor


def mix_components(coeff: torch.Tensor, states: torch.Tensor) -> torch.Tensor:
    """Components (N, dim) from coefficients (N, M+1) and states (M+1, dim)."""
    return coeff @ states


class DenseFamily(nn.Module):
    """Full-basis ansatz: one trainable vector per state, unit-normalized.

    State 0 is the initial state and never trains.  Trainable rows start as
    isotropic Gaussian vectors so the family spans a generic subspace from
    the first iteration.
    """

    def __init__(self, psi0: np.ndarray, n_trainable: int, seed: int = 0):
        super().__init__()
        psi0 = np.asarray(psi0, dtype=np.float64)
        norm = np.linalg.norm(psi0)
        if not np.isclose(norm, 1.0, atol=1e-12):
            raise ValueError("initial state must be unit norm")
        if n_trainable < 0:
            raise ValueError("negative state count")
        self.dim = len(psi0)
        self.n_states = n_trainable + 1
        self.register_buffer("psi0", torch.from_numpy(psi0))
        gen = torch.Generator().manual_seed(seed)
        raw = torch.randn(n_trainable, self.dim, generator=gen, dtype=torch.float64)
        raw /= math.sqrt(self.dim)
        self.raw = nn.Parameter(raw)

    def states(self) -> torch.Tensor:
        """(M+1, dim) stack; rows carry unit norm."""
        if self.raw.shape[0] == 0:
            return self.psi0[None, :]
        rows = self.raw / self.raw.norm(dim=1, keepdim=True)
        return torch.cat([self.psi0[None, :], rows], dim=0)


def gram_spectrum(states: torch.Tensor) -> np.ndarray:
    """Eigenvalues of the state overlap matrix, ascending.

    A vanishing eigenvalue means the family has collapsed onto a smaller
    subspace and the mixing matrix has flat directions.
    """
    with torch.no_grad():
        gram = states @ states.T
    return np.linalg.eigvalsh(gram.numpy())


def component_norms(components: torch.Tensor) -> torch.Tensor:
    """Amplitudes c_i = |Phi_i| of unnormalized components (N, dim)."""
    return components.norm(dim=1)
