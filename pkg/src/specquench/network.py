"""Grouped autoregressive ansatz over hex-coded spin groups.

Sites are packed four to a group (16 outcomes), and each ansatz state is a
real wavefunction that factorizes over groups:

    psi(s) = prod_j x_j(g_j | g_{<j}),   sum_o x_j(o | .)^2 = 1.

A shared stack of causal dilated convolutions embeds the (right-shifted)
group sequence; the per-layer outputs are concatenated and merged by a 1x1
rescaling layer; a per-position, per-state affine head maps the merged
features to 16 outcome values.  Outcomes that cannot reach the target total
magnetization are masked to zero *before* the local normalization, so every
factor stays in the conservation sector and the squared conditionals form a
proper distribution over the surviving outcomes.

State 0 is the initial product state itself (an indicator wavefunction) and
carries no parameters.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .basis import GROUP_BITS, GROUP_SIZE, POPCOUNT16, SectorBasis, SpinOrder, group_batch

_NORM_FLOOR = 1e-150  # keeps fully-masked positions at zero instead of NaN


class CausalConv1d(nn.Conv1d):
    """Conv1d with one-sided zero padding: output j sees inputs <= j.

    ``forward`` computes the same cross-correlation as ``nn.Conv1d`` but
    through a dense contraction: the float64 CPU path of ``torch.conv1d``
    is orders of magnitude slower than BLAS at these tensor sizes.
    """

    def __init__(self, cin: int, cout: int, kernel: int, dilation: int = 1):
        super().__init__(cin, cout, kernel, dilation=dilation)
        self._left = (kernel - 1) * dilation

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        k, d = self.kernel_size[0], self.dilation[0]
        g = x.shape[-1]
        x = F.pad(x, (self._left, 0))
        # taps[b, i*C + c, j] = padded[b, c, j + i*d], the window conv1d sees
        taps = torch.cat([x[:, :, i * d : i * d + g] for i in range(k)], dim=1)
        w = self.weight.permute(2, 1, 0).reshape(k * self.in_channels, self.out_channels)
        return torch.einsum("bcg,co->bog", taps, w) + self.bias[None, :, None]


class AutoregressiveFamily(nn.Module):
    """M trainable autoregressive states plus the pinned initial state."""

    def __init__(
        self,
        l: int,
        n_up: int,
        n_trainable: int,
        psi0_bits: np.ndarray,
        order: SpinOrder | None = None,
        hidden: int = 32,
        kernel: int = 2,
        dilations: tuple[int, ...] = (1, 1, 2),
        seed: int = 0,
    ):
        super().__init__()
        if l % GROUP_BITS != 0:
            raise ValueError(f"chain length {l} not divisible by {GROUP_BITS}")
        if n_trainable < 0:
            raise ValueError("negative state count")
        self.l = l
        self.n_up = n_up
        self.n_groups = l // GROUP_BITS
        self.n_states = n_trainable + 1
        self.hidden = hidden
        self.kernel = kernel
        self.dilations = tuple(dilations)
        self.order = order if order is not None else SpinOrder.identity(l)

        psi0_bits = np.asarray(psi0_bits, dtype=np.uint8)
        if int(psi0_bits.sum()) != n_up:
            raise ValueError("initial configuration outside the sector")
        anchor = group_batch(psi0_bits[None, :], self.order)[0]
        self.register_buffer("anchor_groups", torch.from_numpy(anchor))
        self.register_buffer("out_pop", torch.from_numpy(POPCOUNT16.copy()))

        convs = []
        cin = GROUP_SIZE
        for d in self.dilations:
            convs.append(CausalConv1d(cin, hidden, kernel, dilation=d))
            cin = hidden
        self.embed = nn.ModuleList(convs)
        self.merge = CausalConv1d(hidden * len(convs), hidden, kernel=1)
        # One affine map per (state, position): merged features -> 16 values.
        self.head_weight = nn.Parameter(
            torch.empty(n_trainable, self.n_groups, GROUP_SIZE, hidden, dtype=torch.float64)
        )
        self.head_bias = nn.Parameter(
            torch.empty(n_trainable, self.n_groups, GROUP_SIZE, dtype=torch.float64)
        )
        self.double()
        self._reset_parameters(seed)

    @property
    def n_trainable(self) -> int:
        return self.n_states - 1

    def _reset_parameters(self, seed: int):
        gen = torch.Generator().manual_seed(seed)
        for conv in list(self.embed) + [self.merge]:
            fan_in = conv.in_channels * conv.kernel_size[0]
            bound = 1.0 / math.sqrt(fan_in)
            with torch.no_grad():
                conv.weight.uniform_(-bound, bound, generator=gen)
                conv.bias.uniform_(-bound, bound, generator=gen)
        bound = 1.0 / math.sqrt(self.hidden)
        with torch.no_grad():
            self.head_weight.uniform_(-bound, bound, generator=gen)
            self.head_bias.uniform_(-bound, bound, generator=gen)

    def outcome_mask(self, groups: torch.Tensor) -> torch.Tensor:
        """(B, G, 16) feasibility of each outcome given the realized prefix.

        Outcome o at position j is feasible iff the up spins still needed
        after taking it fit in the remaining 4*(G-1-j) sites.
        """
        pop = self.out_pop[groups]  # (B, G)
        prefix = F.pad(torch.cumsum(pop, dim=1), (1, 0))[:, :-1]  # (B, G)
        need = self.n_up - prefix[:, :, None] - self.out_pop[None, None, :]
        room = GROUP_BITS * (self.n_groups - 1 - torch.arange(self.n_groups))[None, :, None]
        return ((need >= 0) & (need <= room)).to(torch.float64)

    def conditionals(self, groups: torch.Tensor) -> torch.Tensor:
        """Normalized signed conditional values, (M, B, G, 16).

        Position j conditions only on groups[:, :j]; entries at and past j
        in the input are ignored, which is what makes ancestral sampling
        exact.
        """
        if self.n_trainable == 0:
            raise ValueError("no trainable states")
        if groups.min() < 0 or groups.max() >= GROUP_SIZE:
            raise ValueError("group value outside 0..15")
        onehot = F.one_hot(groups, GROUP_SIZE).to(torch.float64).permute(0, 2, 1)
        h = F.pad(onehot, (1, 0))[..., :-1]  # shift right: position j sees < j
        taps = []
        for conv in self.embed:
            h = F.relu(conv(h))
            taps.append(h)
        merged = self.merge(torch.cat(taps, dim=1))  # (B, hidden, G)
        raw = torch.einsum("bcj,mjoc->mbjo", merged, self.head_weight)
        raw = raw + self.head_bias[:, None, :, :]  # (M, B, G, 16)
        masked = raw * self.outcome_mask(groups)[None]
        norm = masked.norm(dim=-1, keepdim=True).clamp_min(_NORM_FLOOR)
        return masked / norm

    def values(self, groups: torch.Tensor) -> torch.Tensor:
        """Wavefunction values of every state on a batch, (M+1, B)."""
        groups = torch.as_tensor(groups, dtype=torch.int64)
        row0 = (groups == self.anchor_groups[None, :]).all(dim=1).to(torch.float64)
        if self.n_trainable == 0:
            return row0[None, :]
        cond = self.conditionals(groups)
        idx = groups[None, :, :, None].expand(cond.shape[0], -1, -1, 1)
        picked = cond.gather(-1, idx).squeeze(-1)  # (M, B, G)
        return torch.cat([row0[None, :], picked.prod(dim=-1)], dim=0)

    def states(self, basis: SectorBasis, chunk: int = 8192) -> torch.Tensor:
        """Materialize all states over a full sector basis, (M+1, dim).

        Enumeration-scale only; differentiable, used for hybrid training and
        normalization checks.
        """
        if basis.l != self.l or basis.n_up != self.n_up:
            raise ValueError("basis does not match the family sector")
        cols = []
        for start in range(0, basis.dim, chunk):
            block = basis.states[start : start + chunk]
            grouped = torch.from_numpy(group_batch(block, self.order))
            cols.append(self.values(grouped))
        return torch.cat(cols, dim=1)
