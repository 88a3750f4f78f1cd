"""Direct sampling from a softened mixture of the ansatz states.

Training estimates sums over the sector by importance sampling.  The
proposal is a mixture over ansatz states m with weights w_m = sum_i |B_im|
(states the components lean on get sampled more), and each member's
distribution is its autoregressive one with softened conditionals

    rho_j(o) ∝ q_j(o)^gamma,   q_j = x_j^2,

which fattens the tails so configurations where the target is small but
nonzero still get visited.  gamma = 1 leaves the conditionals untouched.
Because members factorize position by position, samples come out of an
ancestral pass with no Markov chain, and the exact proposal probability of
every sample is available for the importance weight 1/P(s).

Two equivalent views of the proposal: mixing the per-step conditionals with
prefix-posterior weights and multiplying along the chain telescopes into
the plain mixture P(s) = sum_m w_m rho^m(s) / sum_m w_m.  Sampling draws
the member first and runs its ancestral chain; ``stepwise_log_probability``
evaluates the telescoped per-step product as an independent cross-check.

The pinned state 0 is an indicator, so its member is a point mass on the
initial configuration at any gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .basis import SectorBasis, group_batch
from .network import AutoregressiveFamily

SOFTEN_DEFAULT = 0.5
_SUM_FLOOR = 1e-300


@dataclass(frozen=True)
class SampleBatch:
    """Configurations plus the factors that turn f(s) sums into estimates.

    The estimator downstream is sum_b scale[b] * f(groups[b]): a drawn batch
    carries scale = 1/(B P(s)) (importance sampling), an enumerated batch
    carries scale = 1 on every sector configuration (the sum itself).
    ``logp`` is the exact log-probability of each row under the proposal;
    None for enumerated batches, which have no sampling noise.
    """

    groups: np.ndarray
    scale: np.ndarray
    logp: np.ndarray | None = None

    def __post_init__(self):
        if self.groups.shape[0] != self.scale.shape[0]:
            raise ValueError("scale must align with rows")

    @property
    def size(self) -> int:
        return self.groups.shape[0]

    @property
    def prob(self) -> np.ndarray | None:
        return None if self.logp is None else np.exp(self.logp)


def default_weights(coeff: np.ndarray) -> np.ndarray:
    """Proposal weight per ansatz state: column sums of |B|.

    Invariant under shifting any column of the raw mixing matrix, since the
    effective coefficients already subtract column means.
    """
    w = np.abs(np.asarray(coeff, dtype=np.float64)).sum(axis=0)
    if w.sum() <= 0:
        raise ValueError("mixing coefficients are all zero")
    return w


def _soften(cond: torch.Tensor, gamma: float) -> torch.Tensor:
    """Softened outcome distribution from signed conditional values."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("softening exponent must lie in (0, 1]")
    p = cond.abs() ** (2.0 * gamma)
    return p / p.sum(dim=-1, keepdim=True).clamp_min(_SUM_FLOOR)


def member_products(
    family: AutoregressiveFamily, groups, gamma: float
) -> torch.Tensor:
    """Per-member probability of each row under softened ancestral rules.

    Returns (M+1, B); row 0 is the point mass of the pinned state.
    """
    groups = torch.as_tensor(groups, dtype=torch.int64)
    with torch.no_grad():
        # Drawn batches repeat configurations heavily; fold them first.
        uniq, inverse = torch.unique(groups, dim=0, return_inverse=True)
        row0 = (uniq == family.anchor_groups[None, :]).all(dim=1).to(torch.float64)
        if family.n_states == 1:
            return row0[None, inverse]
        rho = _soften(family.conditionals(uniq), gamma)  # (M, U, G, 16)
        idx = uniq[None, :, :, None].expand(rho.shape[0], -1, -1, 1)
        picked = rho.gather(-1, idx).squeeze(-1)
        out = torch.cat([row0[None, :], picked.prod(dim=-1)], dim=0)
        return out[:, inverse]


def mixture_probability(
    family: AutoregressiveFamily,
    weights: np.ndarray,
    groups,
    gamma: float = SOFTEN_DEFAULT,
) -> np.ndarray:
    """Exact proposal probability P(s) of each row, (B,)."""
    w = np.asarray(weights, dtype=np.float64)
    member = member_products(family, groups, gamma).numpy()
    return (w / w.sum()) @ member


def stepwise_log_probability(
    family: AutoregressiveFamily,
    weights: np.ndarray,
    groups,
    gamma: float = SOFTEN_DEFAULT,
) -> np.ndarray:
    """log P(s) accumulated step by step along the ancestral chain.

    At step j the outcome distribution is the member conditionals mixed
    with prefix-posterior weights w_m * rho^m(prefix).  The product over
    steps telescopes to the mixture probability; this path exists as an
    independent check of :func:`mixture_probability`.
    """
    groups = torch.as_tensor(groups, dtype=torch.int64)
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    with torch.no_grad():
        b, n_groups = groups.shape
        rho0 = torch.zeros(1, b, n_groups, 16, dtype=torch.float64)
        anchor = family.anchor_groups
        rho0[0, :, torch.arange(n_groups), anchor] = 1.0
        if family.n_states > 1:
            rho = torch.cat([rho0, _soften(family.conditionals(groups), gamma)], dim=0)
        else:
            rho = rho0
        idx = groups[None, :, :, None].expand(rho.shape[0], -1, -1, 1)
        picked = rho.gather(-1, idx).squeeze(-1).numpy()  # (M+1, B, G)
    prefix = np.cumprod(np.concatenate([np.ones((len(w), b, 1)), picked], axis=2), axis=2)
    logp = np.zeros(b)
    for j in range(n_groups):
        post = w[:, None] * prefix[:, :, j]  # (M+1, B)
        denom = post.sum(axis=0)
        numer = (post * picked[:, :, j]).sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp += np.log(numer / denom)
    return logp


def draw(
    family: AutoregressiveFamily,
    weights: np.ndarray,
    n: int,
    seed: int,
    gamma: float = SOFTEN_DEFAULT,
) -> SampleBatch:
    """Draw n configurations from the softened mixture.

    Randomness comes from a counter-based generator; the draws consume a
    fixed (n, G+1) block of uniforms (member choice, then one outcome per
    position), so results are reproducible bit for bit.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != family.n_states:
        raise ValueError("one weight per ansatz state required")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be nonnegative and not all zero")
    gen = np.random.Generator(np.random.Philox(key=seed))
    u = gen.random((n, family.n_groups + 1))

    cum = np.cumsum(w / w.sum())
    member = np.searchsorted(cum, u[:, 0], side="right")
    member = np.minimum(member, len(w) - 1)

    anchor = family.anchor_groups.numpy()
    groups = np.zeros((n, family.n_groups), dtype=np.int64)
    rows = np.nonzero(member > 0)[0]
    groups[member == 0] = anchor
    with torch.no_grad():
        for j in range(family.n_groups):
            if rows.size == 0:
                break
            # Only the realized prefix matters; collapse duplicate prefixes.
            uniq, inv = np.unique(groups[rows], axis=0, return_inverse=True)
            cond = family.conditionals(torch.from_numpy(uniq))
            rho = _soften(cond[:, :, j, :], gamma)  # (M, U, 16)
            pick = rho[member[rows] - 1, inv].numpy()
            cdf = np.cumsum(pick, axis=1)
            if np.any(cdf[:, -1] <= 0):
                raise RuntimeError("sampling deadlock: every outcome masked at a live prefix")
            cdf /= cdf[:, -1:]
            outcome = (cdf < u[rows, j + 1, None]).sum(axis=1)
            groups[rows, j] = np.minimum(outcome, pick.shape[1] - 1)

    prob = mixture_probability(family, w, torch.from_numpy(groups), gamma)
    if np.any(prob <= 0) or not np.all(np.isfinite(prob)):
        raise RuntimeError("drawn sample has nonpositive proposal probability")
    logp = np.log(prob)
    return SampleBatch(groups=groups, scale=1.0 / (n * prob), logp=logp)


def enumerated_batch(basis: SectorBasis, family: AutoregressiveFamily) -> SampleBatch:
    """Whole-sector batch with unit scale: the estimator becomes the sum."""
    groups = group_batch(basis.states, family.order)
    return SampleBatch(groups=groups, scale=np.ones(basis.dim))


def exact_mixture(
    family: AutoregressiveFamily,
    weights: np.ndarray,
    basis: SectorBasis,
    gamma: float = SOFTEN_DEFAULT,
) -> np.ndarray:
    """Proposal probability of every sector configuration, (dim,)."""
    groups = torch.from_numpy(group_batch(basis.states, family.order))
    return mixture_probability(family, weights, groups, gamma)
