"""Fixed-magnetization sector of a spin-1/2 chain and grouped encodings.

Configurations are length-l uint8 arrays with 0 = down, 1 = up.  Site 1 sits
at index 0 and is the most significant bit of the integer encoding, so e.g.
(0,1,1,0,1,1,0,0) encodes to 0b01101100 = 108 and packs into the 4-bit
groups (6, 12).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

# Dense materialization of a sector beyond this is refused -- keeps exact
# checks (enumeration, diagonalization inputs) desk-tractable.
DENSE_SECTOR_CAP = 2_000_000


class SectorSizeError(ValueError):
    """Sector dimension exceeds the configured dense-materialization cap."""


def config_code(bits: np.ndarray) -> int:
    """Integer encoding of a configuration, site 0 as the MSB."""
    bits = np.asarray(bits, dtype=np.uint8)
    code = 0
    for b in bits:
        code = (code << 1) | int(b)
    return code


def config_from_code(code: int, l: int) -> np.ndarray:
    """Inverse of :func:`config_code`."""
    return np.array([(code >> (l - 1 - k)) & 1 for k in range(l)], dtype=np.uint8)


def batch_codes(configs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`config_code` for a (batch, l) array."""
    configs = np.asarray(configs, dtype=np.int64)
    l = configs.shape[-1]
    weights = 1 << np.arange(l - 1, -1, -1, dtype=np.int64)
    return configs @ weights


@dataclass(frozen=True)
class SectorBasis:
    """All configurations of an l-site chain with a fixed number of up spins.

    States are ordered by ascending integer encoding, which makes index
    lookup a binary search on the sorted code array.
    """

    l: int
    n_up: int
    states: np.ndarray  # (dim, l) uint8
    codes: np.ndarray  # (dim,) int64, strictly ascending

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def index_of(self, config) -> int:
        """Ordinal of a configuration (or its integer code) in the basis."""
        code = config if isinstance(config, (int, np.integer)) else config_code(config)
        idx = int(np.searchsorted(self.codes, code))
        if idx >= self.dim or self.codes[idx] != code:
            raise KeyError(f"configuration code {code} not in sector (l={self.l}, n_up={self.n_up})")
        return idx

    def index_batch(self, configs: np.ndarray) -> np.ndarray:
        """Ordinals for a (batch, l) array of in-sector configurations."""
        codes = batch_codes(configs)
        idx = np.searchsorted(self.codes, codes)
        if np.any(idx >= self.dim) or np.any(self.codes[np.minimum(idx, self.dim - 1)] != codes):
            raise KeyError("batch contains configurations outside the sector")
        return idx


def enumerate_sector(l: int, n_up: int, cap: int = DENSE_SECTOR_CAP) -> SectorBasis:
    """Enumerate the fixed-magnetization sector, ordered by integer encoding."""
    if not (0 <= n_up <= l):
        raise ValueError(f"n_up={n_up} outside [0, {l}]")
    dim = comb(l, n_up)
    if dim > cap:
        raise SectorSizeError(f"sector dimension {dim} exceeds cap {cap}")
    # Gosper's hack walks the n_up-popcount codes in ascending order.
    codes = np.empty(dim, dtype=np.int64)
    c = (1 << n_up) - 1
    for i in range(dim):
        codes[i] = c
        if i + 1 < dim:
            low = c & -c
            ripple = c + low
            c = ripple | (((c ^ ripple) >> 2) // low)
    states = ((codes[:, None] >> np.arange(l - 1, -1, -1)) & 1).astype(np.uint8)
    return SectorBasis(l=l, n_up=n_up, states=states, codes=codes)


@dataclass(frozen=True)
class SpinOrder:
    """Permutation of the site order used before grouping.

    ``perm[i]`` is the 0-based site read at sequence position i.  Identity is
    adequate for open chains; periodic chains may benefit from a custom
    permutation, so it is exposed rather than hard-wired.
    """

    perm: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        object.__setattr__(self, "perm", perm)
        if sorted(perm.tolist()) != list(range(len(perm))):
            raise ValueError("spin order must be a permutation of 0..l-1")

    @classmethod
    def identity(cls, l: int) -> "SpinOrder":
        return cls(perm=np.arange(l))

    @property
    def l(self) -> int:
        return len(self.perm)


GROUP_BITS = 4
GROUP_SIZE = 1 << GROUP_BITS  # 16 outcomes per group
POPCOUNT16 = np.array([bin(v).count("1") for v in range(GROUP_SIZE)], dtype=np.int64)


def group_configuration(bits: np.ndarray, order: SpinOrder) -> np.ndarray:
    """Pack a configuration into l/4 hex digits along the given spin order.

    Group j holds sites order.perm[4j..4j+3], most-significant-first.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    l = len(bits)
    if l % GROUP_BITS != 0:
        raise ValueError(f"chain length {l} not divisible by {GROUP_BITS}")
    if order.l != l:
        raise ValueError("spin order length mismatch")
    reordered = bits[order.perm].astype(np.int64).reshape(-1, GROUP_BITS)
    weights = 1 << np.arange(GROUP_BITS - 1, -1, -1, dtype=np.int64)
    return (reordered @ weights).astype(np.uint8)


def ungroup_configuration(groups: np.ndarray, order: SpinOrder) -> np.ndarray:
    """Inverse of :func:`group_configuration`."""
    groups = np.asarray(groups, dtype=np.int64)
    l = len(groups) * GROUP_BITS
    if order.l != l:
        raise ValueError("spin order length mismatch")
    reordered = ((groups[:, None] >> np.arange(GROUP_BITS - 1, -1, -1)) & 1).reshape(-1)
    bits = np.empty(l, dtype=np.uint8)
    bits[order.perm] = reordered
    return bits


def group_batch(configs: np.ndarray, order: SpinOrder) -> np.ndarray:
    """Grouped encoding for a (batch, l) array of configurations."""
    configs = np.asarray(configs, dtype=np.int64)
    l = configs.shape[-1]
    if l % GROUP_BITS != 0:
        raise ValueError(f"chain length {l} not divisible by {GROUP_BITS}")
    reordered = configs[:, order.perm].reshape(configs.shape[0], -1, GROUP_BITS)
    weights = 1 << np.arange(GROUP_BITS - 1, -1, -1, dtype=np.int64)
    return reordered @ weights


def ungroup_batch(groups: np.ndarray, order: SpinOrder) -> np.ndarray:
    """Inverse of :func:`group_batch`."""
    groups = np.asarray(groups, dtype=np.int64)
    batch, n_groups = groups.shape
    reordered = ((groups[:, :, None] >> np.arange(GROUP_BITS - 1, -1, -1)) & 1).reshape(batch, -1)
    configs = np.empty_like(reordered, dtype=np.uint8)
    configs[:, order.perm] = reordered
    return configs


def domain_wall_bits(l: int) -> np.ndarray:
    """Half-down half-up product configuration: down spins on the left."""
    if l % 2 != 0:
        raise ValueError("domain wall needs an even chain")
    return np.array([0] * (l // 2) + [1] * (l // 2), dtype=np.uint8)


def one_hot_state(basis: SectorBasis, bits: np.ndarray) -> np.ndarray:
    """Unit vector of the product state |bits> in the sector basis."""
    psi = np.zeros(basis.dim, dtype=np.float64)
    psi[basis.index_of(config_code(np.asarray(bits)))] = 1.0
    return psi
