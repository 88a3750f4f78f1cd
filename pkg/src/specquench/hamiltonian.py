"""XXZ Hamiltonian restricted to a fixed-magnetization sector.

H(J, Delta, h) = sum_k J (S^x_k S^x_{k+1} + S^y_k S^y_{k+1} + Delta S^z_k S^z_{k+1})
                 + h S^z_k

with S = sigma/2.  In the S^z product basis the sector matrix is real
symmetric: the diagonal collects J*Delta*s^z s^z + h*s^z terms, and each
antiparallel bond contributes an exchange element J/2.  For l=2 with
periodic boundaries the sum over k visits the single bond twice; that
double counting is kept on purpose, the formula is taken literally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import SectorBasis, config_code


@dataclass(frozen=True)
class XxzParams:
    J: float
    Delta: float
    h: float
    l: int
    periodic: bool = True

    def __post_init__(self):
        if self.l < 2:
            raise ValueError(f"need at least 2 sites, got l={self.l}")
        if not np.isfinite(self.J) or self.J == 0.0:
            raise ValueError(f"J must be finite and nonzero, got {self.J}")
        if not (np.isfinite(self.Delta) and np.isfinite(self.h)):
            raise ValueError("Delta and h must be finite")

    def bonds(self) -> list[tuple[int, int]]:
        """Bond list (k, k+1 mod l); periodic chains include the wrap bond."""
        if self.periodic:
            return [(k, (k + 1) % self.l) for k in range(self.l)]
        return [(k, k + 1) for k in range(self.l - 1)]


@dataclass(frozen=True)
class SparseHamiltonian:
    """Sector Hamiltonian as CSR plus structural guarantees.

    Every row stores its diagonal entry explicitly (even when it is 0), and
    at most l off-diagonal exchange entries.
    """

    dim: int
    matrix: sp.csr_matrix  # real symmetric, explicit diagonal

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Matrix-vector product H @ v."""
        v = np.asarray(v)
        if v.shape[0] != self.dim:
            raise ValueError(f"vector length {v.shape[0]} != dim {self.dim}")
        return self.matrix @ v

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(column indices, amplitudes) of row i, diagonal included."""
        start, stop = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[start:stop], self.matrix.data[start:stop]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def _diagonal_energy(params: XxzParams, bits: np.ndarray) -> float:
    sz = np.asarray(bits, dtype=np.float64) - 0.5
    diag = params.h * float(sz.sum())
    for a, b in params.bonds():
        diag += params.J * params.Delta * sz[a] * sz[b]
    return diag


def local_connections(params: XxzParams, bits: np.ndarray) -> list[tuple[np.ndarray, float]]:
    """Nonzero entries of H's row at a configuration, without materializing H.

    Returns (configuration, amplitude) pairs with the diagonal first.
    Amplitudes from bonds reaching the same target configuration are
    aggregated (this matters for l=2 periodic, where the bond repeats).
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if len(bits) != params.l:
        raise ValueError(f"configuration length {len(bits)} != l {params.l}")
    out: dict[int, tuple[np.ndarray, float]] = {}
    out[config_code(bits)] = (bits.copy(), _diagonal_energy(params, bits))
    for a, b in params.bonds():
        if bits[a] != bits[b]:  # antiparallel bond: exchange element J/2
            flipped = bits.copy()
            flipped[a], flipped[b] = bits[b], bits[a]
            code = config_code(flipped)
            if code in out:
                out[code] = (out[code][0], out[code][1] + 0.5 * params.J)
            else:
                out[code] = (flipped, 0.5 * params.J)
    return list(out.values())


def build_xxz(params: XxzParams, basis: SectorBasis) -> SparseHamiltonian:
    """Materialize the sector Hamiltonian from per-row connections."""
    if params.l != basis.l:
        raise ValueError(f"params l={params.l} does not match basis l={basis.l}")
    dim = basis.dim
    rows, cols, vals = [], [], []
    for i in range(dim):
        for config, amp in local_connections(params, basis.states[i]):
            rows.append(i)
            cols.append(basis.index_of(config))
            vals.append(amp)
    matrix = sp.csr_matrix(
        (np.array(vals, dtype=np.float64), (np.array(rows), np.array(cols))),
        shape=(dim, dim),
    )
    # csr_matrix sums duplicates but keeps explicit zeros from the diagonal
    return SparseHamiltonian(dim=dim, matrix=matrix)
