"""Exact ground truth at desk scale.

Full diagonalization of the sector Hamiltonian, exact unitary evolution
through the eigenbasis, and exact windowed spectral projection: split the
spectrum into N half-open energy windows of common width epsilon, project
the initial state onto each window, and approximate the evolution by a pure
phase per window.  The reconstruction error is bounded by epsilon*t/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .hamiltonian import SparseHamiltonian

DENSE_DIAG_CAP = 4096


class DiagonalizationCapError(ValueError):
    """Sector too large for dense diagonalization."""


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray  # ascending
    vectors: np.ndarray  # orthonormal columns, vectors[:, i] <-> energies[i]

    @property
    def dim(self) -> int:
        return len(self.energies)


def diagonalize(H: SparseHamiltonian, cap: int = DENSE_DIAG_CAP) -> EigenSystem:
    """Dense eigendecomposition of the sector Hamiltonian."""
    if H.dim > cap:
        raise DiagonalizationCapError(f"dim {H.dim} exceeds dense cap {cap}")
    energies, vectors = scipy.linalg.eigh(H.toarray())
    return EigenSystem(energies=energies, vectors=vectors)


def spectrum_bounds(H: SparseHamiltonian, cap: int = DENSE_DIAG_CAP) -> tuple[float, float]:
    """Extremal eigenvalues; dense when affordable, Lanczos otherwise."""
    if H.dim <= cap:
        es = diagonalize(H, cap=cap)
        return float(es.energies[0]), float(es.energies[-1])
    lo = scipy.sparse.linalg.eigsh(H.matrix, k=1, which="SA", return_eigenvectors=False)
    hi = scipy.sparse.linalg.eigsh(H.matrix, k=1, which="LA", return_eigenvectors=False)
    return float(lo[0]), float(hi[0])


def exact_evolve(es: EigenSystem, psi0: np.ndarray, t: float) -> np.ndarray:
    """e^{-iHt} psi0 through the eigenbasis."""
    psi0 = np.asarray(psi0)
    if psi0.shape[0] != es.dim:
        raise ValueError(f"state length {psi0.shape[0]} != dim {es.dim}")
    b = es.vectors.T.conj() @ psi0
    return es.vectors @ (np.exp(-1j * es.energies * t) * b)


@dataclass(frozen=True)
class SpectralWindows:
    """Arithmetic grid x_0 < ... < x_N covering the spectrum.

    Window i is [x_i, x_{i+1}); the final window is closed on the right so
    no eigenvalue is double-assigned.
    """

    x: np.ndarray
    epsilon: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        object.__setattr__(self, "x", x)
        if len(x) < 2:
            raise ValueError("need at least one window")
        spacings = np.diff(x)
        if not np.allclose(spacings, self.epsilon, rtol=1e-12, atol=1e-12):
            raise ValueError("window edges must be an arithmetic sequence")
        if self.epsilon <= 0:
            raise ValueError("window width must be positive")

    @property
    def count(self) -> int:
        return len(self.x) - 1

    def centers(self) -> np.ndarray:
        return 0.5 * (self.x[:-1] + self.x[1:])

    def assign(self, energies: np.ndarray) -> np.ndarray:
        """Window index per energy; raises if any energy is uncovered.

        Boundary energies go to the right window (half-open intervals)
        except at the top edge, where the final window is closed.
        """
        energies = np.asarray(energies)
        if energies.min() < self.x[0] or energies.max() > self.x[-1]:
            raise ValueError("spectrum not covered by the window grid")
        idx = np.searchsorted(self.x, energies, side="right") - 1
        return np.minimum(idx, self.count - 1)


def make_windows(e_min: float, e_max: float, n: int, pad_rel: float = 1e-9) -> SpectralWindows:
    """N equal windows over [e_min, e_max] with strict outer edges."""
    if n < 1:
        raise ValueError("need at least one window")
    span = e_max - e_min
    pad = pad_rel * max(span, 1.0)
    x = np.linspace(e_min - pad, e_max + pad, n + 1)
    return SpectralWindows(x=x, epsilon=(x[-1] - x[0]) / n)


def window_count_for(e_min: float, e_max: float, t: float, delta: float) -> int:
    """Window count guaranteeing reconstruction error <= delta at horizon t."""
    return max(1, ceil((e_max - e_min) * t / (2.0 * delta)))


@dataclass(frozen=True)
class ExactProjection:
    """Initial state split into normalized window components.

    Empty windows (no spectral weight) carry c_i = 0, a zero theta column,
    and occupied[i] = False; downstream sums skip them.
    """

    c: np.ndarray  # (N,) nonnegative amplitudes
    thetas: np.ndarray  # (dim, N), unit columns where occupied
    lambdas: np.ndarray  # (N,) window centers
    occupied: np.ndarray  # (N,) bool
    epsilon: float

    @property
    def count(self) -> int:
        return len(self.c)

    def reconstruct(self, t: float) -> np.ndarray:
        """Phase-evolved sum over occupied windows, sum c_i e^{-i lambda_i t} theta_i."""
        phases = np.exp(-1j * self.lambdas[self.occupied] * t)
        return self.thetas[:, self.occupied] @ (self.c[self.occupied] * phases)


def exact_projection(es: EigenSystem, psi0: np.ndarray, windows: SpectralWindows) -> ExactProjection:
    """Project psi0 onto the eigen-subspaces of each energy window."""
    psi0 = np.asarray(psi0)
    b = es.vectors.T.conj() @ psi0
    idx = windows.assign(es.energies)
    n = windows.count
    dtype = np.complex128 if np.iscomplexobj(psi0) else np.float64
    thetas = np.zeros((es.dim, n), dtype=dtype)
    c = np.zeros(n)
    occupied = np.zeros(n, dtype=bool)
    for i in range(n):
        sel = idx == i
        if not np.any(sel):
            continue
        component = es.vectors[:, sel] @ b[sel]
        norm = float(np.linalg.norm(component))
        if norm == 0.0:
            continue
        thetas[:, i] = component / norm
        c[i] = norm
        occupied[i] = True
    return ExactProjection(
        c=c, thetas=thetas, lambdas=windows.centers(), occupied=occupied, epsilon=windows.epsilon
    )
