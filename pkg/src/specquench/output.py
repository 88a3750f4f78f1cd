"""Plot-ready CSV emitters.

All floats are written with 17 significant digits so files round-trip to
the exact binary double; site indices are 1-based to match the physics
convention used in the column docs.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_spectrum(path: Path | str, energies: np.ndarray) -> None:
    """Columns (i, E_i), eigenvalues ascending, i from 0."""
    write_csv(path, ["i", "E"], ((i, float(e)) for i, e in enumerate(energies)))


def write_magnetization(path: Path | str, times: np.ndarray, profiles: np.ndarray) -> None:
    """Columns (t, k, sigma_z); profiles has one row per time, one column per site."""
    rows = (
        (float(t), k + 1, float(profiles[row, k]))
        for row, t in enumerate(times)
        for k in range(profiles.shape[1])
    )
    write_csv(path, ["t", "k", "sigma_z"], rows)


def write_correlator(path: Path | str, times: np.ndarray, values: np.ndarray) -> None:
    """Columns (t, k, corr_c) for the half-chain pair correlator, k in 1..l/2."""
    rows = (
        (float(t), k + 1, float(values[row, k]))
        for row, t in enumerate(times)
        for k in range(values.shape[1])
    )
    write_csv(path, ["t", "k", "corr_c"], rows)


def write_amplitudes(path: Path | str, lambdas: np.ndarray, c2: np.ndarray) -> None:
    """Columns (i, Lambda_i, c2_i): spectral weight per component."""
    rows = ((i, float(lam), float(w)) for i, (lam, w) in enumerate(zip(lambdas, c2)))
    write_csv(path, ["i", "Lambda", "c2"], rows)


def write_error_curve(path: Path | str, times: np.ndarray, error: np.ndarray, bound: np.ndarray) -> None:
    """Columns (t, error, bound): reconstruction error under its guarantee."""
    rows = ((float(t), float(e), float(b)) for t, e, b in zip(times, error, bound))
    write_csv(path, ["t", "error", "bound"], rows)


def write_fidelity(path: Path | str, times: np.ndarray, fid: np.ndarray) -> None:
    """Columns (t, fidelity) against the exact evolution."""
    write_csv(path, ["t", "fidelity"], ((float(t), float(f)) for t, f in zip(times, fid)))
