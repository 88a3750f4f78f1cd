"""Hierarchical refinement: re-split heavy components into narrower ones.

A first decomposition splits the initial state into components; any
component whose weight c^2 clears a threshold becomes the initial state of
a fresh, independent decomposition task, recursively down to a configured
depth.  The surviving leaves carry absolute amplitudes (products down the
path), so

    phi(t) = sum_leaves c_leaf e^{-i lambda_leaf t} Theta_leaf

recovers the original state at t = 0 and refines the energy resolution
everywhere the weight lives.  Node labels follow the parent path ("o",
"1_2", "1_2_0", ...) and each node's RNG seed is a hash of its label with
the global seed, so trees are reproducible and nodes are independent.

Two per-level split backends: exact windowed projection (windows spanning
the node's occupied energy range — children strictly narrow as depth
grows) and a trained dense-ansatz split for the variational path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ansatz import DenseFamily, MixingMatrix
from .dynamics import SpectralDecomposition
from .exact import EigenSystem, diagonalize, make_windows, spectrum_bounds
from .hamiltonian import SparseHamiltonian
from .trainer import LambdaGrid, TrainSettings, Trainer, build_lambda_grid

DEAD_LEAF_C2 = 1e-12
_OCCUPIED_REL = 1e-24
# Energy spread below this fraction of the spectrum span counts as
# monochromatic: dense-solver roundoff produces spreads up to ~1e-8 span
# on exact eigenstates, and there is nothing left to refine there anyway.
MONOCHROMATIC_REL = 1e-7


@dataclass(frozen=True)
class ExactSplit:
    """Split a node by exact windowed projection into up to n children."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one window")


@dataclass(frozen=True)
class TrainedSplit:
    """Split a node by training a dense ensemble on its state."""

    n: int
    m: int
    iterations: int
    lr: float = 1e-3

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.iterations < 0:
            raise ValueError("invalid trained-split configuration")


@dataclass
class TreeNode:
    label: str
    parent: str | None
    depth: int
    c: float  # absolute amplitude down the path
    lam: float  # energy label, NaN on dead nodes
    sigma2: float
    theta: np.ndarray  # unit state vector
    children: list[str] = field(default_factory=list)
    warning: str | None = None

    @property
    def c2(self) -> float:
        return self.c * self.c


@dataclass
class DecompositionTree:
    nodes: dict[str, TreeNode]
    threshold: float
    seed: int

    @property
    def root(self) -> TreeNode:
        return self.nodes["o"]

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes.values() if not n.children]

    def live_leaves(self) -> list[TreeNode]:
        return [n for n in self.leaves() if n.c2 >= DEAD_LEAF_C2]


def node_seed(global_seed: int, label: str) -> int:
    """Stable 64-bit per-node seed from the global seed and the label."""
    digest = hashlib.sha256(f"{global_seed}:{label}".encode()).hexdigest()
    return int(digest[:16], 16)


def _split_exact(theta: np.ndarray, es: EigenSystem, n: int):
    """Window the node state over its own occupied energy range."""
    b = es.vectors.T.conj() @ theta
    w = np.abs(b) ** 2
    occ = w > _OCCUPIED_REL * w.sum()
    e_occ = es.energies[occ]
    windows = make_windows(float(e_occ.min()), float(e_occ.max()), n)
    idx = windows.assign(es.energies[occ])
    out = []
    occ_idx = np.nonzero(occ)[0]
    for i in range(windows.count):
        sel = occ_idx[idx == i]
        if sel.size == 0:
            continue
        component = es.vectors[:, sel] @ b[sel]
        c = float(np.linalg.norm(component))
        if c == 0.0:
            continue
        ww = w[sel] / w[sel].sum()
        lam = float(ww @ es.energies[sel])
        sigma2 = float(ww @ (es.energies[sel] - lam) ** 2)
        out.append((c, component / c, lam, sigma2))
    return out, None


def _split_trained(
    theta: np.ndarray,
    H: SparseHamiltonian,
    spec: TrainedSplit,
    seed: int,
    root_grid: LambdaGrid,
    bounds: tuple[float, float],
    is_root: bool,
):
    """Train a dense ensemble on the node state and read off components.

    The root reuses the experiment's target grid; deeper nodes get a grid
    over [lam - 3 sigma, lam + 3 sigma] of their own state (clipped to the
    spectrum), since their support is much narrower than the full band.
    """
    if np.iscomplexobj(theta):
        raise ValueError("trained splits support real node states only")
    if is_root:
        grid = root_grid
    else:
        h_theta = H.apply(theta)
        lam = float(theta @ h_theta)
        sigma = float(np.sqrt(max(h_theta @ h_theta - lam * lam, 0.0)))
        if spec.n > 1 and sigma <= MONOCHROMATIC_REL * max(bounds[1] - bounds[0], 1.0):
            return [], "node is monochromatic; kept as leaf"
        lo = max(lam - 3.0 * sigma, bounds[0])
        hi = min(lam + 3.0 * sigma, bounds[1])
        grid = build_lambda_grid(lo, hi, spec.n)
    family = DenseFamily(theta, spec.m, seed=seed)
    mixing = MixingMatrix(spec.n, spec.m + 1, seed=seed + 1)
    settings = TrainSettings(iterations=spec.iterations, mode="exact", lr=spec.lr, seed=seed)
    trainer = Trainer(family, mixing, grid, settings, hamiltonian=H)
    result = trainer.run()
    if result.diverged:
        return [], "training diverged; node kept as leaf"
    phi = (mixing.coefficients() @ family.states()).detach().numpy()
    dec = SpectralDecomposition.from_components(phi, H)
    out = []
    for i in range(dec.n):
        c = float(np.sqrt(dec.c2[i]))
        if not dec.live[i]:
            out.append((c, np.zeros_like(theta), float("nan"), 0.0))
            continue
        out.append((c, phi[i] / c, float(dec.lambdas[i]), float(dec.sigma2[i])))
    return out, None


def run_breakdown(
    psi0: np.ndarray,
    H: SparseHamiltonian,
    splits: Sequence[ExactSplit | TrainedSplit],
    threshold: float = 0.0,
    seed: int = 0,
    root_grid: LambdaGrid | None = None,
) -> DecompositionTree:
    """Build the refinement tree; splits[d] configures depth-d nodes.

    A node at depth d is refined iff d < len(splits) and its c^2 clears the
    threshold; everything else stays a leaf.
    """
    psi0 = np.asarray(psi0, dtype=np.float64)
    norm = np.linalg.norm(psi0)
    if not np.isclose(norm, 1.0, atol=1e-10):
        raise ValueError("initial state must be unit norm")
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")

    es: EigenSystem | None = None
    bounds: tuple[float, float] | None = None
    if any(isinstance(s, ExactSplit) for s in splits):
        es = diagonalize(H)
        bounds = (float(es.energies[0]), float(es.energies[-1]))
    if any(isinstance(s, TrainedSplit) for s in splits):
        if bounds is None:
            bounds = spectrum_bounds(H)
        if root_grid is None:
            n0 = splits[0].n
            root_grid = build_lambda_grid(bounds[0], bounds[1], n0)

    h_psi = H.apply(psi0)
    root_lam = float(psi0 @ h_psi)
    root_sigma2 = max(float(h_psi @ h_psi) - root_lam**2, 0.0)
    root = TreeNode(
        label="o", parent=None, depth=0, c=1.0, lam=root_lam, sigma2=root_sigma2, theta=psi0
    )
    tree = DecompositionTree(nodes={"o": root}, threshold=threshold, seed=seed)

    frontier = [root]
    for depth, spec in enumerate(splits):
        next_frontier: list[TreeNode] = []
        for node in frontier:
            if node.c2 < threshold or node.c2 < DEAD_LEAF_C2:
                continue
            if isinstance(spec, ExactSplit):
                children, warning = _split_exact(node.theta, es, spec.n)
            else:
                children, warning = _split_trained(
                    node.theta, H, spec, node_seed(seed, node.label), root_grid, bounds,
                    is_root=node.label == "o",
                )
            if warning:
                node.warning = warning
                continue
            for i, (c_rel, theta, lam, sigma2) in enumerate(children):
                label = f"1_{i}" if node.label == "o" else f"{node.label}_{i}"
                child = TreeNode(
                    label=label,
                    parent=node.label,
                    depth=depth + 1,
                    c=node.c * c_rel,
                    lam=lam,
                    sigma2=sigma2,
                    theta=theta,
                )
                tree.nodes[label] = child
                node.children.append(label)
                next_frontier.append(child)
        frontier = next_frontier
    return tree


def leaf_reconstruct(tree: DecompositionTree, t: float) -> np.ndarray:
    """phi(t) summed over live leaves; recovers the root state at t = 0."""
    total = np.zeros(len(tree.root.theta), dtype=np.complex128)
    for leaf in tree.leaves():
        if leaf.c2 < DEAD_LEAF_C2:
            continue
        if not np.isfinite(leaf.lam):
            raise ValueError(f"leaf {leaf.label} carries weight but no energy label")
        total += leaf.c * np.exp(-1j * leaf.lam * t) * leaf.theta
    return total


def leaf_weighted_sigma2(tree: DecompositionTree) -> float:
    """|sigma|^2 over the live leaf set."""
    leaves = tree.live_leaves()
    c2 = np.array([n.c2 for n in leaves])
    s2 = np.array([n.sigma2 for n in leaves])
    return float(c2 @ s2 / c2.sum())


def save_tree(tree: DecompositionTree, directory: Path | str) -> None:
    """Manifest (JSON) plus one named state array per node (npz)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "threshold": tree.threshold,
        "seed": tree.seed,
        "nodes": [
            {
                "label": n.label,
                "parent": n.parent,
                "depth": n.depth,
                "c2": n.c2,
                "lambda": None if not np.isfinite(n.lam) else n.lam,
                "sigma2": n.sigma2,
                "children": n.children,
                "warning": n.warning,
            }
            for n in tree.nodes.values()
        ],
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    np.savez(directory / "states.npz", **{n.label: n.theta for n in tree.nodes.values()})


def load_tree(directory: Path | str) -> DecompositionTree:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    states = np.load(directory / "states.npz")
    nodes = {}
    for rec in manifest["nodes"]:
        lam = rec["lambda"]
        nodes[rec["label"]] = TreeNode(
            label=rec["label"],
            parent=rec["parent"],
            depth=rec["depth"],
            c=float(np.sqrt(rec["c2"])),
            lam=float("nan") if lam is None else float(lam),
            sigma2=rec["sigma2"],
            theta=states[rec["label"]],
            children=list(rec["children"]),
            warning=rec["warning"],
        )
    return DecompositionTree(nodes=nodes, threshold=manifest["threshold"], seed=manifest["seed"])
