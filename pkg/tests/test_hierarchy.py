import math

import numpy as np
import pytest

from specquench.basis import domain_wall_bits, enumerate_sector, one_hot_state
from specquench.dynamics import SpectralDecomposition
from specquench.exact import diagonalize, exact_projection, make_windows
from specquench.hamiltonian import XxzParams, build_xxz
from specquench.hierarchy import (
    DecompositionTree,
    ExactSplit,
    TrainedSplit,
    TreeNode,
    leaf_reconstruct,
    leaf_weighted_sigma2,
    load_tree,
    node_seed,
    run_breakdown,
    save_tree,
)


def quench_system(l=8):
    params = XxzParams(J=1.0, Delta=-1.0, h=0.0, l=l, periodic=True)
    basis = enumerate_sector(l, l // 2)
    H = build_xxz(params, basis)
    psi0 = one_hot_state(basis, domain_wall_bits(l))
    return basis, H, psi0


def test_node_seeds_are_stable_and_distinct():
    assert node_seed(3, "1_2") == node_seed(3, "1_2")
    assert node_seed(3, "1_2") != node_seed(4, "1_2")
    labels = ["o", "1_0", "1_1", "1_0_0", "1_0_1"]
    seeds = {node_seed(0, lab) for lab in labels}
    assert len(seeds) == len(labels)
    assert all(0 <= s < 2**64 for s in seeds)


def test_no_splits_leaves_the_root():
    _, H, psi0 = quench_system()
    tree = run_breakdown(psi0, H, splits=[])
    assert set(tree.nodes) == {"o"}
    assert tree.root.c == 1.0
    phase = np.exp(-1j * tree.root.lam * 0.8)
    assert np.allclose(leaf_reconstruct(tree, 0.8), phase * psi0)


def test_single_exact_split_matches_windowed_projection():
    _, H, psi0 = quench_system()
    tree = run_breakdown(psi0, H, splits=[ExactSplit(6)])

    es = diagonalize(H)
    b = es.vectors.T @ psi0
    occ_e = es.energies[np.abs(b) ** 2 > 1e-24]
    proj = exact_projection(es, psi0, make_windows(occ_e.min(), occ_e.max(), 6))
    dec = SpectralDecomposition.from_projection(proj, H, lambda_mode="rayleigh")

    leaves = sorted(tree.leaves(), key=lambda n: n.lam)
    order = np.argsort(dec.lambdas[dec.live])
    assert len(leaves) == int(dec.live.sum())
    assert np.allclose([n.c2 for n in leaves], dec.c2[dec.live][order], atol=1e-12)
    assert np.allclose([n.lam for n in leaves], dec.lambdas[dec.live][order], atol=1e-10)
    assert np.allclose([n.sigma2 for n in leaves], dec.sigma2[dec.live][order], atol=1e-10)


def test_threshold_blocks_refinement():
    _, H, psi0 = quench_system()
    tree = run_breakdown(psi0, H, splits=[ExactSplit(4)], threshold=1.5)
    assert set(tree.nodes) == {"o"}
    assert tree.root.children == []


def test_two_level_tree_conserves_amplitude():
    _, H, psi0 = quench_system()
    tree = run_breakdown(psi0, H, splits=[ExactSplit(4), ExactSplit(2)])
    leaves = tree.live_leaves()
    assert sum(n.c2 for n in leaves) == pytest.approx(1.0, abs=1e-8)
    assert np.abs(leaf_reconstruct(tree, 0.0) - psi0).max() < 1e-8
    # depth-1 parents that got refined are internal, their children leaves
    for leaf in leaves:
        assert leaf.depth in (1, 2)
        if leaf.depth == 2:
            assert tree.nodes[leaf.parent].children


def test_refining_own_leaves_never_hurts():
    _, H, psi0 = quench_system()
    sigmas = [
        leaf_weighted_sigma2(run_breakdown(psi0, H, splits=splits))
        for splits in (
            [ExactSplit(4)],
            [ExactSplit(4), ExactSplit(2)],
            [ExactSplit(4), ExactSplit(2), ExactSplit(2)],
        )
    ]
    assert sigmas[0] > sigmas[1] > sigmas[2]


def test_leaf_weighted_spread_is_the_weighted_average():
    _, H, psi0 = quench_system()
    tree = run_breakdown(psi0, H, splits=[ExactSplit(5)])
    leaves = tree.live_leaves()
    c2 = np.array([n.c2 for n in leaves])
    s2 = np.array([n.sigma2 for n in leaves])
    assert leaf_weighted_sigma2(tree) == pytest.approx((c2 * s2).sum() / c2.sum())


def test_monochromatic_node_is_kept_with_warning():
    _, H, psi0 = quench_system()
    es = diagonalize(H)
    mix = (es.vectors[:, 0] + es.vectors[:, -1]) / math.sqrt(2.0)
    tree = run_breakdown(mix, H, splits=[ExactSplit(2), TrainedSplit(2, 2, 5)], seed=1)
    warned = [n for n in tree.nodes.values() if n.warning]
    assert warned and all("monochromatic" in n.warning for n in warned)
    assert all(not n.children for n in warned)
    # eigenstate leaves still reconstruct the state at any time
    t = 1.3
    expected = sum(
        np.exp(-1j * e * t) * v / math.sqrt(2.0)
        for e, v in [(es.energies[0], es.vectors[:, 0]), (es.energies[-1], es.vectors[:, -1])]
    )
    got = leaf_reconstruct(tree, t)
    phase_free = min(
        np.abs(got - expected).max(), np.abs(got + expected).max()
    )
    assert phase_free < 1e-8


def test_trained_split_refines_and_recovers():
    _, H, psi0 = quench_system()
    tree = run_breakdown(
        psi0, H, splits=[TrainedSplit(4, 4, 80, lr=0.02)], seed=3
    )
    assert len(tree.live_leaves()) > 1
    assert np.abs(leaf_reconstruct(tree, 0.0) - psi0).max() < 1e-5
    assert leaf_weighted_sigma2(tree) < tree.root.sigma2


def test_trees_are_reproducible():
    _, H, psi0 = quench_system()
    make = lambda: run_breakdown(
        psi0, H, splits=[ExactSplit(3), TrainedSplit(2, 2, 20, lr=0.05)], seed=7
    )
    a, b = make(), make()
    assert set(a.nodes) == set(b.nodes)
    for label in a.nodes:
        na, nb = a.nodes[label], b.nodes[label]
        assert na.c == nb.c
        assert na.lam == nb.lam or (math.isnan(na.lam) and math.isnan(nb.lam))
        assert np.array_equal(na.theta, nb.theta)


def test_save_load_roundtrip(tmp_path):
    _, H, psi0 = quench_system()
    es = diagonalize(H)
    mix = (es.vectors[:, 0] + es.vectors[:, -1]) / math.sqrt(2.0)
    tree = run_breakdown(mix, H, splits=[ExactSplit(2), TrainedSplit(2, 2, 5)], seed=2)
    save_tree(tree, tmp_path)
    assert (tmp_path / "manifest.json").exists()
    assert (tmp_path / "states.npz").exists()

    loaded = load_tree(tmp_path)
    assert loaded.threshold == tree.threshold
    assert loaded.seed == tree.seed
    assert set(loaded.nodes) == set(tree.nodes)
    for label, node in tree.nodes.items():
        other = loaded.nodes[label]
        assert other.parent == node.parent
        assert other.depth == node.depth
        assert other.c2 == pytest.approx(node.c2, rel=1e-14)
        assert other.lam == node.lam or (math.isnan(other.lam) and math.isnan(node.lam))
        assert other.sigma2 == node.sigma2
        assert other.children == node.children
        assert other.warning == node.warning
        assert np.array_equal(other.theta, node.theta)
    assert leaf_weighted_sigma2(loaded) == pytest.approx(leaf_weighted_sigma2(tree))


def test_input_validation():
    _, H, psi0 = quench_system()
    with pytest.raises(ValueError):
        run_breakdown(2.0 * psi0, H, splits=[ExactSplit(2)])
    with pytest.raises(ValueError):
        run_breakdown(psi0, H, splits=[ExactSplit(2)], threshold=-0.1)
    with pytest.raises(ValueError):
        ExactSplit(0)
    with pytest.raises(ValueError):
        TrainedSplit(0, 2, 10)
    with pytest.raises(ValueError):
        TrainedSplit(2, 2, -1)


def test_weighted_leaf_without_label_cannot_reconstruct():
    _, _, psi0 = quench_system()
    root = TreeNode(
        label="o", parent=None, depth=0, c=1.0, lam=float("nan"), sigma2=0.0, theta=psi0
    )
    tree = DecompositionTree(nodes={"o": root}, threshold=0.0, seed=0)
    with pytest.raises(ValueError, match="energy label"):
        leaf_reconstruct(tree, 0.0)
