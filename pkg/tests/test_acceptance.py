"""End-to-end acceptance checks, one test per criterion.

Each test states its numeric bar in the asserts and carries the runtime
budget it must respect; `pytest -v` therefore prints one pass/fail line per
criterion.  Tolerances are the contract, not aspirations: loosening one
here is changing the deliverable.
"""

import json
import time

import numpy as np
import pytest
import torch
from brute import kkt_split

from specquench.ansatz import DenseFamily, MixingMatrix, mix_components
from specquench.basis import (
    POPCOUNT16,
    domain_wall_bits,
    enumerate_sector,
    group_batch,
    one_hot_state,
    ungroup_batch,
)
from specquench.dynamics import (
    SpectralDecomposition,
    coherence_time,
    fidelity,
    reconstruct,
)
from specquench.exact import (
    diagonalize,
    exact_evolve,
    exact_projection,
    make_windows,
    spectrum_bounds,
)
from specquench.hamiltonian import XxzParams, build_xxz
from specquench.hierarchy import (
    ExactSplit,
    leaf_reconstruct,
    leaf_weighted_sigma2,
    run_breakdown,
)
from specquench.ideal import ideal_sigma, ideal_split
from specquench.network import AutoregressiveFamily
from specquench.sampler import default_weights, draw, enumerated_batch, exact_mixture
from specquench.trainer import (
    TrainSettings,
    Trainer,
    build_lambda_grid,
    exact_loss,
    gradient,
    mc_loss,
    torch_hamiltonian,
)

L = 8
PARAMS = XxzParams(J=1.0, Delta=-1.0, h=0.0, l=L, periodic=True)
BASIS = enumerate_sector(L, L // 2)
H = build_xxz(PARAMS, BASIS)
PSI0 = one_hot_state(BASIS, domain_wall_bits(L))
ES = diagonalize(H)


def autoregressive(n_states, seed, hidden=8):
    return AutoregressiveFamily(
        L, L // 2, n_states, domain_wall_bits(L), hidden=hidden, seed=seed
    )


def test_criterion_01_exact_projection_error_bound():
    start = time.perf_counter()
    times = np.arange(1, 21) * 0.25  # Jt in {0.25, ..., 5}
    exact_states = [exact_evolve(ES, PSI0, t) for t in times]
    for n in (8, 16, 32):
        windows = make_windows(float(ES.energies[0]), float(ES.energies[-1]), n)
        proj = exact_projection(ES, PSI0, windows)
        for t, psi_t in zip(times, exact_states):
            err = np.linalg.norm(psi_t - proj.reconstruct(t))
            assert err <= 0.5 * proj.epsilon * t + 1e-8, (n, t, err)
    assert time.perf_counter() - start < 10.0


def test_criterion_02_ideal_split_matches_constrained_solve():
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    for _ in range(50):
        n_levels = int(rng.integers(2, 13))  # N_h <= 12
        n_comp = int(rng.integers(1, 5))  # N <= 4
        energies = np.sort(rng.uniform(-3.0, 3.0, n_levels))
        amps = rng.normal(size=n_levels)
        amps /= np.linalg.norm(amps)
        lambdas = np.linspace(energies[0], energies[-1], n_comp + 2)[1:-1]
        if n_comp == 1:
            lambdas = np.array([0.5 * (energies[0] + energies[-1])])
        g = ideal_split(energies, amps, lambdas)
        g_ref = kkt_split(energies, amps, lambdas)
        assert np.abs(g - g_ref).max() <= 1e-6
        assert np.abs(g.sum(axis=0) - amps).max() < 1e-12  # feasibility
    assert time.perf_counter() - start < 60.0


def test_criterion_03_ideal_spread_halves_with_doubled_components():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    energies = np.sort(rng.uniform(-4.0, 4.0, 200))
    amps = rng.normal(size=200)
    amps /= np.linalg.norm(amps)
    for n in (5, 10, 20):
        lam_n = build_lambda_grid(energies[0], energies[-1], n).lambdas
        lam_2n = build_lambda_grid(energies[0], energies[-1], 2 * n).lambdas
        ratio = ideal_sigma(energies, amps, lam_2n) / ideal_sigma(energies, amps, lam_n)
        assert ratio <= 0.7, (n, ratio)
    assert time.perf_counter() - start < 5.0


def test_criterion_04_components_always_sum_to_initial_state():
    start = time.perf_counter()
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(i)
        n_comp = int(rng.integers(2, 7))
        n_train = int(rng.integers(1, 5))
        if i % 2 == 0:
            family = DenseFamily(PSI0, n_train, seed=i)
            states = family.states()
            target = PSI0
        else:
            family = autoregressive(n_train, seed=i, hidden=6)
            states = family.states(BASIS)
            target = one_hot_state(BASIS, domain_wall_bits(L))
        coeff = MixingMatrix(n_comp, n_train + 1, seed=i + 1).coefficients()
        with torch.no_grad():
            total = mix_components(coeff, states).sum(dim=0).numpy()
        worst = max(worst, np.abs(total - target).max())
    assert worst <= 1e-6
    assert time.perf_counter() - start < 5.0


def test_criterion_05_prefix_normalization_and_conservation_mask():
    family = autoregressive(3, seed=11)
    g0, g1 = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
    groups = torch.from_numpy(np.stack([g0.ravel(), g1.ravel()], axis=1))
    with torch.no_grad():
        cond = family.conditionals(groups)  # (M, 256, 2, 16)
    pop = POPCOUNT16
    for b in range(256):
        prefix_pop = [0, pop[int(groups[b, 0])]]
        for j in range(2):
            room = 4 * (1 - j)
            need = L // 2 - prefix_pop[j] - pop
            feasible = (need >= 0) & (need <= room)
            vec = cond[:, b, j, :].numpy()
            assert np.all(vec[:, ~feasible] == 0.0)
            if feasible.any():
                norms = np.linalg.norm(vec, axis=1)
                assert np.abs(norms - 1.0).max() <= 1e-6
    # local normalization makes every state globally normalized
    with torch.no_grad():
        state_norms = family.states(BASIS).norm(dim=1).numpy()
    assert np.abs(state_norms - 1.0).max() <= 1e-6


def test_criterion_06_sampled_histogram_matches_enumerated_mixture():
    start = time.perf_counter()
    family = autoregressive(3, seed=5)
    weights = default_weights(MixingMatrix(6, 4, seed=6).coefficients().detach().numpy())
    p_exact = exact_mixture(family, weights, BASIS, gamma=0.5)
    assert abs(p_exact.sum() - 1.0) <= 1e-8  # per-step normalization, telescoped

    n = 100_000
    batch = draw(family, weights, n, seed=13, gamma=0.5)
    idx = BASIS.index_batch(ungroup_batch(batch.groups, family.order))
    hist = np.bincount(idx, minlength=BASIS.dim) / n
    tv = 0.5 * np.abs(hist - p_exact).sum()
    assert tv < 0.02, tv
    assert time.perf_counter() - start < 60.0


def test_criterion_07_sampled_estimator_agrees_with_exact_loss():
    family = autoregressive(3, seed=21)
    mixing = MixingMatrix(4, 4, seed=22)
    coeff = mixing.coefficients()
    grid = build_lambda_grid(float(ES.energies[0]), float(ES.energies[-1]), 4)

    enumerated = mc_loss(PARAMS, family, coeff, grid, enumerated_batch(BASIS, family))
    exact = exact_loss(torch_hamiltonian(H), family.states(BASIS), coeff, grid)
    exact_val = exact.detach().item()
    assert abs(enumerated.loss.detach().item() - exact_val) <= 1e-8

    weights = default_weights(coeff.detach().numpy())
    for seed in range(20):
        batch = draw(family, weights, 40_000, seed=seed)
        ev = mc_loss(PARAMS, family, coeff, grid, batch)
        assert abs(ev.loss.detach().item() - exact_val) <= 3.0 * ev.stderr, seed


def test_criterion_08_reverse_gradients_match_finite_differences():
    for l in (4, 8):
        basis = enumerate_sector(l, l // 2)
        params = XxzParams(J=1.0, Delta=-1.0, h=0.0, l=l, periodic=True)
        hmat = torch_hamiltonian(build_xxz(params, basis))
        family = AutoregressiveFamily(
            l, l // 2, 2, domain_wall_bits(l), hidden=6, seed=l
        )
        mixing = MixingMatrix(3, 3, seed=l + 1)
        grid = build_lambda_grid(-2.0, 2.0, 3)

        def loss_value():
            return exact_loss(hmat, family.states(basis), mixing.coefficients(), grid)

        params = dict(
            [(f"family.{n}", p) for n, p in family.named_parameters()]
            + [(f"mixing.{n}", p) for n, p in mixing.named_parameters()]
        )
        grads = gradient(loss_value(), {"family": family, "mixing": mixing})
        flats = [
            (params[name].data.reshape(-1), g.reshape(-1)) for name, g in grads.items()
        ]
        sizes = np.array([len(f) for f, _ in flats])
        rng = np.random.default_rng(l)
        h = 1e-5
        for flat_idx in rng.choice(sizes.sum(), size=50, replace=False):
            which = np.searchsorted(np.cumsum(sizes), flat_idx, side="right")
            local = flat_idx - (np.cumsum(sizes)[which] - sizes[which])
            pol, gol = flats[which]
            keep = pol[local].item()
            pol[local] = keep + h
            up = loss_value().detach().item()
            pol[local] = keep - h
            down = loss_value().detach().item()
            pol[local] = keep
            fd = (up - down) / (2 * h)
            ad = gol[local].item()
            assert abs(ad - fd) <= 1e-4 * abs(fd) + 1e-9, (l, flat_idx, ad, fd)


def test_criterion_09_dense_training_converges_and_tracks_dynamics():
    start = time.perf_counter()
    grid = build_lambda_grid(*spectrum_bounds(H), 16)
    short_times = np.linspace(0.0, 1.0, 9)
    exact_short = [exact_evolve(ES, PSI0, t) for t in short_times]
    for seed in (0, 1, 2):
        family = DenseFamily(PSI0, 8, seed=seed)
        mixing = MixingMatrix(16, 9, seed=seed + 100)
        trainer = Trainer(
            family,
            mixing,
            grid,
            TrainSettings(iterations=2000, mode="exact", lr=1e-2, seed=seed),
            hamiltonian=H,
        )
        result = trainer.run()
        assert not result.diverged
        assert result.metrics[0]["loss"] / result.final_loss >= 10.0, seed

        with torch.no_grad():
            phi = (mixing.coefficients() @ family.states()).numpy()
        dec = SpectralDecomposition.from_components(phi, H)
        for t, psi_t in zip(short_times, exact_short):
            assert fidelity(psi_t, reconstruct(dec, t)) >= 0.95, (seed, t)
        t_c = coherence_time(dec)
        assert fidelity(exact_evolve(ES, PSI0, t_c), reconstruct(dec, t_c)) >= 0.5, seed
    assert time.perf_counter() - start < 15 * 60


def test_criterion_10_sampled_training_halves_the_loss():
    start = time.perf_counter()
    grid = build_lambda_grid(*spectrum_bounds(H), 8)
    hmat = torch_hamiltonian(H)
    improved = 0
    for seed in (0, 1, 2):
        family = autoregressive(4, seed=seed, hidden=32)
        mixing = MixingMatrix(8, 5, seed=seed + 100)

        def exact_eval():
            with torch.no_grad():
                return exact_loss(
                    hmat, family.states(BASIS), mixing.coefficients(), grid
                ).item()

        initial = exact_eval()
        trainer = Trainer(
            family,
            mixing,
            grid,
            TrainSettings(iterations=3000, mode="sampled", batch=2048, seed=seed),
            params=PARAMS,
        )
        result = trainer.run()
        assert not result.diverged
        if exact_eval() < 0.5 * initial:
            improved += 1
    assert improved >= 2, improved
    assert time.perf_counter() - start < 30 * 60


def test_criterion_11_deeper_tree_sharpens_equal_leaf_budget():
    rng = np.random.default_rng(0)
    state = rng.normal(size=BASIS.dim)
    state /= np.linalg.norm(state)

    flat = run_breakdown(state, H, [ExactSplit(4), ExactSplit(4)])
    deep = run_breakdown(state, H, [ExactSplit(4), ExactSplit(2), ExactSplit(2)])
    # both trees get a nominal budget of 16 leaves
    assert 4 * 4 == 4 * 2 * 2 == 16
    sigma_flat = np.sqrt(leaf_weighted_sigma2(flat))
    sigma_deep = np.sqrt(leaf_weighted_sigma2(deep))
    assert sigma_deep < sigma_flat, (sigma_deep, sigma_flat)
    assert np.abs(leaf_reconstruct(deep, 0.0) - state).max() <= 1e-5

    # the quench initial state is recovered by its own refinement tree
    wall = run_breakdown(PSI0, H, [ExactSplit(4), ExactSplit(2), ExactSplit(2)])
    assert np.abs(leaf_reconstruct(wall, 0.0) - PSI0).max() <= 1e-5
    # refining a tree's own leaves never increases the weighted spread
    chain = [
        leaf_weighted_sigma2(run_breakdown(PSI0, H, [ExactSplit(n) for n in splits]))
        for splits in ([4], [4, 2], [4, 2, 2])
    ]
    assert chain[0] >= chain[1] >= chain[2]


def test_criterion_12_identical_seeds_reproduce_bit_for_bit(tmp_path):
    weights = np.array([1.0, 0.6, 0.3, 0.1])
    batches = [draw(autoregressive(3, seed=2), weights, 5000, seed=9) for _ in range(2)]
    assert np.array_equal(batches[0].groups, batches[1].groups)
    assert np.array_equal(batches[0].logp, batches[1].logp)

    grid = build_lambda_grid(*spectrum_bounds(H), 4)
    logs = []
    for run in ("a", "b"):
        family = autoregressive(2, seed=3, hidden=6)
        mixing = MixingMatrix(4, 3, seed=4)
        trainer = Trainer(
            family,
            mixing,
            grid,
            TrainSettings(iterations=5, mode="sampled", batch=256, seed=1),
            params=PARAMS,
        )
        trainer.run(tmp_path / run)
        records = [
            json.loads(line)
            for line in (tmp_path / run / "metrics.jsonl").read_text().splitlines()
        ]
        for rec in records:
            rec.pop("seconds")  # wall time is the one nondeterministic field
        logs.append(json.dumps(records).encode())
    assert logs[0] == logs[1]
