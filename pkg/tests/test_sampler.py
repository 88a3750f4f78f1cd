import numpy as np
import pytest
import torch

from specquench.basis import domain_wall_bits, enumerate_sector, group_batch, ungroup_batch
from specquench.network import AutoregressiveFamily
from specquench.sampler import (
    SampleBatch,
    default_weights,
    draw,
    enumerated_batch,
    exact_mixture,
    member_products,
    mixture_probability,
    stepwise_log_probability,
)

BASIS = enumerate_sector(8, 4)


def make_family(n_trainable=3, seed=0):
    return AutoregressiveFamily(8, 4, n_trainable, domain_wall_bits(8), hidden=8, seed=seed)


def test_default_weights_are_column_sums():
    coeff = np.array([[0.5, -1.0, 0.25], [-0.5, 2.0, 0.0]])
    assert np.allclose(default_weights(coeff), [1.0, 3.0, 0.25])
    with pytest.raises(ValueError):
        default_weights(np.zeros((2, 3)))


def test_member_zero_is_point_mass_on_anchor():
    fam = make_family()
    groups = group_batch(BASIS.states, fam.order)
    probs = member_products(fam, groups, gamma=0.5).numpy()
    anchor = group_batch(domain_wall_bits(8)[None, :], fam.order)[0]
    hits = (groups == anchor).all(axis=1)
    assert np.array_equal(probs[0], hits.astype(float))


def test_exact_mixture_normalizes_over_sector():
    fam = make_family()
    w = np.array([1.0, 0.7, 0.2, 0.1])
    for gamma in (0.5, 1.0, 0.25):
        P = exact_mixture(fam, w, BASIS, gamma)
        assert abs(P.sum() - 1.0) < 1e-12
        assert np.all(P >= 0)


def test_gamma_one_member_probability_is_squared_amplitude():
    fam = make_family()
    groups = group_batch(BASIS.states, fam.order)
    probs = member_products(fam, groups, gamma=1.0).numpy()
    vals = fam.values(torch.from_numpy(groups)).detach().numpy()
    assert np.abs(probs - vals**2).max() < 1e-12


def test_stepwise_equals_telescoped_mixture():
    fam = make_family()
    w = np.array([1.0, 0.4, 0.4, 0.2])
    groups = group_batch(BASIS.states, fam.order)
    lp = stepwise_log_probability(fam, w, groups, gamma=0.5)
    P = mixture_probability(fam, w, groups, gamma=0.5)
    assert np.abs(np.exp(lp) - P).max() < 1e-13


def test_draw_is_deterministic_and_consistent():
    fam = make_family()
    w = default_weights(np.abs(np.random.default_rng(0).normal(size=(3, 4))))
    a = draw(fam, w, 500, seed=42)
    b = draw(fam, w, 500, seed=42)
    assert np.array_equal(a.groups, b.groups)
    assert np.array_equal(a.logp, b.logp)
    c = draw(fam, w, 500, seed=43)
    assert not np.array_equal(a.groups, c.groups)
    # reported probabilities are the exact mixture probabilities
    P = mixture_probability(fam, w, a.groups, gamma=0.5)
    assert np.abs(a.prob - P).max() < 1e-14
    assert np.allclose(a.scale, 1.0 / (500 * P))


def test_all_weight_on_pinned_member_samples_the_anchor():
    fam = make_family()
    w = np.array([1.0, 0.0, 0.0, 0.0])
    batch = draw(fam, w, 200, seed=0)
    anchor = group_batch(domain_wall_bits(8)[None, :], fam.order)[0]
    assert np.all(batch.groups == anchor)
    assert np.allclose(batch.prob, 1.0)


def test_draws_follow_the_mixture_distribution():
    fam = make_family(seed=3)
    w = np.array([0.5, 1.0, 0.8, 0.3])
    n = 20000
    batch = draw(fam, w, n, seed=11)
    P = exact_mixture(fam, w, BASIS, gamma=0.5)
    idx = BASIS.index_batch(ungroup_batch(batch.groups, fam.order))
    hist = np.bincount(idx, minlength=BASIS.dim) / n
    tv = 0.5 * np.abs(hist - P).sum()
    assert tv < 0.05


def test_enumerated_batch_covers_sector_once():
    fam = make_family()
    batch = enumerated_batch(BASIS, fam)
    assert batch.size == BASIS.dim
    assert batch.logp is None and batch.prob is None
    assert np.all(batch.scale == 1.0)


def test_sample_batch_validation():
    with pytest.raises(ValueError):
        SampleBatch(groups=np.zeros((3, 2), dtype=np.int64), scale=np.ones(2))


def test_draw_input_validation():
    fam = make_family()
    with pytest.raises(ValueError):
        draw(fam, np.ones(3), 10, seed=0)  # wrong weight count
    with pytest.raises(ValueError):
        draw(fam, np.array([1.0, -1.0, 0.0, 0.0]), 10, seed=0)
    with pytest.raises(ValueError):
        draw(fam, np.ones(4), 0, seed=0)
    with pytest.raises(ValueError):
        draw(fam, np.ones(4), 10, seed=0, gamma=0.0)
