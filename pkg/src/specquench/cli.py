"""Command-line entry point: config-driven, reproducible experiment runs.

Commands::

    specquench exact      config.yaml   # oracle benchmark over a time grid
    specquench project    config.yaml   # exact windowed projection + bound
    specquench train      config.yaml   # variational decomposition
    specquench dynamics   config.yaml --checkpoint run/checkpoint.npz
    specquench breakdown  config.yaml   # hierarchical refinement

Every run writes the fully resolved config (all defaults filled in) next to
its outputs, so any result can be reproduced from its directory alone.
Output directory resolution: --out flag, then output.directory in the
config, then $SPECQUENCH_OUTDIR/<command>.  Exit codes: 0 success, 1 bad
configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import torch
import yaml

from . import dynamics as dyn
from .ansatz import DenseFamily, MixingMatrix
from .basis import SectorBasis, enumerate_sector, one_hot_state
from .config import ConfigError, ExperimentConfig, load_config
from .exact import diagonalize, exact_evolve, exact_projection, make_windows, spectrum_bounds
from .hamiltonian import SparseHamiltonian, XxzParams, build_xxz
from .hierarchy import ExactSplit, TrainedSplit, leaf_reconstruct, run_breakdown, save_tree
from .network import AutoregressiveFamily
from .output import (
    write_amplitudes,
    write_correlator,
    write_error_curve,
    write_fidelity,
    write_magnetization,
    write_spectrum,
)
from .trainer import TrainSettings, Trainer, build_lambda_grid, load_checkpoint

OUTDIR_ENV = "SPECQUENCH_OUTDIR"


def make_params(cfg: ExperimentConfig) -> XxzParams:
    m = cfg.model
    return XxzParams(J=m.J, Delta=m.Delta, h=m.h, l=m.l, periodic=m.periodic)


def make_system(cfg: ExperimentConfig):
    """(params, basis, H, psi0) for the configured quench."""
    params = make_params(cfg)
    basis = enumerate_sector(cfg.model.l, cfg.n_up)
    H = build_xxz(params, basis)
    psi0 = one_hot_state(basis, cfg.initial_bits())
    return params, basis, H, psi0


def make_family(cfg: ExperimentConfig, psi0: np.ndarray):
    d = cfg.decomposition
    seed = cfg.train.seed
    if d.ansatz == "dense":
        return DenseFamily(psi0, d.states, seed=seed)
    net = d.network
    return AutoregressiveFamily(
        cfg.model.l,
        cfg.n_up,
        d.states,
        cfg.initial_bits(),
        hidden=net.channels,
        kernel=net.kernel,
        dilations=net.dilations,
        seed=seed,
    )


def make_grid(cfg: ExperimentConfig, H: SparseHamiltonian):
    e_min, e_max = spectrum_bounds(H)
    return build_lambda_grid(e_min, e_max, cfg.decomposition.components, cfg.decomposition.lambda_margin)


def resolve_mode(cfg: ExperimentConfig) -> str:
    if cfg.train.mode != "auto":
        return cfg.train.mode
    return "exact" if cfg.decomposition.ansatz == "dense" else "sampled"


def time_grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.times.max, cfg.times.steps)


def _resolve_outdir(args, cfg: ExperimentConfig, command: str) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output.directory:
        return Path(cfg.output.directory)
    root = os.environ.get(OUTDIR_ENV, "runs")
    return Path(root) / command


def _write_echo(out: Path, cfg: ExperimentConfig) -> None:
    resolved = cfg.resolved()
    resolved["fingerprint"] = cfg.fingerprint()
    (out / "resolved_config.yaml").write_text(yaml.safe_dump(resolved, sort_keys=False))


def _observable_tables(basis: SectorBasis, times: np.ndarray, states):
    """Magnetization and correlator tables for a sequence of state vectors."""
    l = basis.l
    mags = np.empty((len(times), l))
    corr = np.empty((len(times), l // 2))
    for row, psi in enumerate(states):
        mags[row] = dyn.magnetization_profile(psi, basis)
        for k in range(1, l // 2 + 1):
            corr[row, k - 1] = dyn.connected_correlator(psi, basis, k)
    return mags, corr


def cmd_exact(cfg: ExperimentConfig, out: Path) -> int:
    _, basis, H, psi0 = make_system(cfg)
    es = diagonalize(H)
    times = time_grid(cfg)
    states = [exact_evolve(es, psi0, t) for t in times]
    mags, corr = _observable_tables(basis, times, states)
    write_spectrum(out / "spectrum.csv", es.energies)
    write_magnetization(out / "magnetization.csv", times, mags)
    write_correlator(out / "correlator.csv", times, corr)
    print(f"exact: dim={basis.dim}, wrote spectrum + observables to {out}")
    return 0


def cmd_project(cfg: ExperimentConfig, out: Path) -> int:
    _, basis, H, psi0 = make_system(cfg)
    es = diagonalize(H)
    n = cfg.decomposition.components
    windows = make_windows(float(es.energies[0]), float(es.energies[-1]), n)
    proj = exact_projection(es, psi0, windows)
    write_amplitudes(out / "amplitudes.csv", proj.lambdas, proj.c**2)
    times = time_grid(cfg)
    err = np.array(
        [np.linalg.norm(exact_evolve(es, psi0, t) - proj.reconstruct(t)) for t in times]
    )
    bound = 0.5 * proj.epsilon * times
    write_error_curve(out / "projection_error.csv", times, err, bound)
    print(
        f"project: N={n}, epsilon={proj.epsilon:.6g}, "
        f"max error {err.max():.3e} (bound {bound.max():.3e})"
    )
    return 0


def cmd_train(cfg: ExperimentConfig, out: Path, resume: str | None = None) -> int:
    params, basis, H, psi0 = make_system(cfg)
    family = make_family(cfg, psi0)
    mixing = MixingMatrix(cfg.decomposition.components, cfg.decomposition.states + 1, seed=cfg.train.seed + 1)
    grid = make_grid(cfg, H)
    mode = resolve_mode(cfg)
    settings = TrainSettings(
        iterations=cfg.train.iterations,
        mode=mode,
        batch=cfg.train.batch,
        lr=cfg.train.lr,
        seed=cfg.train.seed,
        gamma=cfg.sampler.gamma,
        weight_refresh=cfg.sampler.weight_refresh,
        checkpoint_every=cfg.train.checkpoint_every,
    )
    trainer = Trainer(
        family,
        mixing,
        grid,
        settings,
        hamiltonian=H if mode == "exact" else None,
        basis=basis,
        params=params,
        fingerprint=cfg.fingerprint(),
    )
    if resume:
        trainer.resume(resume)
    result = trainer.run(out)
    status = "diverged" if result.diverged else "done"
    print(
        f"train[{mode}]: {status} at iteration {result.iterations_run}, "
        f"loss {result.final_loss:.6g}, checkpoint {result.checkpoint}"
    )
    return 2 if result.diverged else 0


def _load_decomposition(cfg: ExperimentConfig, checkpoint: str):
    params, basis, H, psi0 = make_system(cfg)
    family = make_family(cfg, psi0)
    mixing = MixingMatrix(cfg.decomposition.components, cfg.decomposition.states + 1, seed=cfg.train.seed + 1)
    load_checkpoint(checkpoint, family, mixing, fingerprint=cfg.fingerprint())
    with torch.no_grad():
        if isinstance(family, AutoregressiveFamily):
            states = family.states(basis)
        else:
            states = family.states()
        phi = (mixing.coefficients() @ states).numpy()
    return basis, H, psi0, dyn.SpectralDecomposition.from_components(phi, H)


def cmd_dynamics(cfg: ExperimentConfig, out: Path, checkpoint: str) -> int:
    basis, H, psi0, dec = _load_decomposition(cfg, checkpoint)
    write_amplitudes(out / "amplitudes.csv", dec.lambdas, dec.c2)
    times = time_grid(cfg)
    states = [dyn.reconstruct(dec, t) for t in times]
    mags, corr = _observable_tables(basis, times, states)
    write_magnetization(out / "magnetization.csv", times, mags)
    write_correlator(out / "correlator.csv", times, corr)
    t_c = dyn.coherence_time(dec)
    report = {
        "coherence_time": t_c,
        "weighted_sigma2": dyn.weighted_sigma2(dec),
        "sum_c2": float(dec.c2.sum()),
        "norm_drift_bound": dyn.overlap_drift_bound(dec),
        "initial_state_error": float(np.linalg.norm(dyn.reconstruct(dec, 0.0) - psi0)),
    }
    if basis.dim <= 4096:
        es = diagonalize(H)
        fid = np.array(
            [dyn.fidelity(exact_evolve(es, psi0, t), phi_t) for t, phi_t in zip(times, states)]
        )
        write_fidelity(out / "fidelity.csv", times, fid)
        report["fidelity_at_coherence_time"] = (
            float(dyn.fidelity(exact_evolve(es, psi0, t_c), dyn.reconstruct(dec, t_c)))
            if np.isfinite(t_c)
            else 1.0
        )
    (out / "report.json").write_text(json.dumps(report, indent=2))
    print(f"dynamics: T_c = {t_c:.4g}, report in {out / 'report.json'}")
    return 0


def cmd_breakdown(cfg: ExperimentConfig, out: Path) -> int:
    params, basis, H, psi0 = make_system(cfg)
    b = cfg.breakdown
    counts = b.components_per_level
    if counts is None:
        counts = tuple([cfg.decomposition.components] * (b.depth + 1))
    if b.backend == "exact":
        splits = [ExactSplit(n) for n in counts]
        root_grid = None
    else:
        splits = [
            TrainedSplit(n, cfg.decomposition.states, cfg.train.iterations, cfg.train.lr)
            for n in counts
        ]
        root_grid = make_grid(cfg, H)
    tree = run_breakdown(
        psi0, H, splits, threshold=b.threshold, seed=cfg.train.seed, root_grid=root_grid
    )
    save_tree(tree, out / "tree")
    leaves = tree.live_leaves()
    from .hierarchy import leaf_weighted_sigma2

    sigma2 = leaf_weighted_sigma2(tree)
    times = time_grid(cfg)
    if basis.dim <= 4096:
        es = diagonalize(H)
        err = np.array(
            [
                np.linalg.norm(exact_evolve(es, psi0, t) - leaf_reconstruct(tree, t))
                for t in times
            ]
        )
        write_error_curve(out / "leaf_error.csv", times, err, np.full_like(times, np.nan))
    report = {
        "leaves": len(leaves),
        "nodes": len(tree.nodes),
        "weighted_sigma": float(np.sqrt(sigma2)),
        "t0_error": float(np.linalg.norm(leaf_reconstruct(tree, 0.0) - psi0)),
        "warnings": {n.label: n.warning for n in tree.nodes.values() if n.warning},
    }
    (out / "report.json").write_text(json.dumps(report, indent=2))
    print(f"breakdown: {len(tree.nodes)} nodes, {len(leaves)} live leaves, |sigma| = {np.sqrt(sigma2):.4g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specquench",
        description="Spectral-splitting simulation of quantum quench dynamics",
    )
    parser.add_argument("--threads", type=int, default=None, help="cap worker threads")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("exact", "exact diagonalization benchmark over a time grid"),
        ("project", "exact windowed projection and its error bound"),
        ("train", "variational decomposition training"),
        ("dynamics", "observables from a trained checkpoint"),
        ("breakdown", "hierarchical refinement"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="YAML experiment configuration")
        p.add_argument("--out", help="output directory (overrides config)")
        if name == "train":
            p.add_argument("--resume", help="checkpoint to continue from")
        if name == "dynamics":
            p.add_argument("--checkpoint", required=True, help="trained checkpoint (.npz)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        torch.set_num_threads(args.threads)
    try:
        cfg = load_config(args.config)
    except (ConfigError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    out = _resolve_outdir(args, cfg, args.command)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_echo(out, cfg)
        if args.command == "exact":
            return cmd_exact(cfg, out)
        if args.command == "project":
            return cmd_project(cfg, out)
        if args.command == "train":
            return cmd_train(cfg, out, args.resume)
        if args.command == "dynamics":
            return cmd_dynamics(cfg, out, args.checkpoint)
        return cmd_breakdown(cfg, out)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
