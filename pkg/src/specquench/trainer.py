"""Loss estimation and optimization of the spectral decomposition.

The objective is

    L = (2(N-1)/(L_{N-1}-L_0))^2 sum_i <Phi_i|(H - L_i)^2|Phi_i>,

with target energies L_i on an arithmetic grid spanning the spectrum.  The
prefactor keeps the optimum O(1) as N grows; it degenerates at N = 1 and is
defined as 1 there.  No constraint term is needed: the mixing construction
satisfies sum_i Phi_i = Psi_o identically.

Two estimators are provided.  The exact one materializes components over
the sector and applies the sparse Hamiltonian (desk scale).  The sampled
one expands <Phi|(H-L)^2|Phi> = sum_s |[(H-L)Phi](s)|^2 and importance-
samples the outer sum, evaluating [(H-L)Phi](s) through the O(l) local
connections of each drawn configuration; the residual-squared form keeps
every sample's contribution nonnegative.  Feeding the full enumerated
sector as the "batch" collapses the sampled estimator to the exact sum,
which is how the two routes are cross-checked.

Optimization is plain Adam with the fixed-budget protocol; metrics stream
to a JSON-lines file and parameters checkpoint to ``.npz`` containers with
named arrays and a config fingerprint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from time import perf_counter

import numpy as np
import torch

from .basis import SectorBasis, config_code, group_batch, ungroup_batch
from .hamiltonian import SparseHamiltonian, XxzParams, local_connections
from .network import AutoregressiveFamily
from .sampler import SOFTEN_DEFAULT, SampleBatch, default_weights, draw

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LambdaGrid:
    """Arithmetic target energies L_0 <= ... <= L_{N-1}."""

    lambdas: np.ndarray
    epsilon: float

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        object.__setattr__(self, "lambdas", lam)
        if lam.ndim != 1 or len(lam) < 1:
            raise ValueError("need at least one target energy")
        if len(lam) > 1:
            steps = np.diff(lam)
            if steps.min() <= 0:
                raise ValueError("target energies must increase")
            if not np.allclose(steps, self.epsilon, rtol=1e-12, atol=1e-12):
                raise ValueError("target energies must be an arithmetic sequence")

    @property
    def n(self) -> int:
        return len(self.lambdas)

    def tensor(self) -> torch.Tensor:
        return torch.from_numpy(self.lambdas)


def build_lambda_grid(e_min: float, e_max: float, n: int, margin: float = 0.0) -> LambdaGrid:
    """Grid from spectrum bounds, optionally widened by margin*(span) per side.

    A single-target grid sits at the spectrum midpoint (the endpoint
    formulas coincide only for N > 1).
    """
    if n < 1:
        raise ValueError("need at least one target energy")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    span = e_max - e_min
    if n == 1:
        return LambdaGrid(lambdas=np.array([0.5 * (e_min + e_max)]), epsilon=0.0)
    if span <= 0:
        raise ValueError("degenerate spectrum bounds")
    lo = e_min - margin * span
    hi = e_max + margin * span
    return LambdaGrid(lambdas=np.linspace(lo, hi, n), epsilon=(hi - lo) / (n - 1))


def loss_prefactor(grid: LambdaGrid) -> float:
    """2(N-1)/(L_{N-1}-L_0); 1 by convention for a single target."""
    if grid.n == 1:
        return 1.0
    return 2.0 * (grid.n - 1) / (grid.lambdas[-1] - grid.lambdas[0])


def torch_hamiltonian(H: SparseHamiltonian) -> torch.Tensor:
    """Sector Hamiltonian as a sparse COO tensor usable under autograd."""
    coo = H.matrix.tocoo()
    idx = torch.from_numpy(np.stack([coo.row, coo.col]).astype(np.int64))
    return torch.sparse_coo_tensor(
        idx, torch.from_numpy(coo.data), size=coo.shape, check_invariants=False
    ).coalesce()


def exact_loss_from_components(hmat: torch.Tensor, phi: torch.Tensor, grid: LambdaGrid) -> torch.Tensor:
    """Loss of materialized components phi (N, dim), exact sector sums."""
    resid = torch.sparse.mm(hmat, phi.T).T - grid.tensor()[:, None] * phi
    return loss_prefactor(grid) ** 2 * (resid**2).sum()


def exact_loss(
    hmat: torch.Tensor, states: torch.Tensor, coeff: torch.Tensor, grid: LambdaGrid
) -> torch.Tensor:
    """Exact loss of the ensemble (states (M+1, dim), coefficients (N, M+1))."""
    return exact_loss_from_components(hmat, coeff @ states, grid)


@dataclass
class McEval:
    """One sampled loss evaluation: estimate, error bar, weight estimates."""

    loss: torch.Tensor
    stderr: float
    c2: np.ndarray


def mc_loss(
    params: XxzParams,
    family: AutoregressiveFamily,
    coeff: torch.Tensor,
    grid: LambdaGrid,
    batch: SampleBatch,
) -> McEval:
    """Importance-sampled loss over a batch of configurations.

    Duplicate rows are folded together before any network evaluation, and
    the Hamiltonian acts through the local connection list of each unique
    configuration, so the cost scales with distinct samples, not batch
    size.
    """
    if batch.logp is not None and not np.all(np.isfinite(batch.logp)):
        raise ValueError("batch carries a nonpositive proposal probability")
    groups_u, inverse = np.unique(batch.groups, axis=0, return_inverse=True)
    scale_u = np.zeros(len(groups_u))
    np.add.at(scale_u, inverse, batch.scale)

    configs = ungroup_batch(groups_u, family.order)
    code2col: dict[int, int] = {}
    union: list[np.ndarray] = []
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    sample_col = np.empty(len(configs), dtype=np.int64)
    for k, bits in enumerate(configs):
        for nb_bits, amp in local_connections(params, bits):
            code = config_code(nb_bits)
            col = code2col.get(code)
            if col is None:
                col = len(union)
                code2col[code] = col
                union.append(nb_bits)
            rows.append(k)
            cols.append(col)
            vals.append(amp)
        sample_col[k] = code2col[config_code(bits)]

    union_groups = torch.from_numpy(group_batch(np.stack(union), family.order))
    values = family.values(union_groups)  # (M+1, KU), differentiable
    conn = torch.sparse_coo_tensor(
        torch.tensor([rows, cols], dtype=torch.int64),
        torch.tensor(vals, dtype=torch.float64),
        size=(len(configs), len(union)),
        check_invariants=False,
    ).coalesce()
    h_values = torch.sparse.mm(conn, values.T).T  # (M+1, K): [(H U_j)(s_k)]
    at_samples = values[:, torch.from_numpy(sample_col)]  # (M+1, K)

    comp = coeff @ at_samples  # (N, K): Phi_i(s_k)
    resid = coeff @ h_values - grid.tensor()[:, None] * comp
    f = (resid**2).sum(dim=0)  # (K,)
    pref2 = loss_prefactor(grid) ** 2
    scale_t = torch.from_numpy(scale_u)
    loss = pref2 * (scale_t * f).sum()

    with torch.no_grad():
        c2 = (scale_t * comp**2).sum(dim=1).numpy()
        stderr = 0.0
        if batch.logp is not None and batch.size > 1:
            contrib = pref2 * f.detach().numpy()[inverse] / batch.prob
            stderr = float(contrib.std(ddof=1) / math.sqrt(batch.size))
    return McEval(loss=loss, stderr=stderr, c2=c2)


def gradient(loss: torch.Tensor, modules: dict[str, torch.nn.Module]) -> dict[str, torch.Tensor]:
    """Reverse-mode gradient for every trainable parameter, by name.

    Parameters the loss never touches report zero; any non-finite entry
    raises with the offending parameter named.
    """
    named = [
        (f"{label}.{pname}", p)
        for label, module in modules.items()
        for pname, p in module.named_parameters()
    ]
    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)
    out = {}
    for (name, p), g in zip(named, grads):
        if g is None:
            g = torch.zeros_like(p)
        if not torch.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient in {name}")
        out[name] = g
    return out


@dataclass(frozen=True)
class TrainSettings:
    iterations: int
    mode: str = "exact"  # "exact" (materialized states) or "sampled"
    batch: int = 4000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    gamma: float = SOFTEN_DEFAULT
    weight_refresh: int = 50
    checkpoint_every: int = 0  # 0: only initial and final
    log_c2: bool = True

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("negative iteration budget")
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.batch < 1:
            raise ValueError("batch must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.weight_refresh < 1:
            raise ValueError("weight refresh cadence must be >= 1")


@dataclass
class TrainResult:
    iterations_run: int
    final_loss: float
    diverged: bool
    metrics: list[dict] = field(default_factory=list)
    checkpoint: Path | None = None


def _named_parameters(family: torch.nn.Module, mixing: torch.nn.Module):
    for name, p in family.named_parameters():
        yield f"family.{name}", p
    for name, p in mixing.named_parameters():
        yield f"mixing.{name}", p


def save_checkpoint(
    path: Path | str,
    family: torch.nn.Module,
    mixing: torch.nn.Module,
    optimizer: torch.optim.Adam | None,
    iteration: int,
    grid: LambdaGrid,
    fingerprint: str = "",
) -> None:
    """Named-array container: parameters, Adam moments, grid, fingerprint."""
    arrays: dict[str, np.ndarray] = {
        "version": np.array([CHECKPOINT_VERSION]),
        "iteration": np.array([iteration]),
        "fingerprint": np.array(fingerprint),
        "lambdas": grid.lambdas,
        "epsilon": np.array([grid.epsilon]),
    }
    for name, p in _named_parameters(family, mixing):
        arrays[f"param/{name}"] = p.detach().numpy().copy()
        state = optimizer.state.get(p) if optimizer is not None else None
        if state:
            arrays[f"adam/{name}/exp_avg"] = state["exp_avg"].numpy().copy()
            arrays[f"adam/{name}/exp_avg_sq"] = state["exp_avg_sq"].numpy().copy()
            arrays[f"adam/{name}/step"] = np.array([float(state["step"])])
    np.savez(path, **arrays)


def load_checkpoint(
    path: Path | str,
    family: torch.nn.Module,
    mixing: torch.nn.Module,
    optimizer: torch.optim.Adam | None = None,
    fingerprint: str | None = None,
) -> tuple[int, LambdaGrid]:
    """Restore parameters (and Adam moments, if asked) from a checkpoint.

    Raises on version or fingerprint mismatch so stale artifacts never get
    silently reused.
    """
    data = np.load(path, allow_pickle=False)
    if int(data["version"][0]) != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data['version'][0]}")
    stored = str(data["fingerprint"])
    if fingerprint is not None and stored != fingerprint:
        raise ValueError(f"checkpoint fingerprint {stored!r} != config fingerprint {fingerprint!r}")
    with torch.no_grad():
        for name, p in _named_parameters(family, mixing):
            arr = data[f"param/{name}"]
            if arr.shape != tuple(p.shape):
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {tuple(p.shape)}")
            p.copy_(torch.from_numpy(arr))
            if optimizer is not None and f"adam/{name}/exp_avg" in data:
                optimizer.state[p] = {
                    "step": torch.tensor(float(data[f"adam/{name}/step"][0])),
                    "exp_avg": torch.from_numpy(data[f"adam/{name}/exp_avg"].copy()),
                    "exp_avg_sq": torch.from_numpy(data[f"adam/{name}/exp_avg_sq"].copy()),
                }
    grid = LambdaGrid(lambdas=data["lambdas"].copy(), epsilon=float(data["epsilon"][0]))
    return int(data["iteration"][0]), grid


class Trainer:
    """Fixed-budget Adam loop over a family + mixing matrix.

    ``mode="exact"`` needs the sector Hamiltonian (and a basis when the
    family is autoregressive); ``mode="sampled"`` needs the chain
    parameters so the Hamiltonian can act through local connections.
    """

    def __init__(
        self,
        family: torch.nn.Module,
        mixing: torch.nn.Module,
        grid: LambdaGrid,
        settings: TrainSettings,
        *,
        hamiltonian: SparseHamiltonian | None = None,
        basis: SectorBasis | None = None,
        params: XxzParams | None = None,
        fingerprint: str = "",
    ):
        self.family = family
        self.mixing = mixing
        self.grid = grid
        self.settings = settings
        self.params = params
        self.basis = basis
        self.fingerprint = fingerprint
        self._autoregressive = isinstance(family, AutoregressiveFamily)
        if settings.mode == "exact":
            if hamiltonian is None:
                raise ValueError("exact mode needs the sector Hamiltonian")
            if self._autoregressive and basis is None:
                raise ValueError("exact mode with an autoregressive family needs the basis")
            self.hmat = torch_hamiltonian(hamiltonian)
        else:
            if params is None:
                raise ValueError("sampled mode needs the chain parameters")
            if not self._autoregressive:
                raise ValueError("sampled mode needs an autoregressive family")
            self.hmat = None
        trainable = [p for p in family.parameters() if p.requires_grad]
        trainable += list(mixing.parameters())
        self.optimizer = torch.optim.Adam(
            trainable, lr=settings.lr, betas=(settings.beta1, settings.beta2), eps=settings.adam_eps
        )
        self.iteration = 0

    def _states(self) -> torch.Tensor:
        if self._autoregressive:
            return self.family.states(self.basis)
        return self.family.states()

    def resume(self, checkpoint: Path | str) -> None:
        it, grid = load_checkpoint(
            checkpoint, self.family, self.mixing, self.optimizer, self.fingerprint or None
        )
        if not np.allclose(grid.lambdas, self.grid.lambdas):
            raise ValueError("checkpoint was trained against a different target grid")
        self.iteration = it

    def _sample_seed(self, iteration: int) -> int:
        # Distinct counter-based stream per iteration, disjoint from any
        # other use of the base seed.
        return self.settings.seed * 2**64 + iteration

    def run(self, out_dir: Path | str | None = None) -> TrainResult:
        s = self.settings
        outp: Path | None = None
        metrics_fh = None
        if out_dir is not None:
            outp = Path(out_dir)
            outp.mkdir(parents=True, exist_ok=True)
            metrics_fh = open(outp / "metrics.jsonl", "a")
            if self.iteration == 0:
                self._checkpoint(outp / "checkpoint.npz")

        metrics: list[dict] = []
        final_loss = math.nan
        diverged = False
        weights: np.ndarray | None = None
        try:
            # settings.iterations is the total budget: resuming a finished
            # run is a no-op instead of doubling the work.
            while self.iteration < s.iterations:
                t0 = perf_counter()
                coeff = self.mixing.coefficients()
                if s.mode == "sampled":
                    if weights is None or self.iteration % s.weight_refresh == 0:
                        weights = default_weights(coeff.detach().numpy())
                    batch = draw(
                        self.family, weights, s.batch, self._sample_seed(self.iteration), s.gamma
                    )
                    ev = mc_loss(self.params, self.family, coeff, self.grid, batch)
                    loss, stderr, c2 = ev.loss, ev.stderr, ev.c2
                else:
                    phi = coeff @ self._states()
                    loss = exact_loss_from_components(self.hmat, phi, self.grid)
                    stderr = 0.0
                    c2 = (phi.detach() ** 2).sum(dim=1).numpy()

                loss_val = loss.detach().item()
                record = {
                    "iter": self.iteration,
                    "loss": loss_val,
                    "loss_stderr": stderr,
                    "sum_c2": float(c2.sum()),
                    "seconds": 0.0,
                }
                if s.log_c2:
                    record["c2"] = [float(v) for v in c2]
                if not math.isfinite(loss_val):
                    diverged = True
                    record["seconds"] = perf_counter() - t0
                    metrics.append(record)
                    if metrics_fh:
                        metrics_fh.write(json.dumps(record) + "\n")
                    break

                self.optimizer.zero_grad()
                loss.backward()
                self.optimizer.step()
                self.iteration += 1
                final_loss = loss_val
                record["seconds"] = perf_counter() - t0
                metrics.append(record)
                if metrics_fh:
                    metrics_fh.write(json.dumps(record) + "\n")
                if outp and s.checkpoint_every and self.iteration % s.checkpoint_every == 0:
                    self._checkpoint(outp / f"checkpoint_{self.iteration:06d}.npz")
        finally:
            if metrics_fh:
                metrics_fh.close()

        checkpoint_path = None
        if outp:
            checkpoint_path = outp / "checkpoint.npz"
            if not diverged:
                # A diverging run keeps the last good checkpoint on disk.
                self._checkpoint(checkpoint_path)
        return TrainResult(
            iterations_run=self.iteration,
            final_loss=final_loss,
            diverged=diverged,
            metrics=metrics,
            checkpoint=checkpoint_path,
        )

    def _checkpoint(self, path: Path) -> None:
        save_checkpoint(
            path, self.family, self.mixing, self.optimizer, self.iteration, self.grid, self.fingerprint
        )
