"""Sum-pooled network models and a deterministic trainer.

A model is rho(sum_i phi(x_i)) with both maps given by small dense networks.
Evaluation canonicalizes the input and pools with compensated summation in
sorted order, so the value is bit-identical under permutation. The trainer is
plain seeded gradient descent (optional cosine decay) on canonicalized uniform
samples — deterministic down to the parameter bits given the config.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._jsonio import SCHEMA_VERSION, config_hash, dump_file, load_file
from .approx.phispec import PhiSpec
from .errors import ConfigError, DivergenceError, ShapeError
from .mlp import Mlp
from .powersum import kahan_sum
from .sets import as_set_input, canonicalize, f_star

TASKS = ("f_star", "max")
DECAYS = ("none", "cosine")
DATA_SPECS = ("uniform", "uniform+grid")


@dataclass
class DeepSetsModel:
    """rho(sum phi): an elementwise encoder net (1 -> N), summation, readout net (N -> 1)."""

    phi_net: Mlp
    N: int
    rho_net: Mlp

    def __post_init__(self):
        if self.phi_net.layer_sizes[0] != 1 or self.phi_net.layer_sizes[-1] != self.N:
            raise ConfigError(
                f"encoder net must map 1 -> {self.N}, got {self.phi_net.layer_sizes}"
            )
        if self.rho_net.layer_sizes[0] != self.N or self.rho_net.layer_sizes[-1] != 1:
            raise ConfigError(
                f"readout net must map {self.N} -> 1, got {self.rho_net.layer_sizes}"
            )

    @property
    def encoder_spec(self):
        """The encoder as a declarative spec sharing this model's network."""
        return PhiSpec("mlp", self.N, self.phi_net)

    def pooled(self, x):
        """sum_i phi(x_i) over the canonical ordering, compensated summation."""
        u = canonicalize(x)
        return kahan_sum(self.phi_net.forward(u[:, None]), axis=0)

    def rho_latent(self, s):
        """Readout applied to a latent vector."""
        return float(self.rho_net.forward(np.asarray(s, dtype=float))[0])

    def __call__(self, x):
        return self.rho_latent(self.pooled(x))

    def to_config(self):
        return {
            "schema": SCHEMA_VERSION,
            "N": self.N,
            "phi": self.phi_net.to_config(),
            "rho": self.rho_net.to_config(),
        }

    @classmethod
    def from_config(cls, cfg):
        try:
            return cls(Mlp.from_config(cfg["phi"]), int(cfg["N"]), Mlp.from_config(cfg["rho"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed model config: {exc}") from None


def deepsets_eval(model, x):
    """rho(sum phi(x_i)); exactly permutation-invariant."""
    return model(as_set_input(x))


def grad(net, X, loss):
    """Reverse-mode parameter gradient of a scalar batch loss.

    loss maps the raw output array (rows, out_dim) to (value, d value/d output).
    An Mlp returns (weight_grads, bias_grads); a sum-pooled model treats rows
    of X as set inputs and returns ((phi_wg, phi_bg), (rho_wg, rho_bg)).
    """
    if isinstance(net, DeepSetsModel):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ShapeError(f"expected a batch of set rows, got shape {X.shape}")
        B, M = X.shape
        feats, phi_trace = net.phi_net.forward_trace(X.reshape(-1, 1))
        pooled = feats.reshape(B, M, net.N).sum(axis=1)
        pred, rho_trace = net.rho_net.forward_trace(pooled)
        _, g = loss(pred)
        rho_wg, rho_bg, grad_pooled = net.rho_net.backward(rho_trace, g)
        phi_wg, phi_bg, _ = net.phi_net.backward(phi_trace, np.repeat(grad_pooled, M, axis=0))
        return (phi_wg, phi_bg), (rho_wg, rho_bg)
    out, trace = net.forward_trace(np.atleast_2d(np.asarray(X, dtype=float)))
    _, g = loss(out)
    wg, bg, _ = net.backward(trace, np.asarray(g, dtype=float))
    return wg, bg


@dataclass
class TrainConfig:
    """Everything a training run depends on; two equal configs train equal bits."""

    task: str
    M: int
    N: int
    seed: int
    epochs: int = 2000
    batch: int = 256
    step: float = 0.05
    decay: str = "cosine"
    data: str = "uniform+grid"
    n_samples: int = 2048
    phi_hidden: tuple = (32, 32)
    rho_hidden: tuple = (32, 32)
    grid_resolution: int = 21

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.decay not in DECAYS:
            raise ConfigError(f"unknown decay {self.decay!r}; expected one of {DECAYS}")
        if self.data not in DATA_SPECS:
            raise ConfigError(f"unknown data spec {self.data!r}; expected one of {DATA_SPECS}")
        for name in ("M", "N", "epochs", "batch", "n_samples", "grid_resolution"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.step <= 0:
            raise ConfigError("step size must be positive")
        if self.seed is None:
            raise ConfigError("seed is mandatory")
        self.phi_hidden = tuple(int(h) for h in self.phi_hidden)
        self.rho_hidden = tuple(int(h) for h in self.rho_hidden)

    def to_config(self):
        return {
            "schema": SCHEMA_VERSION,
            "task": self.task,
            "M": self.M,
            "N": self.N,
            "seed": self.seed,
            "epochs": self.epochs,
            "batch": self.batch,
            "step": self.step,
            "decay": self.decay,
            "data": self.data,
            "n_samples": self.n_samples,
            "phi_hidden": list(self.phi_hidden),
            "rho_hidden": list(self.rho_hidden),
            "grid_resolution": self.grid_resolution,
        }

    @classmethod
    def from_config(cls, cfg):
        try:
            return cls(
                task=cfg["task"],
                M=int(cfg["M"]),
                N=int(cfg["N"]),
                seed=int(cfg["seed"]),
                epochs=int(cfg.get("epochs", 2000)),
                batch=int(cfg.get("batch", 256)),
                step=float(cfg.get("step", 0.05)),
                decay=cfg.get("decay", "cosine"),
                data=cfg.get("data", "uniform+grid"),
                n_samples=int(cfg.get("n_samples", 2048)),
                phi_hidden=tuple(cfg.get("phi_hidden", (32, 32))),
                rho_hidden=tuple(cfg.get("rho_hidden", (32, 32))),
                grid_resolution=int(cfg.get("grid_resolution", 21)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed train config: {exc}") from None

    def content_hash(self):
        cfg = self.to_config()
        cfg.pop("schema")
        return config_hash(cfg)


def _target(task, rows):
    """Per-row training target on canonicalized rows."""
    if task == "f_star":
        return np.array([f_star(r) for r in rows])
    return rows[:, 0].copy()  # canonical rows are descending, so max is first


def canonical_grid(M, resolution):
    """All descending M-tuples from a uniform grid on [-1, 1] (one per multiset)."""
    axis = np.linspace(1.0, -1.0, resolution)
    return np.array(list(itertools.combinations_with_replacement(axis, M)))


def _batch_eval(model, rows):
    """Model values on many canonical rows at once (plain-sum pooling)."""
    B, M = rows.shape
    feats = model.phi_net.forward(rows.reshape(-1, 1)).reshape(B, M, model.N)
    return model.rho_net.forward(feats.sum(axis=1))[:, 0]


def grid_error(model, task, M, resolution):
    """Max |model - target| over the canonical grid (C(resolution+M-1, M) points)."""
    grid = canonical_grid(M, resolution)
    return float(np.max(np.abs(_batch_eval(model, grid) - _target(task, grid))))


def train(config):
    """Seeded full-precision gradient descent; returns (model, metrics).

    Data is uniform over the cube, canonicalized before the loss so capacity
    is not spent on permutation copies. Raises DivergenceError the moment the
    loss stops being finite.
    """
    rng = np.random.default_rng(config.seed)
    X = np.sort(rng.uniform(-1.0, 1.0, size=(config.n_samples, config.M)), axis=1)[:, ::-1]
    if config.data == "uniform+grid":
        # uniform canonical sampling under-covers near-equal coordinates, which
        # is exactly where recovering order statistics from the pooled latent
        # is worst-conditioned; a coarse canonical grid patches that
        X = np.concatenate([X, canonical_grid(config.M, config.grid_resolution)])
    y = _target(config.task, X)
    n_rows = X.shape[0]

    phi = Mlp.init(
        [1, *config.phi_hidden, config.N],
        ["tanh"] * len(config.phi_hidden) + ["identity"],
        seed=config.seed,
    )
    rho = Mlp.init(
        [config.N, *config.rho_hidden, 1],
        ["tanh"] * len(config.rho_hidden) + ["identity"],
        seed=config.seed + 1,
    )

    losses = []
    for epoch in range(config.epochs):
        lr = config.step
        if config.decay == "cosine":
            lr *= 0.5 * (1.0 + math.cos(math.pi * epoch / config.epochs))
        order = rng.permutation(n_rows)
        epoch_loss = 0.0
        for lo in range(0, n_rows, config.batch):
            idx = order[lo : lo + config.batch]
            xb, yb = X[idx], y[idx]
            B, M = xb.shape

            with np.errstate(over="ignore", invalid="ignore"):
                feats, phi_trace = phi.forward_trace(xb.reshape(-1, 1))
                pooled = feats.reshape(B, M, config.N).sum(axis=1)
                pred, rho_trace = rho.forward_trace(pooled)
                resid = pred[:, 0] - yb
                loss = float(np.mean(resid**2))
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"loss became non-finite at epoch {epoch}; lower the step size"
                )
            epoch_loss += loss * B

            grad_pred = (2.0 / B) * resid[:, None]
            rho_wg, rho_bg, grad_pooled = rho.backward(rho_trace, grad_pred)
            grad_feats = np.repeat(grad_pooled, M, axis=0)
            phi_wg, phi_bg, _ = phi.backward(phi_trace, grad_feats)

            for net, wg, bg in ((rho, rho_wg, rho_bg), (phi, phi_wg, phi_bg)):
                for i in range(len(net.weights)):
                    net.weights[i] -= lr * wg[i]
                    net.biases[i] -= lr * bg[i]
        losses.append(epoch_loss / n_rows)

    model = DeepSetsModel(phi, config.N, rho)
    metrics = {
        "loss_curve": losses,
        "final_loss": losses[-1],
        "grid_max_error": grid_error(model, config.task, config.M, config.grid_resolution),
        "init": "uniform(-r, r), r = 1/sqrt(fan_in)",
        "seed": config.seed,
        "config_hash": config.content_hash(),
    }
    return model, metrics


def save_checkpoint(model, config, path, metrics=None):
    """JSON checkpoint: layer sizes, activations, row-major weights, config hash, seed."""
    payload = model.to_config()
    payload["config"] = config.to_config()
    payload["config_hash"] = config.content_hash()
    payload["seed"] = config.seed
    if metrics is not None:
        payload["metrics"] = {k: v for k, v in metrics.items() if k != "loss_curve"}
    dump_file(payload, path)


def load_checkpoint(path):
    """Returns (model, payload dict with config/config_hash/seed back out)."""
    payload = load_file(path)
    return DeepSetsModel.from_config(payload), payload
