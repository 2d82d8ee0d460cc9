"""Heteroscedastic regression network and its MAP training loop.

A shared rectifier trunk maps ``x`` to penultimate features ``h(x)``. Two
heads read ``h(x)``: a bias-free linear mean head ``W h(x)`` and a scalar
variance head ``softplus(v . h(x) + c) + floor``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NumericError, ShapeError, TrainingError
from .nn_core import (
    InitConfig,
    Layer,
    MlpParams,
    adam_init,
    adam_step,
    backward,
    forward,
    init_mlp,
)

DEFAULT_HIDDEN = (128, 64, 32)
SCHEDULES = ("constant", "step", "geometric")


@dataclass(frozen=True)
class HeteroNet:
    trunk: MlpParams
    mean_head: MlpParams
    var_head: MlpParams
    variance_floor: float = 1e-6

    def __post_init__(self):
        if self.variance_floor <= 0:
            raise ConfigError("variance floor must be positive")
        (mh,) = self.mean_head.layers
        (vh,) = self.var_head.layers
        if mh.bias is not None or mh.activation != "identity":
            raise ConfigError("mean head must be linear and bias-free")
        if vh.out_dim != 1 or vh.activation != "identity":
            raise ConfigError("variance head must emit one raw real")
        if mh.in_dim != self.trunk.layers[-1].out_dim or vh.in_dim != mh.in_dim:
            raise ShapeError("heads do not match the trunk's penultimate width")

    @property
    def p_x(self) -> int:
        return self.trunk.layers[0].in_dim

    @property
    def p_y(self) -> int:
        return self.mean_head.layers[0].out_dim

    @property
    def p_eta(self) -> int:
        return self.mean_head.layers[0].in_dim

    @property
    def mean_weight(self) -> np.ndarray:
        """Last linear unit of the mean, shape ``(p_y, p_eta)``."""
        return self.mean_head.layers[0].weight

    def parts(self) -> tuple[MlpParams, MlpParams, MlpParams]:
        return self.trunk, self.mean_head, self.var_head

    def with_parts(self, parts) -> HeteroNet:
        trunk, mean_head, var_head = parts
        return HeteroNet(trunk, mean_head, var_head, self.variance_floor)

    def with_mean_weight(self, weight) -> HeteroNet:
        weight = np.asarray(weight, dtype=np.float64)
        if weight.shape != self.mean_weight.shape:
            raise ShapeError(f"mean weight shape {weight.shape} != {self.mean_weight.shape}")
        return replace(self, mean_head=MlpParams((Layer(weight, None, "identity"),)))

    def sq_norm(self) -> float:
        return sum(p.sq_norm() for p in self.parts())

    @property
    def num_params(self) -> int:
        return sum(p.num_params for p in self.parts())


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for MAP training of one network.

    ``schedule`` selects how the rate changes over the final
    ``schedule_epochs`` epochs: ``"step"`` multiplies the base rate once by
    ``schedule_factor`` (default 0.1), ``"geometric"`` multiplies it by
    ``schedule_factor`` (default 0.5) again in every one of those epochs.
    """

    epochs: int = 60
    batch_size: int = 64
    lr: float = 1e-3
    lam: float = 0.0
    schedule: str = "step"
    schedule_epochs: int = 5
    schedule_factor: float | None = None
    seed: int = 0
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    variance_floor: float = 1e-6

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if not self.lr > 0:
            raise ConfigError("learning rate must be > 0")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.schedule!r}, expected one of {SCHEDULES}")
        if not self.hidden or any(int(h) <= 0 for h in self.hidden):
            raise ConfigError(f"invalid hidden widths {self.hidden}")

    def lr_at(self, epoch: int) -> float:
        start = self.epochs - self.schedule_epochs
        if self.schedule == "constant" or epoch < start:
            return self.lr
        if self.schedule == "step":
            factor = 0.1 if self.schedule_factor is None else self.schedule_factor
            return self.lr * factor
        factor = 0.5 if self.schedule_factor is None else self.schedule_factor
        return self.lr * factor ** (epoch - start + 1)


def init_hetero_net(p_x: int, p_y: int = 1, hidden=DEFAULT_HIDDEN, seed: int = 0,
                    variance_floor: float = 1e-6) -> HeteroNet:
    hidden = tuple(int(h) for h in hidden)
    if p_x <= 0 or p_y <= 0:
        raise ConfigError(f"invalid dims p_x={p_x}, p_y={p_y}")
    trunk = init_mlp([p_x, *hidden], InitConfig(output_activation="relu", output_bias=True), seed)
    mean_head = init_mlp([hidden[-1], p_y], InitConfig(), seed + 7919)
    var_head = init_mlp([hidden[-1], 1], InitConfig(output_bias=True), seed + 104729)
    return HeteroNet(trunk, mean_head, var_head, variance_floor)


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _as_batch(net: HeteroNet, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.p_x:
        raise ShapeError(f"input shape {x.shape} incompatible with p_x={net.p_x}")
    return x, single


def features(net: HeteroNet, x) -> np.ndarray:
    """Penultimate activations ``h(x)``; shape ``(n, p_eta)`` or ``(p_eta,)``."""
    xb, single = _as_batch(net, x)
    h = forward(net.trunk, xb).output
    return h[0] if single else h


def predict(net: HeteroNet, x):
    """Mean ``W h(x)`` and variance ``sigma^2(x)``.

    Returns arrays of shape ``(n, p_y)`` and ``(n,)`` for a batch, or
    ``(p_y,)`` and a float for a single input vector.
    """
    xb, single = _as_batch(net, x)
    h = forward(net.trunk, xb).output
    mean = h @ net.mean_weight.T
    raw = forward(net.var_head, h).output[:, 0]
    var = _softplus(raw) + net.variance_floor
    if single:
        return mean[0], float(var[0])
    return mean, var


def _check_batch(net, x, y):
    xb, _ = _as_batch(net, x)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None] if net.p_y == 1 and y.shape[0] == xb.shape[0] else y[None, :]
    if y.shape != (xb.shape[0], net.p_y):
        raise ShapeError(f"targets shape {y.shape} != ({xb.shape[0]}, {net.p_y})")
    if xb.shape[0] == 0:
        raise ConfigError("empty batch")
    return xb, y


def nll_loss(net: HeteroNet, x, y, lam: float, n_total: int) -> float:
    """Batch share of the regularized negative log likelihood.

    Summing over disjoint batches that cover the data once gives the
    full-data loss, with the L2 term counted exactly once.
    """
    return loss_and_grads(net, x, y, lam, n_total, need_grads=False)[0]


def loss_and_grads(net: HeteroNet, x, y, lam: float, n_total: int, need_grads: bool = True):
    xb, y = _check_batch(net, x, y)
    n = xb.shape[0]
    if n_total < n:
        raise ConfigError(f"n_total={n_total} smaller than batch size {n}")
    trunk_tr = forward(net.trunk, xb)
    h = trunk_tr.output
    mean = h @ net.mean_weight.T
    var_tr = forward(net.var_head, h)
    raw = var_tr.output[:, 0]
    s = _softplus(raw) + net.variance_floor
    resid = y - mean
    reg_scale = lam * n / n_total
    # overflow here means divergence, which the finiteness check reports
    with np.errstate(over="ignore", invalid="ignore"):
        r2 = np.sum(resid * resid, axis=1)
        loss = 0.5 * float(np.sum(r2 / s + net.p_y * np.log(s))) + 0.5 * reg_scale * net.sq_norm()
    if not np.isfinite(loss):
        raise NumericError("non-finite loss")
    if not need_grads:
        return loss, None

    d_mean = -resid / s[:, None]
    d_s = 0.5 * (net.p_y / s - r2 / (s * s))
    d_raw = (d_s * _sigmoid(raw))[:, None]

    g_mean_w = d_mean.T @ h
    g_var, d_h_var = backward(var_tr, net.var_head, d_raw, return_input_grad=True)
    d_h = d_mean @ net.mean_weight + d_h_var
    g_trunk = backward(trunk_tr, net.trunk, d_h)
    g_mean = MlpParams((Layer(g_mean_w, None, "identity"),))

    grads = []
    for g, p in zip((g_trunk, g_mean, g_var), net.parts()):
        grads.append(g.with_arrays([ga + reg_scale * pa for ga, pa in zip(g.arrays(), p.arrays())]))
    return loss, tuple(grads)


@dataclass
class TrainHistory:
    epoch_losses: list[float] = field(default_factory=list)


def shuffle_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, 0x5F]))


def train_map(data, cfg: TrainConfig, history: TrainHistory | None = None) -> HeteroNet:
    """Minimize the regularized loss with mini-batch Adam from a seeded init.

    ``data`` is any object with ``inputs`` (N x p_x) and ``targets``
    (N x p_y) arrays. Each epoch visits the data in a permutation drawn from
    a stream keyed by ``(cfg.seed, epoch)``.
    """
    x = np.asarray(data.inputs, dtype=np.float64)
    y = np.asarray(data.targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    n = x.shape[0]
    if n == 0:
        raise ConfigError("cannot train on empty data")
    if cfg.batch_size > n:
        raise ConfigError(f"batch size {cfg.batch_size} exceeds data size {n}")
    net = init_hetero_net(x.shape[1], y.shape[1], cfg.hidden, cfg.seed, cfg.variance_floor)
    states = [adam_init(p) for p in net.parts()]
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = shuffle_rng(cfg.seed, epoch).permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            try:
                loss, grads = loss_and_grads(net, x[idx], y[idx], cfg.lam, n)
                stepped = [adam_step(p, g, st, lr) for p, g, st in zip(net.parts(), grads, states)]
            except NumericError as exc:
                raise TrainingError(f"training diverged at epoch {epoch}, batch {b}: {exc}") from exc
            net = net.with_parts([p for p, _ in stepped])
            states = [st for _, st in stepped]
            total += loss
        if history is not None:
            history.epoch_losses.append(total)
    return net
