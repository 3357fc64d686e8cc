"""Baseline multi-layer perceptron regressor with the same contract as the
KAN: fit / predict / input_gradient, full-batch Adam on MSE, manual
forward/backward passes, fresh initialization per fit.

Inputs are standardized (per-feature mean/std from the training data); the
relu subgradient at exactly zero is taken as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optim import Adam, NumericsError, TrainConfig

RELU = "relu"
TANH = "tanh"


@dataclass
class MlpNetwork:
    dims: list[int]
    weights: list[np.ndarray]  # (out, in) per layer
    biases: list[np.ndarray]
    activation: str = RELU
    input_mean: np.ndarray = None
    input_std: np.ndarray = None
    trained: bool = False
    fit_count: int = 0
    seed: int = 0

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list[np.ndarray]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params


def mlp_init(dims, activation: str = RELU, seed: int = 0) -> MlpNetwork:
    """Fan-in-scaled gaussian init, deterministic per seed."""
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"dims must chain at least two positive sizes, got {dims}")
    if activation not in (RELU, TANH):
        raise ValueError(f"activation must be relu or tanh, got {activation!r}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpNetwork(
        dims=dims,
        weights=weights,
        biases=biases,
        activation=activation,
        input_mean=np.zeros(dims[0]),
        input_std=np.ones(dims[0]),
        seed=int(seed),
    )


def _act(z, kind):
    if kind == RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(z, kind):
    if kind == RELU:
        return (z > 0.0).astype(float)
    t = np.tanh(z)
    return 1.0 - t * t


def _forward_cached(net: MlpNetwork, z0: np.ndarray):
    """Linear -> activation through hidden layers, linear output head."""
    caches = []
    a = z0
    last = len(net.weights) - 1
    for idx, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        caches.append((a, z))
        a = z if idx == last else _act(z, net.activation)
    return a, caches


def mlp_predict(net: MlpNetwork, features) -> np.ndarray:
    feats = _as_2d(features, net.dims[0])
    z0 = (feats - net.input_mean) / net.input_std
    y, _ = _forward_cached(net, z0)
    return y


def mlp_input_gradient(net: MlpNetwork, features) -> np.ndarray:
    """d prediction / d raw feature, shape (n, in_dim); scalar output head."""
    if net.dims[-1] != 1:
        raise ValueError("input gradients need a scalar output head")
    feats = _as_2d(features, net.dims[0])
    z0 = (feats - net.input_mean) / net.input_std
    _, caches = _forward_cached(net, z0)
    g = np.ones((feats.shape[0], 1))
    last = len(net.weights) - 1
    for idx in range(last, -1, -1):
        _, z = caches[idx]
        if idx != last:
            g = g * _act_grad(z, net.activation)
        g = g @ net.weights[idx]
    return g / net.input_std


def mlp_train(net: MlpNetwork, features, targets, cfg: TrainConfig) -> dict:
    """Full-batch Adam on MSE; best-loss parameters are kept, early stop
    after cfg.early_stop_patience epochs without improvement."""
    feats = _as_2d(np.asarray(features, dtype=float), net.dims[0])
    y = np.asarray(targets, dtype=float).reshape(-1, 1)
    if feats.shape[0] != y.shape[0]:
        raise ValueError("features and targets row counts differ")

    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    net.input_mean = mean
    net.input_std = np.where(std > 0, std, 1.0)
    z0 = (feats - net.input_mean) / net.input_std

    params = net.parameters()
    opt = Adam(params, lr=cfg.learning_rate)
    n = feats.shape[0]
    last = len(net.weights) - 1
    best_loss = np.inf
    best_params = None
    stale = 0
    losses = []
    for epoch in range(cfg.epochs):
        pred, caches = _forward_cached(net, z0)
        resid = pred - y
        loss = float(np.mean(resid**2))
        if not np.isfinite(loss):
            raise NumericsError(f"non-finite training loss at epoch {epoch}")
        losses.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_params = [p.copy() for p in params]
            stale = 0
        else:
            stale += 1
            if stale > cfg.early_stop_patience:
                break
        g = (2.0 / n) * resid
        grads = []
        for idx in range(last, -1, -1):
            a, z = caches[idx]
            if idx != last:
                g = g * _act_grad(z, net.activation)
            grads.append(g.sum(axis=0))  # bias
            grads.append(g.T @ a)  # weight
            g = g @ net.weights[idx]
        grads.reverse()
        opt.step(grads)

    if best_params is not None:
        for p, best in zip(params, best_params):
            p[...] = best
    net.trained = True
    net.fit_count += 1
    return {"loss_curve": losses, "final_mse": best_loss, "epochs_run": len(losses)}


def _as_2d(features, in_dim):
    feats = np.asarray(features, dtype=float)
    if feats.ndim == 1:
        feats = feats[:, None]
    if feats.shape[1] != in_dim:
        raise ValueError(f"expected {in_dim} feature columns, got {feats.shape[1]}")
    return feats


class MlpRegression:
    """fit/predict/input_gradient continuation model backed by a fresh MLP."""

    def __init__(
        self,
        dims,
        activation: str = RELU,
        train_cfg: TrainConfig | None = None,
        seed: int = 0,
    ):
        self.dims = list(dims)
        self.activation = activation
        self.train_cfg = train_cfg or TrainConfig(seed=seed)
        self.seed = seed
        self.net: MlpNetwork | None = None
        self.fit_count = 0

    def fit(self, features, targets):
        self.net = mlp_init(self.dims, activation=self.activation, seed=self.seed)
        diag = mlp_train(self.net, features, targets, self.train_cfg)
        self.fit_count += 1
        return diag

    def predict(self, features):
        return mlp_predict(self.net, features)[:, 0]

    def input_gradient(self, features):
        return mlp_input_gradient(self.net, features)
