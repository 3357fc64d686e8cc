"""Kolmogorov-Arnold network regression, built from scratch on numpy.

Every edge (i -> j) of a layer carries a learnable univariate function

    f_ji(x) = base_weight[j,i] * silu(x) + sum_b spline_coef[j,i,b] * B_b(x)

where B_b are B-spline basis functions of a fixed uniform grid, and node j
sums its incoming edges. Training is full-batch Adam on the MSE loss with
manually derived gradients; input gradients (needed for pathwise deltas)
come from the same chain rule run down to the raw features.

Inputs are affinely mapped from their training range onto the grid domain
[-1, 1]. Outside the grid the spline part is held at its boundary value
with zero slope (clamped extension); the silu base part is global.

The B-spline basis evaluation is the hot kernel: it runs once per layer per
epoch over every sample. It ships as a numba loop and a vectorized numpy
fallback, selected by accel.BACKEND.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .accel import USE_NUMBA, jit_kernel
from .optim import Adam, NumericsError, TrainConfig

DEFAULT_GRID_SIZE = 5
DEFAULT_SPLINE_ORDER = 3


@dataclass(frozen=True)
class SplineGrid:
    """Uniform knot grid on [lo, hi] with n_intervals segments, degree order.

    The knot vector extends order extra uniform knots past each end, so the
    basis has n_intervals + order functions and forms a partition of unity
    on [lo, hi].
    """

    lo: float = -1.0
    hi: float = 1.0
    n_intervals: int = DEFAULT_GRID_SIZE
    order: int = DEFAULT_SPLINE_ORDER

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")
        if self.n_intervals < 1 or self.order < 1:
            raise ValueError("n_intervals and order must be >= 1")

    @property
    def n_basis(self) -> int:
        return self.n_intervals + self.order

    @property
    def knots(self) -> np.ndarray:
        h = (self.hi - self.lo) / self.n_intervals
        return self.lo + (np.arange(self.n_intervals + 2 * self.order + 1) - self.order) * h


def _bspline_dense_numpy(x, knots, degree, n_intervals):
    """Cox-de Boor over the whole batch at once. Returns (V, D)."""
    lo = knots[degree]
    hi = knots[len(knots) - 1 - degree]
    inside = (x >= lo) & (x <= hi)
    xc = np.clip(x, lo, hi)

    n = x.shape[0]
    m = len(knots) - 1  # number of degree-0 functions
    span = np.clip(
        np.searchsorted(knots, xc, side="right") - 1, degree, degree + n_intervals - 1
    )
    B = np.zeros((n, m))
    B[np.arange(n), span] = 1.0

    prev = None
    for r in range(1, degree + 1):
        if r == degree:
            prev = B.copy()
        d_left = knots[r : m] - knots[:m - r]
        d_right = knots[r + 1 : m + 1] - knots[1 : m - r + 1]
        left = (xc[:, None] - knots[None, :m - r]) / d_left
        right = (knots[None, r + 1 : m + 1] - xc[:, None]) / d_right
        B = left * B[:, : m - r] + right * B[:, 1 : m - r + 1]

    nb = m - degree
    V = B
    # d/dx B_{i,k} = k (B_{i,k-1}/(t_{i+k}-t_i) - B_{i+1,k-1}/(t_{i+k+1}-t_{i+1}))
    d_left = knots[degree:m] - knots[: m - degree]
    d_right = knots[degree + 1 : m + 1] - knots[1 : m - degree + 1]
    D = degree * (prev[:, :nb] / d_left - prev[:, 1 : nb + 1] / d_right)
    D[~inside] = 0.0
    return V, D


def _bspline_dense_loop(x, lo, hi, degree, n_intervals, V, D):
    # uniform-knot de Boor triangle in cell-local coordinates u in [0, 1]:
    # level-r weights reduce to (u + r - j - 1) and (j + 1 - u), and every
    # divisor collapses to r, so no knot array is touched in the inner loop
    h = (hi - lo) / n_intervals
    inv_h = 1.0 / h
    vals = np.zeros(degree + 1)
    prev = np.zeros(degree + 1)
    for t in range(x.shape[0]):
        xv = x[t]
        inside = (xv >= lo) and (xv <= hi)
        xc = min(max(xv, lo), hi)
        cell = int((xc - lo) * inv_h)
        if cell > n_intervals - 1:
            cell = n_intervals - 1
        u = (xc - lo) * inv_h - cell
        vals[0] = 1.0
        for r in range(1, degree + 1):
            if r == degree:
                for j in range(degree):
                    prev[j] = vals[j]
            saved = 0.0
            for j in range(r):
                temp = vals[j] / r
                vals[j] = saved + (j + 1 - u) * temp
                saved = (u + r - j - 1) * temp
            vals[r] = saved
        for j in range(degree + 1):
            V[t, cell + j] = vals[j]
            if inside:
                left = prev[j - 1] if j > 0 else 0.0
                right = prev[j] if j < degree else 0.0
                D[t, cell + j] = (left - right) * inv_h
    return V, D


if USE_NUMBA:
    _bspline_dense_loop = jit_kernel(_bspline_dense_loop)


def bspline_basis_batch(grid: SplineGrid, x: np.ndarray):
    """Basis values and x-derivatives for a flat array of points.

    Returns (V, D), each of shape (len(x), grid.n_basis). Points outside
    [lo, hi] get the boundary values with zero derivative.
    """
    x = np.ascontiguousarray(x, dtype=float)
    if USE_NUMBA:
        V = np.zeros((x.shape[0], grid.n_basis))
        D = np.zeros_like(V)
        _bspline_dense_loop(x, grid.lo, grid.hi, grid.order, grid.n_intervals, V, D)
        return V, D
    return _bspline_dense_numpy(x, grid.knots, grid.order, grid.n_intervals)


def bspline_basis(grid: SplineGrid, x: float):
    """Basis values and derivatives at a single point (vectors of n_basis)."""
    V, D = bspline_basis_batch(grid, np.array([float(x)]))
    return V[0], D[0]


def silu(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s


def silu_grad(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class KanLayer:
    in_dim: int
    out_dim: int
    grid: SplineGrid
    spline_coef: np.ndarray  # (out_dim, in_dim, n_basis)
    base_weight: np.ndarray  # (out_dim, in_dim)

    def basis(self, x):
        """(V, D) with shape (n, in_dim, n_basis) for layer input x (n, in_dim)."""
        n = x.shape[0]
        V, D = bspline_basis_batch(self.grid, x.ravel())
        nb = self.grid.n_basis
        return V.reshape(n, self.in_dim, nb), D.reshape(n, self.in_dim, nb)

    def forward(self, x, basis=None):
        """Returns (y, cache) where cache feeds backward()."""
        V, D = self.basis(x) if basis is None else basis
        sig = _sigmoid(x)
        act = x * sig
        n = x.shape[0]
        flat_v = V.reshape(n, -1)
        flat_c = self.spline_coef.reshape(self.out_dim, -1)
        y = act @ self.base_weight.T + flat_v @ flat_c.T
        return y, (x, V, D, act, sig)

    def backward(self, grad_out, cache):
        """Gradients w.r.t. (spline_coef, base_weight, layer input)."""
        x, V, D, act, sig = cache
        n = x.shape[0]
        d_base = grad_out.T @ act
        d_coef = (grad_out.T @ V.reshape(n, -1)).reshape(self.spline_coef.shape)
        gc = (grad_out @ self.spline_coef.reshape(self.out_dim, -1)).reshape(V.shape)
        d_act = sig * (1.0 + x * (1.0 - sig))
        d_x = (grad_out @ self.base_weight) * d_act + np.einsum("nib,nib->ni", gc, D)
        return d_coef, d_base, d_x


@dataclass
class KanNetwork:
    layers: list[KanLayer]
    affine_scale: np.ndarray  # per raw input
    affine_shift: np.ndarray
    trained: bool = False
    fit_count: int = 0
    seed: int = 0

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    def parameter_count(self) -> int:
        return sum(l.spline_coef.size + l.base_weight.size for l in self.layers)

    def parameters(self) -> list[np.ndarray]:
        params = []
        for layer in self.layers:
            params.append(layer.spline_coef)
            params.append(layer.base_weight)
        return params

    def normalize(self, features: np.ndarray) -> np.ndarray:
        return (features - self.affine_shift) * self.affine_scale


def kan_init(
    dims,
    grid_size: int = DEFAULT_GRID_SIZE,
    spline_order: int = DEFAULT_SPLINE_ORDER,
    seed: int = 0,
    grid_range=(-1.0, 1.0),
) -> KanNetwork:
    """Fresh network: spline coefficients ~ N(0, 0.1/sqrt(n_basis)), base
    weights with fan-in scaling. Deterministic for a given seed."""
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"dims must chain at least two positive sizes, got {dims}")
    grid = SplineGrid(lo=grid_range[0], hi=grid_range[1], n_intervals=grid_size, order=spline_order)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    layers = []
    for in_dim, out_dim in zip(dims[:-1], dims[1:]):
        coef = rng.normal(0.0, 0.1 / np.sqrt(grid.n_basis), size=(out_dim, in_dim, grid.n_basis))
        base = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(out_dim, in_dim))
        layers.append(KanLayer(in_dim, out_dim, grid, coef, base))
    return KanNetwork(
        layers=layers,
        affine_scale=np.ones(dims[0]),
        affine_shift=np.zeros(dims[0]),
        seed=int(seed),
    )


def _forward_cached(net: KanNetwork, z0: np.ndarray, basis0=None):
    caches = []
    x = z0
    for idx, layer in enumerate(net.layers):
        x, cache = layer.forward(x, basis=basis0 if idx == 0 else None)
        caches.append(cache)
    return x, caches


def kan_forward(net: KanNetwork, features: np.ndarray) -> np.ndarray:
    """Predictions, shape (n, out_dim). Features are raw (unnormalized)."""
    feats = _as_2d(features, net.layers[0].in_dim)
    y, _ = _forward_cached(net, net.normalize(feats))
    return y


def kan_input_gradient(net: KanNetwork, features: np.ndarray) -> np.ndarray:
    """d prediction / d raw feature, shape (n, in_dim). out_dim must be 1."""
    if net.layers[-1].out_dim != 1:
        raise ValueError("input gradients need a scalar output head")
    feats = _as_2d(features, net.layers[0].in_dim)
    _, caches = _forward_cached(net, net.normalize(feats))
    g = np.ones((feats.shape[0], 1))
    for layer, cache in zip(reversed(net.layers), reversed(caches)):
        _, _, g = layer.backward(g, cache)
    return g * net.affine_scale


def kan_train(net: KanNetwork, features, targets, cfg: TrainConfig) -> dict:
    """Full-batch Adam on MSE with manually derived gradients.

    Computes the input affine map from the training feature range, keeps the
    best-loss parameters seen, and stops after cfg.early_stop_patience epochs
    without improvement. Raises NumericsError on a non-finite loss.
    """
    feats = _as_2d(np.asarray(features, dtype=float), net.layers[0].in_dim)
    y = np.asarray(targets, dtype=float).reshape(-1, 1)
    if feats.shape[0] != y.shape[0]:
        raise ValueError("features and targets row counts differ")

    lo, hi = net.layers[0].grid.lo, net.layers[0].grid.hi
    fmin, fmax = feats.min(axis=0), feats.max(axis=0)
    spread = fmax - fmin
    scale = np.where(spread > 0, (hi - lo) / np.where(spread > 0, spread, 1.0), 0.0)
    net.affine_shift = (fmax + fmin) / 2.0
    net.affine_scale = scale
    z0 = net.normalize(feats)
    basis0 = net.layers[0].basis(z0)

    params = net.parameters()
    opt = Adam(params, lr=cfg.learning_rate)
    n = feats.shape[0]
    decay_from = int(cfg.epochs * (1.0 - cfg.lr_decay_tail))
    best_loss = np.inf
    best_params = None
    stale = 0
    losses = []
    for epoch in range(cfg.epochs):
        if cfg.lr_decay_tail > 0 and epoch >= decay_from:
            # settle into the loss basin: geometric decay over the tail
            frac = (epoch - decay_from) / max(1, cfg.epochs - decay_from)
            opt.lr = cfg.learning_rate * cfg.lr_decay_factor**frac
        pred, caches = _forward_cached(net, z0, basis0=basis0)
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
        for layer, cache in zip(reversed(net.layers), reversed(caches)):
            d_coef, d_base, g = layer.backward(g, cache)
            grads.append(d_base)
            grads.append(d_coef)
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


class KanRegression:
    """fit/predict/input_gradient continuation model backed by a fresh KAN.

    Each fit() starts from a newly initialized network (per-fit behavior is
    required by the backward-induction loop, which never reuses a model
    across timesteps).
    """

    def __init__(
        self,
        dims,
        grid_size: int = DEFAULT_GRID_SIZE,
        spline_order: int = DEFAULT_SPLINE_ORDER,
        train_cfg: TrainConfig | None = None,
        seed: int = 0,
    ):
        self.dims = list(dims)
        self.grid_size = grid_size
        self.spline_order = spline_order
        self.train_cfg = train_cfg or TrainConfig(seed=seed)
        self.seed = seed
        self.net: KanNetwork | None = None
        self.fit_count = 0

    def fit(self, features, targets):
        self.net = kan_init(
            self.dims, grid_size=self.grid_size, spline_order=self.spline_order, seed=self.seed
        )
        diag = kan_train(self.net, features, targets, self.train_cfg)
        self.fit_count += 1
        return diag

    def predict(self, features):
        return kan_forward(self.net, features)[:, 0]

    def input_gradient(self, features):
        return kan_input_gradient(self.net, features)
