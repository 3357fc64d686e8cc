"""Polynomial regression bases for the conventional continuation models.

Laguerre, weighted Laguerre and (physicists') Hermite families via their
three-term recurrences:

    L_p(x) = (1/p) [(2p - 1 - x) L_{p-1}(x) - (p - 1) L_{p-2}(x)]
    H_p(x) = 2x H_{p-1}(x) - 2(p - 1) H_{p-2}(x)

with analytic derivatives (L'_p = L'_{p-1} - L_{p-1}, H'_p = 2p H_{p-1}).
Weighted Laguerre multiplies L_p by e^{-x/2}; for x > 1400 the weight is
deep in denormal range, so those entries are zeroed and counted instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LAGUERRE = "laguerre"
WEIGHTED_LAGUERRE = "weighted_laguerre"
HERMITE = "hermite"
MONOMIAL = "monomial"
FAMILIES = (LAGUERRE, WEIGHTED_LAGUERRE, HERMITE, MONOMIAL)

UNDERFLOW_X = 1400.0

_underflow_count = 0


def underflow_count() -> int:
    """Number of weighted-Laguerre evaluations clipped to zero so far."""
    return _underflow_count


def reset_underflow_count() -> None:
    global _underflow_count
    _underflow_count = 0


@dataclass(frozen=True)
class BasisSpec:
    """Which polynomial family to regress on, and how.

    order: maximum polynomial order p per input.
    cross_products: include pairwise products B_i(x1) B_j(x2) with i+j <= p
        (two-input case only).
    normalize_inputs: divide price-like inputs by input_scale (the spot)
        before the polynomial transform.
    """

    family: str
    order: int
    cross_products: bool = False
    normalize_inputs: bool = False
    input_scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.normalize_inputs and not self.input_scale > 0:
            raise ValueError("input_scale must be positive")

    def n_columns(self, n_inputs: int) -> int:
        if n_inputs == 1:
            return 1 + self.order
        cols = 1 + 2 * self.order
        if self.cross_products:
            # pairs (i, j), i,j >= 1, i + j <= order
            cols += (self.order - 1) * self.order // 2
        return cols


def _laguerre_table(order: int, x: np.ndarray):
    """Values and derivatives of L_0..L_order at x, shape (order+1, *x.shape)."""
    vals = np.empty((order + 1,) + x.shape)
    ders = np.empty_like(vals)
    vals[0] = 1.0
    ders[0] = 0.0
    if order >= 1:
        vals[1] = 1.0 - x
        ders[1] = -1.0
    for p in range(2, order + 1):
        vals[p] = ((2 * p - 1 - x) * vals[p - 1] - (p - 1) * vals[p - 2]) / p
        ders[p] = ders[p - 1] - vals[p - 1]
    return vals, ders


def _hermite_table(order: int, x: np.ndarray):
    vals = np.empty((order + 1,) + x.shape)
    ders = np.empty_like(vals)
    vals[0] = 1.0
    ders[0] = 0.0
    if order >= 1:
        vals[1] = 2.0 * x
        ders[1] = 2.0
    for p in range(2, order + 1):
        vals[p] = 2.0 * x * vals[p - 1] - 2.0 * (p - 1) * vals[p - 2]
        ders[p] = 2.0 * p * vals[p - 1]
    return vals, ders


def _monomial_table(order: int, x: np.ndarray):
    vals = np.empty((order + 1,) + x.shape)
    ders = np.empty_like(vals)
    vals[0] = 1.0
    ders[0] = 0.0
    for p in range(1, order + 1):
        vals[p] = vals[p - 1] * x
        ders[p] = p * vals[p - 1]
    return vals, ders


def _weighted_laguerre_table(order: int, x: np.ndarray):
    global _underflow_count
    lv, ld = _laguerre_table(order, x)
    safe = x <= UNDERFLOW_X
    n_clipped = int(np.size(x) - np.count_nonzero(safe))
    if n_clipped:
        _underflow_count += n_clipped
    w = np.where(safe, np.exp(-np.where(safe, x, 0.0) / 2.0), 0.0)
    vals = w * lv
    ders = w * (ld - 0.5 * lv)
    return vals, ders


_TABLES = {
    LAGUERRE: _laguerre_table,
    WEIGHTED_LAGUERRE: _weighted_laguerre_table,
    HERMITE: _hermite_table,
    MONOMIAL: _monomial_table,
}


def family_table(family: str, order: int, x) -> tuple[np.ndarray, np.ndarray]:
    """All orders 0..order of the family at x: (values, d/dx values)."""
    return _TABLES[family](order, np.asarray(x, dtype=float))


def laguerre_eval(p: int, x):
    """(L_p(x), L_p'(x)); scalar in, scalar out."""
    v, d = family_table(LAGUERRE, p, x)
    return v[p], d[p]


def hermite_eval(p: int, x):
    v, d = family_table(HERMITE, p, x)
    return v[p], d[p]


def weighted_laguerre_eval(p: int, x):
    v, d = family_table(WEIGHTED_LAGUERRE, p, x)
    return v[p], d[p]


def cross_pairs(order: int) -> list[tuple[int, int]]:
    """Cross-product index pairs (i, j), i,j >= 1, i + j <= order."""
    return [(i, j) for i in range(1, order) for j in range(1, order - i + 1)]


def design_matrix(spec: BasisSpec, features: np.ndarray) -> np.ndarray:
    """Design matrix for 1 or 2 input columns.

    One input: [1, B_1(x), ..., B_p(x)].
    Two inputs: constant, orders 1..p of each input, then (with
    cross_products) the pairs from cross_pairs. The two-input, order-4,
    cross-product configuration yields 15 columns.
    """
    X, _ = design_matrix_with_grad(spec, features)
    return X


def design_matrix_with_grad(spec: BasisSpec, features: np.ndarray):
    """Design matrix plus its gradient w.r.t. each raw input feature.

    Returns (X, G) with X of shape (n, n_cols) and G of shape
    (n, n_cols, n_inputs), where G[:, c, m] = d X[:, c] / d features[:, m].
    """
    feats = np.asarray(features, dtype=float)
    if feats.ndim == 1:
        feats = feats[:, None]
    n, d = feats.shape
    if d not in (1, 2):
        raise ValueError(f"design_matrix supports 1 or 2 inputs, got {d}")
    if spec.cross_products and d != 2:
        raise ValueError("cross_products requires exactly 2 inputs")

    scale = spec.input_scale if spec.normalize_inputs else 1.0
    z = feats / scale
    p = spec.order
    tables = [family_table(spec.family, p, z[:, m]) for m in range(d)]

    n_cols = spec.n_columns(d)
    X = np.empty((n, n_cols))
    G = np.zeros((n, n_cols, d))
    X[:, 0] = 1.0
    col = 1
    for m in range(d):
        vals, ders = tables[m]
        for order in range(1, p + 1):
            X[:, col] = vals[order]
            G[:, col, m] = ders[order] / scale
            col += 1
    if spec.cross_products and d == 2:
        (v1, d1), (v2, d2) = tables
        for i, j in cross_pairs(p):
            X[:, col] = v1[i] * v2[j]
            G[:, col, 0] = d1[i] * v2[j] / scale
            G[:, col, 1] = v1[i] * d2[j] / scale
            col += 1
    assert col == n_cols
    return X, G


@dataclass
class OlsModel:
    spec: BasisSpec
    coefficients: np.ndarray
    condition_diagnostic: float
    n_obs: int


def ols_fit(X: np.ndarray, y: np.ndarray, spec: BasisSpec | None = None) -> OlsModel:
    """Least-squares fit of X beta ~ y via SVD (minimum-norm on rank deficiency)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] < X.shape[1]:
        raise ValueError(f"need n_obs >= n_columns, got {X.shape}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("design matrix and targets must be finite")
    beta, _, rank, svals = np.linalg.lstsq(X, y, rcond=None)
    cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else float("inf")
    return OlsModel(spec=spec, coefficients=beta, condition_diagnostic=cond, n_obs=X.shape[0])


def ols_predict(model: OlsModel, features: np.ndarray) -> np.ndarray:
    X = design_matrix(model.spec, features)
    return X @ model.coefficients


def ols_input_gradient(model: OlsModel, features: np.ndarray) -> np.ndarray:
    """d prediction / d raw input, shape (n, n_inputs)."""
    _, G = design_matrix_with_grad(model.spec, features)
    return np.einsum("ncm,c->nm", G, model.coefficients)


class OlsRegression:
    """fit/predict/input_gradient continuation model backed by an OLS basis."""

    def __init__(self, spec: BasisSpec):
        self.spec = spec
        self.model: OlsModel | None = None

    def fit(self, features, targets):
        X = design_matrix(self.spec, features)
        self.model = ols_fit(X, targets, spec=self.spec)
        pred = X @ self.model.coefficients
        return {"mse": float(np.mean((pred - np.asarray(targets)) ** 2))}

    def predict(self, features):
        return ols_predict(self.model, features)

    def input_gradient(self, features):
        return ols_input_gradient(self.model, features)
