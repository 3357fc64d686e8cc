"""Option contracts: exercise payoffs and regression features per date."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import PathSet

AMERICAN_PUT = "american_put"
AMERICAN_CALL = "american_call"
ASIAN_AMERICAN_CALL = "asian_american_call"
KINDS = (AMERICAN_PUT, AMERICAN_CALL, ASIAN_AMERICAN_CALL)


@dataclass(frozen=True)
class Product:
    """Contract kind, strike and the decision-date indices on the path grid.

    exercise_dates indexes columns of the PathSet price matrix; the last
    entry is the maturity index. Exercise at t0 is excluded (the induction
    grid starts at the first date after t0).
    """

    kind: str
    strike: float
    exercise_dates: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown product kind {self.kind!r}")
        if self.strike <= 0:
            raise ValueError("strike must be positive")
        dates = tuple(int(d) for d in self.exercise_dates)
        if not dates or list(dates) != sorted(set(dates)) or dates[0] < 1:
            raise ValueError("exercise_dates must be non-empty, sorted, unique, >= 1")
        object.__setattr__(self, "exercise_dates", dates)

    @property
    def maturity_index(self) -> int:
        return self.exercise_dates[-1]

    @property
    def n_features(self) -> int:
        return 2 if self.kind == ASIAN_AMERICAN_CALL else 1

    @property
    def needs_twap(self) -> bool:
        return self.kind == ASIAN_AMERICAN_CALL

    @property
    def is_put(self) -> bool:
        return self.kind == AMERICAN_PUT


def every_step(kind: str, strike: float, n_steps: int) -> Product:
    """Product exercisable at every simulated step 1..n_steps."""
    return Product(kind=kind, strike=strike, exercise_dates=tuple(range(1, n_steps + 1)))


def signed_payoff(product: Product, paths: PathSet, t_k: int) -> np.ndarray:
    """Signed exercise payoff per path: K - S (put), S - K (call), TWAP - K (asian)."""
    _check_date(product, paths, t_k)
    if product.kind == AMERICAN_PUT:
        return product.strike - paths.prices[:, t_k]
    if product.kind == AMERICAN_CALL:
        return paths.prices[:, t_k] - product.strike
    return paths.twap[:, t_k] - product.strike


def positive_payoff(product: Product, paths: PathSet, t_k: int) -> np.ndarray:
    """max(signed payoff, 0)."""
    return np.maximum(signed_payoff(product, paths, t_k), 0.0)


def features(product: Product, paths: PathSet, t_k: int) -> np.ndarray:
    """Regression features at t_k: [S] or [S, TWAP], shape (n_paths, 1 or 2)."""
    _check_date(product, paths, t_k)
    if product.kind == ASIAN_AMERICAN_CALL:
        return np.column_stack([paths.prices[:, t_k], paths.twap[:, t_k]])
    return paths.prices[:, t_k : t_k + 1].copy()


def _check_date(product: Product, paths: PathSet, t_k: int):
    if not 0 <= t_k <= paths.n_steps:
        raise ValueError(f"date index {t_k} outside path grid 0..{paths.n_steps}")
    if product.needs_twap and paths.twap is None:
        raise ValueError("product needs the TWAP channel; call augment_twap first")
