"""Risk-neutral GBM path simulation on a discrete exercise grid.

Paths follow the exact log-Euler scheme

    S_{k+1} = S_k * exp((r - q - sigma^2/2) dt + sigma sqrt(dt) Z),

which is distribution-exact for geometric Brownian motion (no discretization
bias). Randomness comes from a counter-based Philox generator seeded from the
recorded 64-bit seed, so a PathSet is reproducible bit-for-bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

DAY_UNIT = "day"
WEEK_UNIT = "week"

INCLUDE_T0 = "include_t0"
EXCLUDE_T0 = "exclude_t0"


@dataclass(frozen=True)
class MarketSpec:
    """Contract and market parameters shared by all pricing runs.

    sigma_y, r_y and div_y are annualized (volatility as a fraction, rates
    continuously compounded). n_steps is the number of discrete exercise
    dates after t0; periods_per_year is the day-count basis (252 trading
    days or 52 weeks by default, depending on step_unit).
    """

    spot: float
    strike: float
    sigma_y: float
    r_y: float = 0.0
    div_y: float = 0.0
    n_steps: int = 50
    step_unit: str = DAY_UNIT
    periods_per_year: int = 0  # 0 = derive from step_unit

    def __post_init__(self):
        ppy = self.periods_per_year
        if ppy == 0:
            ppy = 252 if self.step_unit == DAY_UNIT else 52
            object.__setattr__(self, "periods_per_year", ppy)
        if self.step_unit not in (DAY_UNIT, WEEK_UNIT):
            raise ValueError(f"step_unit must be 'day' or 'week', got {self.step_unit!r}")
        if not (self.spot > 0 and self.strike > 0):
            raise ValueError("spot and strike must be positive")
        if self.sigma_y < 0:
            raise ValueError("sigma_y must be non-negative")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if ppy < 1:
            raise ValueError("periods_per_year must be >= 1")
        for name in ("spot", "strike", "sigma_y", "r_y", "div_y"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def dt_years(self) -> float:
        return 1.0 / self.periods_per_year

    @property
    def ttm_years(self) -> float:
        return self.n_steps / self.periods_per_year


@dataclass(frozen=True)
class PathSet:
    """Simulated price matrix, n_paths x (n_steps+1), column 0 = spot.

    twap, when present, holds the running arithmetic average of prices
    under the convention recorded in twap_convention. Immutable after
    construction; safe to share across threads.
    """

    prices: np.ndarray
    dt_years: float
    seed: int
    twap: np.ndarray | None = None
    twap_convention: str | None = None

    def __post_init__(self):
        self.prices.setflags(write=False)
        if self.twap is not None:
            self.twap.setflags(write=False)

    @property
    def n_paths(self) -> int:
        return self.prices.shape[0]

    @property
    def n_steps(self) -> int:
        return self.prices.shape[1] - 1


def simulate_gbm(spec: MarketSpec, n_paths: int, seed: int, n_blocks: int = 1) -> PathSet:
    """Simulate risk-neutral GBM paths on the spec's exercise grid.

    Paths are generated in n_blocks contiguous blocks, each from its own
    Philox substream derived from (seed, block index). For a fixed
    (seed, n_blocks) the result is identical whether blocks are filled
    serially or concurrently, which is what makes block-parallel fills safe.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if not 1 <= n_blocks <= n_paths:
        raise ValueError("n_blocks must be in [1, n_paths]")

    dt = spec.dt_years
    drift = (spec.r_y - spec.div_y - 0.5 * spec.sigma_y**2) * dt
    vol_step = spec.sigma_y * np.sqrt(dt)

    prices = np.empty((n_paths, spec.n_steps + 1))
    prices[:, 0] = spec.spot
    bounds = np.linspace(0, n_paths, n_blocks + 1).astype(int)
    for b in range(n_blocks):
        lo, hi = bounds[b], bounds[b + 1]
        if lo == hi:
            continue
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, b))))
        z = rng.standard_normal((hi - lo, spec.n_steps))
        log_steps = drift + vol_step * z
        prices[lo:hi, 1:] = spec.spot * np.exp(np.cumsum(log_steps, axis=1))
    return PathSet(prices=prices, dt_years=dt, seed=seed)


def augment_twap(paths: PathSet, convention: str = INCLUDE_T0) -> PathSet:
    """Return a copy of the PathSet with the running-average channel filled.

    include_t0: twap[w, k] = mean(prices[w, 0..k])
    exclude_t0: twap[w, k] = mean(prices[w, 1..k]), twap[w, 0] = spot
    The price matrix itself is never modified.
    """
    if convention not in (INCLUDE_T0, EXCLUDE_T0):
        raise ValueError(f"unknown TWAP convention {convention!r}")
    prices = paths.prices
    n_paths, n_cols = prices.shape
    csum = np.cumsum(prices, axis=1)
    if convention == INCLUDE_T0:
        twap = csum / np.arange(1, n_cols + 1)
    else:
        twap = np.empty_like(prices)
        twap[:, 0] = prices[:, 0]
        twap[:, 1:] = (csum[:, 1:] - csum[:, [0]]) / np.arange(1, n_cols)
    return PathSet(
        prices=prices,
        dt_years=paths.dt_years,
        seed=paths.seed,
        twap=twap,
        twap_convention=convention,
    )


def discount_factor(r_y: float, dt_years: float) -> float:
    """Continuous-compounding discount factor exp(-r_y * dt_years)."""
    if dt_years < 0:
        raise ValueError("dt_years must be >= 0")
    return float(np.exp(-r_y * dt_years))


def dump_paths_csv(paths: PathSet, out_path) -> None:
    """Write the price matrix to CSV: header row of step indices, one row per path."""
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"t{k}" for k in range(paths.prices.shape[1])])
        for row in paths.prices:
            writer.writerow([repr(float(v)) for v in row])
