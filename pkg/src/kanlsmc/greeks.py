"""Pathwise delta estimation through the first-decision-date value.

Each path is valued at the first exercise date t1 as
max(continuation estimate, intrinsic); the option delta is the mean of

    e^{-r t1 dt} * dV/dS_{t1} * S_{t1}/S_0,

where dV/dS_{t1} is the fitted model's input gradient on the continuation
branch and the intrinsic slope (-1 for an ITM put, +1 for an ITM call) on
the exercise branch, and S_{t1}/S_0 is the exact pathwise derivative of the
GBM map. The branch per path is the same rule the pricer uses: exercise iff
intrinsic is strictly positive and strictly exceeds the fitted value, so
ties sit on the continuation branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lsmc import AnalyticContinuationModel, ContinuationModel, LsmcConfig, LsmcOutcome, lsmc_price
from .market import MarketSpec, PathSet, simulate_gbm
from .oracle import BsInputs, bs_delta_curve, bs_price_curve
from .products import AMERICAN_CALL, ASIAN_AMERICAN_CALL, Product, every_step, features, signed_payoff


@dataclass
class DeltaResult:
    delta: float
    std_error: float
    n_paths: int
    model_kind: str
    exercise_branch_fraction: float

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "model_kind": self.model_kind,
            "exercise_branch_fraction": self.exercise_branch_fraction,
        }


def fit_t1_model(
    paths: PathSet,
    product: Product,
    t1_model: ContinuationModel,
    cfg: LsmcConfig,
    pricing_factory=None,
    outcome: LsmcOutcome | None = None,
) -> ContinuationModel:
    """Fit a model of the continuation value at the first exercise date.

    Targets are the realized cashflows of a completed backward-induction
    run, discounted to t1 (the same cross-section the pricer regressed on at
    its final step). Pass a finished outcome to reuse it, or a pricing
    factory to run the induction here.
    """
    if outcome is None:
        if pricing_factory is None:
            raise ValueError("need either a pricing_factory or a finished outcome")
        outcome = lsmc_price(paths, product, pricing_factory, cfg)
    t1_model.fit(outcome.t1_features, outcome.t1_targets)
    return t1_model


def delta_estimate(
    paths: PathSet,
    product: Product,
    t1_model: ContinuationModel,
    market: MarketSpec,
    model_kind: str = "model",
) -> DeltaResult:
    """Pathwise delta from the fitted t1 value; American puts/calls only."""
    if product.kind == ASIAN_AMERICAN_CALL:
        raise ValueError("pathwise delta is only defined for the plain American kinds")
    t1 = product.exercise_dates[0]
    feats = features(product, paths, t1)
    s1 = paths.prices[:, t1]
    f_hat = np.asarray(t1_model.predict(feats)).reshape(-1)
    signed = signed_payoff(product, paths, t1)

    exercise = (signed > 0.0) & (signed > f_hat)
    slope = np.asarray(t1_model.input_gradient(feats))[:, 0]
    intrinsic_slope = 1.0 if product.kind == AMERICAN_CALL else -1.0
    dv = np.where(exercise, intrinsic_slope, slope)

    disc = np.exp(-market.r_y * t1 * paths.dt_years)
    contrib = disc * dv * (s1 / market.spot)
    return DeltaResult(
        delta=float(contrib.mean()),
        std_error=float(contrib.std(ddof=1) / np.sqrt(paths.n_paths)),
        n_paths=paths.n_paths,
        model_kind=model_kind,
        exercise_branch_fraction=float(exercise.mean()),
    )


def analytic_t1_model(market: MarketSpec, product: Product) -> AnalyticContinuationModel:
    """Closed-form European-value stand-in for the fitted t1 model.

    Continuation at t1 is the European value of the remaining life
    (maturity - t1 steps); used to validate the delta estimator free of any
    learned regressor.
    """
    t1 = product.exercise_dates[0]
    ttm = (product.maturity_index - t1) * market.dt_years
    kind = "call" if product.kind == AMERICAN_CALL else "put"
    inp = BsInputs(
        s=market.spot,
        k=product.strike,
        sigma=market.sigma_y,
        r=market.r_y,
        q=market.div_y,
        ttm_years=ttm,
        kind=kind,
    )
    return AnalyticContinuationModel(
        value_fn=lambda f: bs_price_curve(f[:, 0], inp),
        gradient_fn=lambda f: bs_delta_curve(f[:, 0], inp)[:, None],
    )


def perfect_fit_delta_check(
    n_paths: int = 500_000,
    seed: int = 20240,
    spot: float = 100.0,
    strike: float = 102.0,
    sigma_y: float = 0.2,
    n_steps: int = 30,
    periods_per_year: int = 250,
) -> DeltaResult:
    """Run the estimator with the closed-form call value substituted for the
    fitted t1 model (a European setting, so every path continues).

    Defaults reproduce the 30-day at/near-the-money call whose closed-form
    delta on a 250-day basis is 0.4008.
    """
    market = MarketSpec(
        spot=spot,
        strike=strike,
        sigma_y=sigma_y,
        n_steps=n_steps,
        periods_per_year=periods_per_year,
    )
    paths = simulate_gbm(market, n_paths, seed)
    product = every_step(AMERICAN_CALL, strike, n_steps)
    model = analytic_t1_model(market, product)
    return delta_estimate(paths, product, model, market, model_kind="closed_form_t1")
