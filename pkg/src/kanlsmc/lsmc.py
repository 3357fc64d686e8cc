"""Backward-induction least-squares Monte Carlo pricing.

Generic over any continuation model exposing fit / predict / input_gradient.
Cashflow bookkeeping keeps exactly one live cashflow per path (amount and
date index); at each decision date k the model is fit on the cross-section
(features at k, cashflows discounted to k) and a path exercises iff its
intrinsic payoff is strictly positive and strictly exceeds the fitted
continuation value. Ties continue.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .market import MarketSpec, PathSet
from .products import Product, features, positive_payoff, signed_payoff


class ContinuationModel(Protocol):
    def fit(self, features, targets): ...

    def predict(self, features) -> np.ndarray: ...

    def input_gradient(self, features) -> np.ndarray: ...


ModelFactory = Callable[[int], ContinuationModel]


@dataclass(frozen=True)
class LsmcConfig:
    market: MarketSpec
    itm_only: bool = False
    fit_dump_dates: tuple[int, ...] = ()
    true_value_fn: Callable[[np.ndarray, int], np.ndarray] | None = None


@dataclass
class PricingResult:
    price: float
    std_error: float
    n_paths: int
    seed: int
    model_kind: str
    early_exercise_fraction: dict[int, float] = field(default_factory=dict)
    fit_mse: dict[int, float] = field(default_factory=dict)
    delta: float | None = None
    delta_std_error: float | None = None

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "model_kind": self.model_kind,
            "delta": self.delta,
            "delta_std_error": self.delta_std_error,
            "early_exercise_fraction": {str(k): v for k, v in self.early_exercise_fraction.items()},
            "fit_mse": {str(k): v for k, v in self.fit_mse.items()},
        }


@dataclass
class FitCurveDump:
    """Per-path fitted continuation values at requested dates.

    rows[k] is (features, f_hat, f_true_or_None); f_true is filled whenever
    the config provides a closed-form reference for the product.
    """

    rows: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray | None]] = field(default_factory=dict)

    def write_csv(self, t_k: int, out_path) -> None:
        feats, f_hat, f_true = self.rows[t_k]
        n, d = feats.shape
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["path_id", "date_index"] + [f"feature_{m + 1}" for m in range(d)] + ["f_hat"]
            writer.writerow(header + ["f_true"])
            for i in range(n):
                row = [i, t_k] + [repr(float(v)) for v in feats[i]] + [repr(float(f_hat[i]))]
                row.append("" if f_true is None else repr(float(f_true[i])))
                writer.writerow(row)


@dataclass
class LsmcOutcome:
    result: PricingResult
    fit_curves: FitCurveDump
    t1_features: np.ndarray
    t1_targets: np.ndarray
    cashflow_amount: np.ndarray
    cashflow_date: np.ndarray


def regression_targets(
    cf_amount: np.ndarray, cf_date: np.ndarray, t_k: int, r_y: float, dt_years: float
) -> np.ndarray:
    """Each path's live cashflow discounted from its date back to t_k."""
    return cf_amount * np.exp(-r_y * (cf_date - t_k) * dt_years)


def lsmc_price(
    paths: PathSet,
    product: Product,
    model_factory: ModelFactory,
    cfg: LsmcConfig,
    model_kind: str = "model",
) -> LsmcOutcome:
    """Price an American-style product by backward induction over the
    product's exercise dates, fitting a fresh continuation model per date."""
    dates = product.exercise_dates
    if dates[-1] > paths.n_steps:
        raise ValueError("paths do not cover the product's exercise dates")
    market = cfg.market
    r_y, dt = market.r_y, paths.dt_years
    n = paths.n_paths

    maturity = dates[-1]
    cf_amount = positive_payoff(product, paths, maturity)
    cf_date = np.full(n, maturity, dtype=np.int64)

    result = PricingResult(
        price=np.nan,
        std_error=np.nan,
        n_paths=n,
        seed=paths.seed,
        model_kind=model_kind,
    )
    dump = FitCurveDump()
    prev_model = None
    t1_features = t1_targets = None

    for t_k in reversed(dates[:-1]):
        targets = regression_targets(cf_amount, cf_date, t_k, r_y, dt)
        feats = features(product, paths, t_k)
        signed = signed_payoff(product, paths, t_k)
        fit_mask = (signed > 0.0) if cfg.itm_only else slice(None)

        no_itm = cfg.itm_only and not np.any(fit_mask)
        if not np.any(targets > 0.0) or no_itm:
            # worthless continuation everywhere (or no ITM paths to regress
            # on in classic mode); nothing to fit
            f_hat = np.zeros(n)
            result.fit_mse[t_k] = 0.0
        else:
            model = model_factory(t_k)
            if model is prev_model or getattr(model, "fit_count", 0) > 0:
                raise RuntimeError(f"model factory returned a reused model at t_{t_k}")
            prev_model = model
            try:
                model.fit(feats[fit_mask], targets[fit_mask])
            except Exception as exc:
                raise type(exc)(f"continuation fit failed at t_{t_k}: {exc}") from exc
            f_hat = np.asarray(model.predict(feats)).reshape(n)
            fitted = f_hat if not cfg.itm_only else f_hat[fit_mask]
            result.fit_mse[t_k] = float(np.mean((fitted - targets[fit_mask]) ** 2))

        if t_k in cfg.fit_dump_dates:
            f_true = cfg.true_value_fn(feats, t_k) if cfg.true_value_fn else None
            dump.rows[t_k] = (feats, f_hat.copy(), f_true)
        if t_k == dates[0]:
            t1_features, t1_targets = feats, targets.copy()

        exercise = (signed > 0.0) & (signed > f_hat)
        cf_amount = np.where(exercise, signed, cf_amount)
        cf_date = np.where(exercise, t_k, cf_date)
        assert (cf_date >= t_k).all(), "cashflow moved before the induction date"
        result.early_exercise_fraction[t_k] = float(exercise.mean())

    discounted = cf_amount * np.exp(-r_y * cf_date * dt)
    result.price = float(discounted.mean())
    result.std_error = float(discounted.std(ddof=1) / np.sqrt(n))
    if t1_features is None:
        # single exercise date: the "t1 model" is fit on maturity payoffs
        t1_features = features(product, paths, maturity)
        t1_targets = cf_amount.copy()
    return LsmcOutcome(
        result=result,
        fit_curves=dump,
        t1_features=t1_features,
        t1_targets=t1_targets,
        cashflow_amount=cf_amount,
        cashflow_date=cf_date,
    )


def eurasian_price(paths: PathSet, product: Product, market: MarketSpec) -> PricingResult:
    """European-exercise value of the product's terminal payoff (no early
    exercise): discounted mean of the positive payoff at maturity."""
    maturity = product.exercise_dates[-1]
    pay = positive_payoff(product, paths, maturity)
    discounted = pay * np.exp(-market.r_y * maturity * paths.dt_years)
    return PricingResult(
        price=float(discounted.mean()),
        std_error=float(discounted.std(ddof=1) / np.sqrt(paths.n_paths)),
        n_paths=paths.n_paths,
        seed=paths.seed,
        model_kind="european",
    )


class AnalyticContinuationModel:
    """Continuation model that returns a closed-form value curve.

    Used to validate the induction bookkeeping independently of any learned
    regressor: value_fn / gradient_fn map the feature matrix at a date to
    the true continuation values and their d/dS.
    """

    def __init__(self, value_fn, gradient_fn=None):
        self.value_fn = value_fn
        self.gradient_fn = gradient_fn
        self.fit_count = 0

    def fit(self, features, targets):
        return {"mse": float("nan")}

    def predict(self, features):
        return self.value_fn(np.asarray(features))

    def input_gradient(self, features):
        if self.gradient_fn is None:
            raise ValueError("no gradient function configured")
        return self.gradient_fn(np.asarray(features))


def write_result_json(result: PricingResult, config_echo: dict, out_path) -> None:
    """Atomic JSON dump of a pricing result with the full resolved config."""
    payload = {"result": result.to_dict(), "config": config_echo}
    tmp = str(out_path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, out_path)
