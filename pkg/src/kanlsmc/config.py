"""Experiment configuration: schema, file parsing, presets, run assembly.

Config files are flat ``key = value`` text (one pair per line, ``#``
comments). Unknown keys are rejected; every key has a typed schema entry
below, so an emitted resolved config reruns bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import basis, kan, mlp
from .market import EXCLUDE_T0, INCLUDE_T0, MarketSpec, PathSet, augment_twap, simulate_gbm
from .optim import TrainConfig
from .products import ASIAN_AMERICAN_CALL, KINDS, Product, every_step

MODEL_NAMES = ("weighted_laguerre", "hermite", "laguerre_cross", "mlp", "kan")


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration input."""


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_int_list(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(tok) for tok in raw.replace(",", " ").split())


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully resolved run: market, product, model and training knobs."""

    product: str = "american_put"
    spot: float = 4.0
    strike: float = 4.0
    sigma: float = 0.2
    rate: float = 0.0
    dividend: float = 0.0
    n_steps: int = 50
    step_unit: str = "day"
    periods_per_year: int = 0
    twap_convention: str = EXCLUDE_T0

    n_paths: int = 10_000
    seed: int = 11
    model_seed: int = -1  # -1: follow the path seed
    mlp_path_multiplier: int = 10
    itm_only: bool = False

    model: str = "kan"
    basis_order: int = 6
    normalize_basis_inputs: bool = False
    kan_dims: tuple[int, ...] = ()  # () = [d, 2d+1, 1]
    kan_grid_size: int = 5
    kan_spline_order: int = 3
    mlp_dims: tuple[int, ...] = ()  # () = [d, 32, 32, 1]
    mlp_activation: str = "relu"
    learning_rate: float = 1e-2
    epochs: int = 300
    patience: int = 50
    t1_basis_multiplier: int = 2
    fit_dump_dates: tuple[int, ...] = ()
    out_dir: str = "out"

    def __post_init__(self):
        if self.product not in KINDS:
            raise ConfigError(f"product must be one of {KINDS}, got {self.product!r}")
        if self.model not in MODEL_NAMES:
            raise ConfigError(f"model must be one of {MODEL_NAMES}, got {self.model!r}")
        if self.twap_convention not in (INCLUDE_T0, EXCLUDE_T0):
            raise ConfigError(f"bad twap_convention {self.twap_convention!r}")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if self.mlp_path_multiplier < 1:
            raise ConfigError("mlp_path_multiplier must be >= 1")
        for name in ("basis_order", "kan_grid_size", "kan_spline_order", "epochs", "t1_basis_multiplier"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def resolved_model_seed(self) -> int:
        return self.seed if self.model_seed < 0 else self.model_seed

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_FIELD_PARSERS = {
    "product": str,
    "spot": float,
    "strike": float,
    "sigma": float,
    "rate": float,
    "dividend": float,
    "n_steps": int,
    "step_unit": str,
    "periods_per_year": int,
    "twap_convention": str,
    "n_paths": int,
    "seed": int,
    "model_seed": int,
    "mlp_path_multiplier": int,
    "itm_only": _parse_bool,
    "model": str,
    "basis_order": int,
    "normalize_basis_inputs": _parse_bool,
    "kan_dims": _parse_int_list,
    "kan_grid_size": int,
    "kan_spline_order": int,
    "mlp_dims": _parse_int_list,
    "mlp_activation": str,
    "learning_rate": float,
    "epochs": int,
    "patience": int,
    "t1_basis_multiplier": int,
    "fit_dump_dates": _parse_int_list,
    "out_dir": str,
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse key = value lines into a typed dict, rejecting unknown keys."""
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw_line!r}")
        key, raw_val = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _FIELD_PARSERS[key](raw_val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def make_config(*dicts) -> ExperimentConfig:
    """Merge value dicts left to right (later wins) into a validated config."""
    merged = {}
    for d in dicts:
        merged.update({k: v for k, v in d.items() if v is not None})
    for key in merged:
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"unknown key {key!r}")
    coerced = {
        k: tuple(v) if isinstance(v, list) else v  # JSON round-trips tuples as lists
        for k, v in merged.items()
    }
    try:
        return ExperimentConfig(**coerced)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def dump_config_text(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# presets

PRESETS = {
    # at-the-money 50-day put, daily exercise, zero rates
    "table1": {
        "product": "american_put",
        "spot": 4.0,
        "strike": 4.0,
        "sigma": 0.2,
        "rate": 0.0,
        "dividend": 0.0,
        "n_steps": 50,
        "step_unit": "day",
        "periods_per_year": 252,
        "n_paths": 10_000,
        "model": "kan",
        "basis_order": 6,
    },
    # averaged-price call, weekly exercise; column 1 of the four-task set
    "table2": {
        "product": "asian_american_call",
        "spot": 100.0,
        "strike": 100.0,
        "sigma": 0.15,
        "rate": 0.05,
        "dividend": 0.0,
        "n_steps": 13,
        "step_unit": "week",
        "periods_per_year": 52,
        "twap_convention": EXCLUDE_T0,
        "n_paths": 10_000,
        "model": "kan",
        "basis_order": 4,
        "normalize_basis_inputs": True,
    },
    # near-the-money 30-day call for the closed-form-substitution delta check
    "euro-delta": {
        "product": "american_call",
        "spot": 100.0,
        "strike": 102.0,
        "sigma": 0.2,
        "rate": 0.0,
        "dividend": 0.0,
        "n_steps": 30,
        "step_unit": "day",
        "periods_per_year": 250,
        "n_paths": 500_000,
        "model": "kan",
    },
}

# the four (strike, weeks, sigma) tasks of the averaged-price experiment
TABLE2_COLUMNS = (
    {"strike": 100.0, "n_steps": 13, "sigma": 0.15},
    {"strike": 100.0, "n_steps": 13, "sigma": 0.25},
    {"strike": 100.0, "n_steps": 26, "sigma": 0.25},
    {"strike": 105.0, "n_steps": 26, "sigma": 0.25},
)


def preset_values(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (have {sorted(PRESETS)})")
    return dict(PRESETS[name])


# ---------------------------------------------------------------------------
# run assembly

def build_market(cfg: ExperimentConfig) -> MarketSpec:
    try:
        return MarketSpec(
            spot=cfg.spot,
            strike=cfg.strike,
            sigma_y=cfg.sigma,
            r_y=cfg.rate,
            div_y=cfg.dividend,
            n_steps=cfg.n_steps,
            step_unit=cfg.step_unit,
            periods_per_year=cfg.periods_per_year,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_product(cfg: ExperimentConfig) -> Product:
    return every_step(cfg.product, cfg.strike, cfg.n_steps)


def build_paths(cfg: ExperimentConfig, n_paths: int | None = None, seed: int | None = None) -> PathSet:
    market = build_market(cfg)
    paths = simulate_gbm(market, n_paths or cfg.n_paths, cfg.seed if seed is None else seed)
    if cfg.product == ASIAN_AMERICAN_CALL:
        paths = augment_twap(paths, cfg.twap_convention)
    return paths


def timestep_seed(model_seed: int, t_k: int) -> int:
    """Per-timestep model seed: distinct within a run, stable across runs."""
    return model_seed * 1000 + t_k


def train_config(cfg: ExperimentConfig, seed: int) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        seed=seed,
        early_stop_patience=cfg.patience,
    )


def _basis_spec(cfg: ExperimentConfig, model_name: str, order: int) -> basis.BasisSpec:
    family = {
        "weighted_laguerre": basis.WEIGHTED_LAGUERRE,
        "hermite": basis.HERMITE,
        "laguerre_cross": basis.LAGUERRE,
    }[model_name]
    return basis.BasisSpec(
        family=family,
        order=order,
        cross_products=model_name == "laguerre_cross",
        normalize_inputs=cfg.normalize_basis_inputs,
        input_scale=cfg.spot,
    )


def _network_dims(cfg: ExperimentConfig, model_name: str) -> list[int]:
    n_inputs = 2 if cfg.product == ASIAN_AMERICAN_CALL else 1
    if model_name == "kan":
        return list(cfg.kan_dims) if cfg.kan_dims else [n_inputs, 2 * n_inputs + 1, 1]
    return list(cfg.mlp_dims) if cfg.mlp_dims else [n_inputs, 32, 32, 1]


def model_factory(cfg: ExperimentConfig, model_name: str | None = None):
    """Per-timestep continuation-model factory for the backward induction."""
    name = model_name or cfg.model
    if name not in MODEL_NAMES:
        raise ConfigError(f"unknown model {name!r}")
    mseed = cfg.resolved_model_seed

    if name in ("weighted_laguerre", "hermite", "laguerre_cross"):
        spec = _basis_spec(cfg, name, cfg.basis_order)
        return lambda t_k: basis.OlsRegression(spec)
    if name == "kan":
        dims = _network_dims(cfg, "kan")

        def kan_fact(t_k):
            s = timestep_seed(mseed, t_k)
            return kan.KanRegression(
                dims,
                grid_size=cfg.kan_grid_size,
                spline_order=cfg.kan_spline_order,
                train_cfg=train_config(cfg, s),
                seed=s,
            )

        return kan_fact
    dims = _network_dims(cfg, "mlp")

    def mlp_fact(t_k):
        s = timestep_seed(mseed, t_k)
        return mlp.MlpRegression(
            dims, activation=cfg.mlp_activation, train_cfg=train_config(cfg, s), seed=s
        )

    return mlp_fact


def t1_model(cfg: ExperimentConfig, model_name: str | None = None):
    """Model for the first-decision-date refit used by the delta estimator.

    Polynomial bases double their order (t1_basis_multiplier); the network
    models reuse their pricing architecture with a dedicated seed.
    """
    name = model_name or cfg.model
    mseed = cfg.resolved_model_seed
    if name in ("weighted_laguerre", "hermite", "laguerre_cross"):
        spec = _basis_spec(cfg, name, cfg.basis_order * cfg.t1_basis_multiplier)
        return basis.OlsRegression(spec)
    s = timestep_seed(mseed, 0)  # induction dates start at 1, so 0 is free
    if name == "kan":
        return kan.KanRegression(
            _network_dims(cfg, "kan"),
            grid_size=cfg.kan_grid_size,
            spline_order=cfg.kan_spline_order,
            train_cfg=train_config(cfg, s),
            seed=s,
        )
    return mlp.MlpRegression(
        _network_dims(cfg, "mlp"),
        activation=cfg.mlp_activation,
        train_cfg=train_config(cfg, s),
        seed=s,
    )


def mlp_training_paths(cfg: ExperimentConfig) -> PathSet:
    """Enlarged path set for MLP fitting: the shared paths plus extra blocks.

    The first cfg.n_paths rows are exactly the shared path set (same seed),
    so the shared paths are included in the MLP training population.
    """
    market = build_market(cfg)
    n_extra = cfg.n_paths * (cfg.mlp_path_multiplier - 1)
    shared = simulate_gbm(market, cfg.n_paths, cfg.seed)
    if n_extra == 0:
        big = shared
    else:
        extra = simulate_gbm(market, n_extra, cfg.seed + 7_777_777)
        prices = np.vstack([shared.prices, extra.prices])
        big = PathSet(prices=prices, dt_years=shared.dt_years, seed=shared.seed)
    if cfg.product == ASIAN_AMERICAN_CALL:
        big = augment_twap(big, cfg.twap_convention)
    return big
