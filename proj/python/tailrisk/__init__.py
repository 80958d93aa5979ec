"""Bayesian joint VaR/ES models with realized measures."""

from ._tailrisk import (
    InputError,
    MarketSeries,
    ModelSpec,
    NumericalError,
    alpha_constants,
    filter_path,
    fit,
    integrated_loglik,
    joint_loss,
    load_market_csv,
    map_true_params,
    mcs,
    one_step_forecast,
    quantile_loss,
    rank_table,
    simulate_regarch,
    to_volatility_scale,
    vrate,
)

__version__ = "0.1.0"

__all__ = [
    "InputError",
    "MarketSeries",
    "ModelSpec",
    "NumericalError",
    "alpha_constants",
    "filter_path",
    "fit",
    "integrated_loglik",
    "joint_loss",
    "load_market_csv",
    "map_true_params",
    "mcs",
    "one_step_forecast",
    "quantile_loss",
    "rank_table",
    "simulate_regarch",
    "to_volatility_scale",
    "vrate",
]
