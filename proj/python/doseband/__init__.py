"""Sensitivity intervals for dose-response curves under hidden confounding."""

from ._core import (  # noqa: F401
    BoundSpec,
    Dataset,
    DensityModelConfig,
    Ensemble,
    InputError,
    Mixture,
    Model,
    NumericError,
    SyntheticConfig,
    apo_bounds,
    apo_ci,
    capo_bounds,
    capo_ci,
    conditional_mean,
    fit_ensemble,
    generate,
    hermite_rule,
    lambda_star,
    quantile,
    run_cli,
    train,
    true_apo,
    true_capo,
)

__all__ = [name for name in dir() if not name.startswith("_")]
