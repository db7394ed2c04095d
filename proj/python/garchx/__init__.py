"""GARCH(p,q)-X estimation by Gaussian QMLE with FDR-controlled covariate selection."""

import json

from ._core import (
    SCHEMA_VERSION,
    Dataset,
    FitResult,
    NumericalError,
    by_fdr_select,
    gradient,
    objective,
    p_value,
    read_dataset,
    simulate,
    true_theta,
    volatility,
    volatility_gradient,
    write_dataset,
)
from . import _core

__all__ = [
    "SCHEMA_VERSION",
    "Dataset",
    "FitResult",
    "NumericalError",
    "by_fdr_select",
    "fit",
    "gradient",
    "montecarlo",
    "objective",
    "p_value",
    "read_dataset",
    "select",
    "simulate",
    "true_theta",
    "volatility",
    "volatility_gradient",
    "write_dataset",
]


def fit(data, p=1, q=1, **options):
    """Fit a GARCH(p,q)-X model; keyword options follow the config "fit" section."""
    return _core.fit(data, p, q, json.dumps(options) if options else "")


def select(data, p=1, q=1, alpha=0.05, method="by", names=None):
    """Full fit, Wald tests and step-up selection; returns the report as a dict."""
    return json.loads(_core.select_report(data, p, q, alpha, method, list(names or [])))


def montecarlo(config):
    """Run a Monte Carlo plan (config dict); returns (results dict, tables text)."""
    results, tables = _core.run_experiment(json.dumps(config))
    return json.loads(results), tables
