"""Treated/control overlap measured by normalized total variation (NTV).

``ntv`` evaluates the finite-sum total-variation distance between the two
arm-conditional covariate distributions from propensity values alone:
``(1/2n) sum |e(x_i)/p_a - (1 - e(x_i))/(1 - p_a)|``. It is 0 when treatment
is randomized and 1 when the arms have disjoint support. The plug-in variant
estimates it from a learned, optionally calibrated, propensity model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import learners
from .datagen import Dataset, child_seed
from .errors import ConfigurationError, DegenerateDataError

#: default boosted-tree settings for the plug-in propensity model
PLUGIN_GBT = {"learning_rate": 0.1, "max_leaf_nodes": 15, "n_rounds": 40, "min_samples_leaf": 30}
PLUGIN_LOGISTIC_L2 = 1.0
PLUGIN_CALIBRATION_FOLDS = 5


@dataclass(frozen=True)
class OverlapReport:
    ntv: float
    source: str  # "oracle" | "plugin_linear" | "plugin_gbt"
    calibrated: bool
    p_a_hat: float


def ntv(e_values: np.ndarray, p_a: float) -> float:
    """Normalized total variation of a propensity sample; in [0, 1]."""
    if not 0.0 < p_a < 1.0:
        raise ConfigurationError(f"p_a must be in (0, 1), got {p_a}")
    e = np.asarray(e_values, dtype=float)
    if e.size == 0:
        raise ConfigurationError("ntv needs at least one propensity value")
    if np.any(e < 0.0) or np.any(e > 1.0):
        raise ConfigurationError("propensity values must lie in [0, 1]")
    total = float(np.mean(np.abs(e / p_a - (1.0 - e) / (1.0 - p_a)))) / 2.0
    return min(max(total, 0.0), 1.0)


def oracle_report(data: Dataset, p_a: float) -> OverlapReport:
    """NTV from the stored oracle propensities, at a known treatment rate."""
    if data.e is None:
        raise ConfigurationError("oracle NTV needs the dataset's e column")
    return OverlapReport(ntv=ntv(data.e, p_a), source="oracle", calibrated=False, p_a_hat=p_a)


def _oof_scores(x, a, fit_fn, score_fn, folds: int):
    """Out-of-fold raw scores for calibration; folds are contiguous."""
    n = x.shape[0]
    scores = np.empty(n)
    for fold in np.array_split(np.arange(n), folds):
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        if np.unique(a[mask]).size < 2:
            raise DegenerateDataError("calibration fold lost one treatment arm")
        model = fit_fn(x[mask], a[mask])
        scores[fold] = score_fn(model, x[fold])
    return scores


def ntv_plugin(
    data: Dataset,
    model: str = "gbt",
    calibrate: bool = True,
    seed: int = 0,
    train_frac: float = 0.5,
) -> OverlapReport:
    """Estimate NTV with a learned propensity model.

    The data is split once; the model is fitted on the training half and NTV
    is evaluated on the held-out half at the empirical treatment rate. With
    ``calibrate=True`` a logistic map is fitted on out-of-fold scores of the
    training half and applied to the held-out scores.
    """
    if model not in ("linear", "gbt"):
        raise ConfigurationError(f"unknown plug-in model {model!r}")
    a = data.a.astype(float)
    if not ((a == 0).any() and (a == 1).any()):
        raise DegenerateDataError("plug-in NTV needs both treatment arms")

    rng = np.random.default_rng(child_seed(seed, 23))
    perm = rng.permutation(data.n)
    n_train = max(2, int(round(train_frac * data.n)))
    train_idx, eval_idx = perm[:n_train], perm[n_train:]
    if eval_idx.size == 0:
        raise ConfigurationError("train_frac leaves no evaluation rows")
    x_tr, a_tr = data.x[train_idx], a[train_idx]
    if np.unique(a_tr).size < 2:
        raise DegenerateDataError("plug-in NTV training split lost one arm")

    if model == "linear":
        fit_fn = lambda xs, ts: learners.logistic_fit(xs, ts, l2=PLUGIN_LOGISTIC_L2)
        score_fn = lambda m, xs: m.decision(xs)
    else:
        fit_fn = lambda xs, ts: learners.gbt_fit(xs, ts, loss="logistic", **PLUGIN_GBT)
        score_fn = lambda m, xs: m.decision(xs)

    fitted = fit_fn(x_tr, a_tr)
    x_ev = data.x[eval_idx]
    if calibrate:
        oof = _oof_scores(x_tr, a_tr, fit_fn, score_fn, PLUGIN_CALIBRATION_FOLDS)
        platt = learners.platt_calibrate(oof, a_tr)
        e_hat = platt(score_fn(fitted, x_ev))
    else:
        e_hat = learners.sigmoid(score_fn(fitted, x_ev))

    p_a_hat = float(np.mean(a))
    return OverlapReport(
        ntv=ntv(e_hat, p_a_hat),
        source=f"plugin_{model}",
        calibrated=calibrate,
        p_a_hat=p_a_hat,
    )


def tertile_bucket(ntv_values) -> list:
    """Label values as ``strong`` / ``medium`` / ``weak`` overlap tertiles.

    Strong overlap is the lowest-NTV tertile. Values at or below the first
    tertile threshold are strong, values above the second are weak; equal
    values therefore share a bucket (all-equal inputs are all strong).
    """
    values = np.asarray(ntv_values, dtype=float)
    if values.size < 3:
        raise ConfigurationError("tertile_bucket needs at least 3 values")
    t1, t2 = np.quantile(values, [1.0 / 3.0, 2.0 / 3.0])
    labels = []
    for v in values:
        if v <= t1:
            labels.append("strong")
        elif v <= t2:
            labels.append("medium")
        else:
            labels.append("weak")
    return labels
