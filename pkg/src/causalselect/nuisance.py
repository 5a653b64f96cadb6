"""Nuisance pair (propensity and mean-outcome models) with clipping.

The feasible causal risks need two auxiliary estimates: the probability of
treatment given covariates and the outcome mean marginal over treatment.
Both are fitted here with a randomized hyperparameter search, either as
plain linear models or as a convex stack of a linear model and boosted
trees; the oracle passthrough reads the true columns of simulated data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import learners
from .datagen import Dataset, child_seed
from .errors import ConfigurationError, DataError, DegenerateDataError

DEFAULT_ETA_CLIP = 1e-10

# hyperparameter grids for the randomized search
RIDGE_LAMBDAS = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
LOGISTIC_C = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
GBT_LEARNING_RATES = (0.01, 0.1, 1.0)
GBT_MAX_LEAF_NODES = (10, 20, 30, 50)


def clip_propensity(e_values: np.ndarray, eta: float) -> np.ndarray:
    """Bound propensities into ``[eta, 1 - eta]``; order-preserving inside."""
    if not 0.0 < eta < 0.5:
        raise ConfigurationError(f"eta must be in (0, 0.5), got {eta}")
    return np.clip(np.asarray(e_values, dtype=float), eta, 1.0 - eta)


@dataclass
class NuisancePair:
    """Fitted (or oracle) propensity and mean-outcome estimates.

    ``propensity`` always returns values clipped into
    ``[eta_clip, 1 - eta_clip]``. With oracle provenance both methods read
    the evaluation dataset's own oracle columns.
    """

    e_hat: object  # model with predict_proba, or the oracle column
    m_hat: object  # model with predict, or the oracle column
    eta_clip: float
    provenance: str  # "oracle" | "linear" | "stacked"
    chosen: dict = field(default_factory=dict)

    def propensity(self, data: Dataset) -> np.ndarray:
        if self.provenance == "oracle":
            if data.e is None:
                raise DataError("oracle nuisances need the dataset's e column")
            raw = data.e
        else:
            raw = self.e_hat.predict_proba(data.x)
        return clip_propensity(raw, self.eta_clip)

    def mean_outcome(self, data: Dataset) -> np.ndarray:
        if self.provenance == "oracle":
            if data.e is None or data.mu0 is None or data.mu1 is None:
                raise DataError("oracle nuisances need e, mu_0 and mu_1 columns")
            return data.e * data.mu1 + (1.0 - data.e) * data.mu0
        return self.m_hat.predict(data.x)


def oracle_nuisances(data: Dataset, eta_clip: float = DEFAULT_ETA_CLIP) -> NuisancePair:
    """Passthrough of the true nuisances of a simulated dataset.

    The mean outcome is expanded analytically as
    ``m(x) = e(x) mu_1(x) + (1 - e(x)) mu_0(x)``, so risks computed with this
    pair carry no nuisance estimation noise.
    """
    if data.e is None or data.mu0 is None or data.mu1 is None:
        raise DataError("dataset lacks oracle columns e, mu_0, mu_1")
    return NuisancePair(
        e_hat=np.array(data.e),
        m_hat=data.e * data.mu1 + (1.0 - data.e) * data.mu0,
        eta_clip=eta_clip,
        provenance="oracle",
    )


def _cv_folds(n: int, k: int, rng: np.random.Generator) -> list:
    perm = rng.permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def _cv_score(fitter, x, t, folds, classification: bool) -> float:
    """Mean squared error (Brier score for classification) across folds."""
    total = 0.0
    for fold in folds:
        mask = np.ones(x.shape[0], dtype=bool)
        mask[fold] = False
        if classification and np.unique(t[mask]).size < 2:
            return np.inf
        model = fitter(x[mask], t[mask])
        pred = model.predict_proba(x[fold]) if classification else model.predict(x[fold])
        total += float(np.sum((t[fold] - pred) ** 2))
    return total / x.shape[0]


def _draw(grid: list, budget: int, rng: np.random.Generator) -> list:
    if budget >= len(grid):
        return list(grid)
    idx = rng.choice(len(grid), size=budget, replace=False)
    return [grid[i] for i in np.sort(idx)]


def _search(fitter_for, grid, budget, x, t, folds, classification, rng):
    """Randomized search over ``grid``; ties go to the earliest candidate."""
    best_params, best_score = None, np.inf
    for params in _draw(grid, budget, rng):
        score = _cv_score(fitter_for(params), x, t, folds, classification)
        if score < best_score:
            best_params, best_score = params, score
    if best_params is None:
        raise DegenerateDataError("hyperparameter search found no valid fit")
    return best_params, best_score


def fit_nuisances(
    train: Dataset,
    variant: str = "stacked",
    hp_budget: int = 10,
    cv_folds: int = 5,
    oof_folds: int = 5,
    eta_clip: float = DEFAULT_ETA_CLIP,
    seed: int = 0,
    gbt_rounds: int = 30,
    min_samples_leaf: int = 20,
    ridge_grid: tuple = RIDGE_LAMBDAS,
    logistic_grid: tuple = LOGISTIC_C,
    gbt_grid: tuple | None = None,
) -> NuisancePair:
    """Fit the nuisance pair on the training split only.

    Hyperparameters are chosen by randomized search with cross-validation on
    ``train`` (Brier score for the propensity, squared error for the mean
    outcome), then each model is refit on the full training split. The
    ``stacked`` variant combines the tuned linear model with tuned boosted
    trees through out-of-fold convex stacking. Deterministic given ``seed``.
    """
    if variant not in ("linear", "stacked"):
        raise ConfigurationError(f"unknown variant {variant!r}")
    if not ((train.a == 0).any() and (train.a == 1).any()):
        raise DegenerateDataError("nuisance fit needs both treatment arms")
    x, a, y = train.x, train.a.astype(float), train.y
    n = x.shape[0]
    if gbt_grid is None:
        gbt_grid = tuple(
            (lr, leaves) for lr in GBT_LEARNING_RATES for leaves in GBT_MAX_LEAF_NODES
        )

    rng = np.random.default_rng(child_seed(seed, 11))
    folds = _cv_folds(n, min(cv_folds, n), rng)
    chosen = {}

    def logistic_fitter(c):
        return lambda xs, ts: learners.logistic_fit(xs, ts, l2=1.0 / c)

    def ridge_fitter(lam):
        return lambda xs, ts: learners.ridge_fit(xs, ts, lam=lam)

    def gbt_fitter(params, loss):
        lr, leaves = params
        return lambda xs, ts: learners.gbt_fit(
            xs,
            ts,
            loss=loss,
            learning_rate=lr,
            max_leaf_nodes=leaves,
            n_rounds=gbt_rounds,
            min_samples_leaf=min(min_samples_leaf, max(1, xs.shape[0] // 10)),
        )

    best_c, _ = _search(logistic_fitter, list(logistic_grid), hp_budget, x, a, folds, True, rng)
    best_lam, _ = _search(ridge_fitter, list(ridge_grid), hp_budget, x, y, folds, False, rng)
    chosen["logistic_c"] = best_c
    chosen["ridge_lambda"] = best_lam

    if variant == "linear":
        e_model = logistic_fitter(best_c)(x, a)
        m_model = ridge_fitter(best_lam)(x, y)
    else:
        best_gbt_e, _ = _search(
            lambda p: gbt_fitter(p, "logistic"), list(gbt_grid), hp_budget, x, a, folds, True, rng
        )
        best_gbt_m, _ = _search(
            lambda p: gbt_fitter(p, "squared"), list(gbt_grid), hp_budget, x, y, folds, False, rng
        )
        chosen["gbt_e"] = best_gbt_e
        chosen["gbt_m"] = best_gbt_m
        e_model = learners.stack_fit(
            [logistic_fitter(best_c), gbt_fitter(best_gbt_e, "logistic")],
            x,
            a,
            task="classification",
            oof_folds=oof_folds,
        )
        m_model = learners.stack_fit(
            [ridge_fitter(best_lam), gbt_fitter(best_gbt_m, "squared")],
            x,
            y,
            task="regression",
            oof_folds=oof_folds,
        )

    return NuisancePair(
        e_hat=e_model,
        m_hat=m_model,
        eta_clip=eta_clip,
        provenance=variant,
        chosen=chosen,
    )
