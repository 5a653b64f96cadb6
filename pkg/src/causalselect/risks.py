"""Causal model-selection risks in finite-sum form, plus theory checks.

Every risk is the plain mean of a per-row term over an evaluation set. For a
candidate ``f`` with observed prediction ``f(x, a)`` and implied effect
``tau_f(x) = f(x, 1) - f(x, 0)``, with nuisances ``e`` (propensity) and ``m``
(mean outcome):

* ``tau_risk``      mean (tau(x) - tau_f(x))^2              (oracle only)
* ``mu_risk``       mean (y - f(x, a))^2
* ``mu_risk_ipw``   mean (a/e + (1-a)/(1-e)) (y - f(x, a))^2
* ``tau_risk_ipw``  mean (y (a/e - (1-a)/(1-e)) - tau_f(x))^2
* ``u_risk``        mean ((y - m) / (a - e) - tau_f(x))^2
* ``r_risk``        mean ((y - m) - (a - e) tau_f(x))^2

Feasible versions plug in fitted nuisances; semi-oracle versions (suffix
``_star``) plug in the true ones. ``check_upper_bound`` and
``check_reweighting_identity`` verify the two identities tying the
nuisance-weighted risks back to the oracle effect error.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .datagen import Dataset
from .errors import DataError
from .nuisance import DEFAULT_ETA_CLIP, NuisancePair, oracle_nuisances

FEASIBLE_RISKS = ("mu_risk", "mu_risk_ipw", "tau_risk_ipw", "u_risk", "r_risk")
SEMI_ORACLE_RISKS = ("mu_risk_ipw_star", "tau_risk_ipw_star", "u_risk_star", "r_risk_star")
ALL_RISKS = ("tau_risk",) + FEASIBLE_RISKS + SEMI_ORACLE_RISKS


def tau_risk(model, data: Dataset) -> float:
    """Mean squared error of the implied effect against the oracle effect."""
    if data.cate is None:
        raise DataError("tau_risk needs the oracle cate column")
    diff = data.cate - model.cate(data.x)
    return float(np.mean(diff * diff))


def mu_risk(model, data: Dataset) -> float:
    """Plain mean squared error on the observed outcome."""
    diff = data.y - model.predict(data.x, data.a)
    return float(np.mean(diff * diff))


def _weights(data: Dataset, e: np.ndarray) -> np.ndarray:
    a = data.a.astype(float)
    return a / e + (1.0 - a) / (1.0 - e)


def mu_risk_ipw(model, data: Dataset, nuis: NuisancePair) -> float:
    """Outcome error reweighted by inverse (clipped) propensities."""
    e = nuis.propensity(data)
    diff = data.y - model.predict(data.x, data.a)
    return float(np.mean(_weights(data, e) * diff * diff))


def tau_risk_ipw(model, data: Dataset, nuis: NuisancePair) -> float:
    """Squared distance of the implied effect to propensity-transformed outcomes."""
    e = nuis.propensity(data)
    a = data.a.astype(float)
    pseudo = data.y * (a / e - (1.0 - a) / (1.0 - e))
    diff = pseudo - model.cate(data.x)
    return float(np.mean(diff * diff))


def u_risk(model, data: Dataset, nuis: NuisancePair) -> float:
    """Residual-ratio effect error; the clipping keeps ``|a - e|`` above eta."""
    e = nuis.propensity(data)
    m = nuis.mean_outcome(data)
    diff = (data.y - m) / (data.a.astype(float) - e) - model.cate(data.x)
    return float(np.mean(diff * diff))


def r_risk(model, data: Dataset, nuis: NuisancePair) -> float:
    """Residual-on-residual effect error from the outcome decomposition
    ``y = m(x) + (a - e(x)) tau(x) + noise``."""
    e = nuis.propensity(data)
    m = nuis.mean_outcome(data)
    diff = (data.y - m) - (data.a.astype(float) - e) * model.cate(data.x)
    return float(np.mean(diff * diff))


@dataclass(frozen=True)
class BayesResiduals:
    """Irreducible noise constants under homoscedastic outcome noise.

    ``sigma_b_sq[a]`` is the population Bayes squared error of arm ``a``
    (here the constant noise variance); ``sigma_b_tilde_sq[a]`` is its
    propensity-weighted version, ``sigma^2 * mean(e)`` for the treated arm
    and ``sigma^2 * mean(1 - e)`` for the control arm.
    """

    sigma_b_sq: tuple
    sigma_b_tilde_sq: tuple


def bayes_residuals(data: Dataset, sigma_noise: float | None = None) -> BayesResiduals:
    """Noise constants of a simulated dataset with constant outcome noise."""
    sigma = data.sigma_noise if sigma_noise is None else sigma_noise
    if sigma is None:
        raise DataError("dataset records no noise level; pass sigma_noise")
    if data.e is None:
        raise DataError("bayes residuals need the oracle e column")
    s2 = float(sigma) ** 2
    mean_e = float(np.mean(data.e))
    return BayesResiduals(
        sigma_b_sq=(s2, s2),
        sigma_b_tilde_sq=(s2 * (1.0 - mean_e), s2 * mean_e),
    )


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    rel_err: float


def check_upper_bound(
    model,
    data: Dataset,
    residuals: BayesResiduals | None = None,
    slack_frac: float = 0.02,
    eta_clip: float = DEFAULT_ETA_CLIP,
) -> BoundCheck:
    """Verify ``tau_risk <= 2 mu_risk_ipw* - 2 (sigma_B^2(1) + sigma_B^2(0))``.

    Both sides are finite sums, so the bound is checked up to a Monte-Carlo
    slack of ``slack_frac * |rhs|``.
    """
    data.require_oracle()
    if residuals is None:
        residuals = bayes_residuals(data)
    pair = oracle_nuisances(data, eta_clip=eta_clip)
    lhs = tau_risk(model, data)
    rhs = 2.0 * mu_risk_ipw(model, data, pair) - 2.0 * (
        residuals.sigma_b_sq[0] + residuals.sigma_b_sq[1]
    )
    return BoundCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + slack_frac * abs(rhs))


def check_reweighting_identity(
    model,
    data: Dataset,
    residuals: BayesResiduals | None = None,
    eta_clip: float = DEFAULT_ETA_CLIP,
) -> IdentityCheck:
    """Compare the semi-oracle residual-on-residual risk with its rewriting
    ``mean(e (1-e) (tau - tau_f)^2) + sigma_tilde^2(1) + sigma_tilde^2(0)``."""
    data.require_oracle()
    if residuals is None:
        residuals = bayes_residuals(data)
    pair = oracle_nuisances(data, eta_clip=eta_clip)
    lhs = r_risk(model, data, pair)
    diff = data.cate - model.cate(data.x)
    rhs = float(np.mean(data.e * (1.0 - data.e) * diff * diff)) + (
        residuals.sigma_b_tilde_sq[0] + residuals.sigma_b_tilde_sq[1]
    )
    return IdentityCheck(lhs=lhs, rhs=rhs, rel_err=abs(lhs - rhs) / max(rhs, 1e-12))


@dataclass
class RiskTable:
    """Per-candidate values of every available risk on one evaluation set."""

    candidate_ids: tuple
    columns: dict  # risk name -> np.ndarray aligned with candidate_ids
    eval_set_id: str = ""
    nuisance_provenance: str = ""

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DataError(f"risk table has no column {name!r}")
        return self.columns[name]

    def risk_names(self) -> list:
        return [name for name in ALL_RISKS if name in self.columns]

    def selected(self, name: str) -> str:
        """Candidate id minimizing a column; ties go to the smallest id."""
        values = self.column(name)
        best = np.min(values)
        tied = [self.candidate_ids[i] for i in np.nonzero(values == best)[0]]
        return min(tied)

    def to_csv(self) -> str:
        """Rows ``candidate_id,risk_name,nuisance_mode,value``."""
        buf = io.StringIO()
        buf.write("candidate_id,risk_name,nuisance_mode,value\n")
        for name in self.risk_names():
            if name == "mu_risk":
                mode = "none"
            elif name == "tau_risk" or name.endswith("_star"):
                mode = "oracle"
            else:
                mode = self.nuisance_provenance or "none"
            for cid, value in zip(self.candidate_ids, self.columns[name]):
                buf.write(f"{cid},{name},{mode},{value:.17g}\n")
        return buf.getvalue()


def evaluate_candidates(
    models: list,
    data: Dataset,
    nuis: NuisancePair | None = None,
    include_semi_oracle: bool = True,
    eval_set_id: str = "",
) -> RiskTable:
    """Risk table of fitted candidates on one evaluation set.

    Feasible nuisance-weighted risks need ``nuis``; the oracle effect error
    and semi-oracle columns are added whenever the data carries oracle
    columns.
    """
    columns = {"mu_risk": np.empty(len(models))}
    oracle_ok = data.has_oracle
    if oracle_ok:
        columns["tau_risk"] = np.empty(len(models))
        if include_semi_oracle:
            for name in SEMI_ORACLE_RISKS:
                columns[name] = np.empty(len(models))
    if nuis is not None:
        for name in ("mu_risk_ipw", "tau_risk_ipw", "u_risk", "r_risk"):
            columns[name] = np.empty(len(models))
    oracle_pair = oracle_nuisances(data) if oracle_ok else None

    for i, model in enumerate(models):
        columns["mu_risk"][i] = mu_risk(model, data)
        if oracle_ok:
            columns["tau_risk"][i] = tau_risk(model, data)
            if include_semi_oracle:
                columns["mu_risk_ipw_star"][i] = mu_risk_ipw(model, data, oracle_pair)
                columns["tau_risk_ipw_star"][i] = tau_risk_ipw(model, data, oracle_pair)
                columns["u_risk_star"][i] = u_risk(model, data, oracle_pair)
                columns["r_risk_star"][i] = r_risk(model, data, oracle_pair)
        if nuis is not None:
            columns["mu_risk_ipw"][i] = mu_risk_ipw(model, data, nuis)
            columns["tau_risk_ipw"][i] = tau_risk_ipw(model, data, nuis)
            columns["u_risk"][i] = u_risk(model, data, nuis)
            columns["r_risk"][i] = r_risk(model, data, nuis)

    return RiskTable(
        candidate_ids=tuple(m.id for m in models),
        columns=columns,
        eval_set_id=eval_set_id,
        nuisance_provenance="" if nuis is None else nuis.provenance,
    )
