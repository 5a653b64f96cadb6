"""Audit model-selection risks for causal inference on synthetic benchmarks.

The package generates causal datasets with known ground truth, fits families
of candidate outcome models and the nuisance estimates feasible risks need,
computes oracle and feasible selection risks, and measures how well each
risk recovers the oracle ranking across overlap regimes.
"""

from .campaign import (
    CampaignConfig,
    FamilyConfig,
    SourceConfig,
    config_from_json,
    config_to_json,
    recipe,
    run_campaign,
)
from .candidates import (
    CandidateFamily,
    CandidateSpec,
    FunctionOutcomeModel,
    OutcomeModel,
    caussim_family,
    estimate_ate,
    fit_candidate,
    fit_family,
    gbt_family,
    oracle_model,
)
from .datagen import (
    Dataset,
    GroundTruth,
    ResponseSurface,
    SimConfig,
    TreatmentMixture,
    child_seed,
    oracle_propensity,
    rbf_featurize,
    simulate,
)
from .dataset_io import dataset_to_csv, ingest_csv, write_dataset_csv
from .errors import (
    CausalSelectError,
    ConfigurationError,
    DataError,
    DegenerateDataError,
    NumericalError,
)
from .nuisance import NuisancePair, clip_propensity, fit_nuisances, oracle_nuisances
from .overlap import OverlapReport, ntv, ntv_plugin, tertile_bucket
from .risks import (
    BayesResiduals,
    RiskTable,
    bayes_residuals,
    check_reweighting_identity,
    check_upper_bound,
    evaluate_candidates,
    mu_risk,
    mu_risk_ipw,
    r_risk,
    tau_risk,
    tau_risk_ipw,
    u_risk,
)
from .selection import (
    AgreementReport,
    SelectionConfig,
    SelectionRun,
    agreement,
    kendall,
    run_selection,
    split_ratio_sweep,
)

__version__ = "0.1.0"
