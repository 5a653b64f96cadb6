"""Candidate selection runs and ranking-agreement metrics.

``run_selection`` performs one full selection round on one dataset: split,
fit nuisances (on the candidate training set or on a disjoint nuisance set),
fit every candidate, evaluate every risk on the test set and pick the
argmin candidate per risk. ``agreement`` scores each risk's ranking against
the oracle effect error with Kendall's rank correlation and the excess
effect error of the selected candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .candidates import CandidateFamily, estimate_ate, fit_family
from .datagen import Dataset, child_seed
from .errors import ConfigurationError, DataError, DegenerateDataError
from .nuisance import DEFAULT_ETA_CLIP, fit_nuisances, oracle_nuisances
from .risks import RiskTable, evaluate_candidates, tau_risk


@dataclass(frozen=True)
class SelectionConfig:
    """How one selection run splits data and fits its nuisances."""

    procedure: str = "shared"  # "shared" | "separate"
    train_frac: float = 0.9
    test_frac: float = 0.1
    nuisance_frac: float = 0.0
    nuisance_variant: str = "stacked"  # "oracle" | "linear" | "stacked"
    hp_budget: int = 10
    eta_clip: float = DEFAULT_ETA_CLIP
    gbt_rounds: int = 30
    seed: int = 0

    def validate(self) -> None:
        if self.procedure not in ("shared", "separate"):
            raise ConfigurationError(f"unknown procedure {self.procedure!r}")
        if self.nuisance_variant not in ("oracle", "linear", "stacked"):
            raise ConfigurationError(
                f"unknown nuisance variant {self.nuisance_variant!r}"
            )
        if self.procedure == "separate" and self.nuisance_frac <= 0:
            raise ConfigurationError("separate procedure needs nuisance_frac > 0")
        if self.nuisance_frac < 0:
            raise ConfigurationError("nuisance_frac must be >= 0")
        fracs = [self.train_frac, self.test_frac]
        if self.nuisance_frac > 0:
            # a shared run may carve (and ignore) the partition so the two
            # procedures can be compared on identical train and test rows
            fracs.append(self.nuisance_frac)
        if any(f <= 0 for f in fracs[:2]) or abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigurationError(
                f"split fractions must be positive and sum to 1, got {fracs}"
            )


@dataclass
class SelectionRun:
    """Everything produced by one selection round."""

    procedure: str
    split: tuple
    risk_table: RiskTable
    selected: dict  # risk name -> candidate id
    seed: int
    models: dict = field(default_factory=dict)  # candidate id -> fitted model
    train_idx: np.ndarray | None = None
    nuisance_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None
    nuisances: object = None


def _partition(n: int, cfg: SelectionConfig, attempt: int):
    rng = np.random.default_rng(child_seed(cfg.seed, 17, attempt))
    perm = rng.permutation(n)
    n_train = int(round(cfg.train_frac * n))
    n_nuis = int(round(cfg.nuisance_frac * n)) if cfg.nuisance_frac > 0 else 0
    train = perm[:n_train]
    nuis = perm[n_train : n_train + n_nuis]
    test = perm[n_train + n_nuis :]
    return train, nuis, test


def _both_arms(a: np.ndarray, idx: np.ndarray) -> bool:
    sub = a[idx]
    return bool((sub == 0).any() and (sub == 1).any())


def run_selection(data: Dataset, family: CandidateFamily, cfg: SelectionConfig) -> SelectionRun:
    """One selection round on one dataset; deterministic given ``cfg.seed``.

    The shared procedure fits nuisances and candidates on the same training
    partition; the separate procedure carves a disjoint nuisance partition.
    Splits are resampled up to 10 times until every fitted partition contains
    both treatment arms.
    """
    cfg.validate()
    train_idx = nuis_idx = test_idx = None
    for attempt in range(10):
        train_idx, nuis_idx, test_idx = _partition(data.n, cfg, attempt)
        need = [train_idx] + ([nuis_idx] if cfg.procedure == "separate" else [])
        if all(_both_arms(data.a, idx) for idx in need) and test_idx.size > 0:
            break
    else:
        raise DegenerateDataError(
            "could not draw a split with both arms in every fitted partition"
        )

    train = data.subset(train_idx)
    test = data.subset(test_idx)
    fit_set = data.subset(nuis_idx) if cfg.procedure == "separate" else train

    if cfg.nuisance_variant == "oracle":
        pair = oracle_nuisances(test, eta_clip=cfg.eta_clip)
    else:
        pair = fit_nuisances(
            fit_set,
            variant=cfg.nuisance_variant,
            hp_budget=cfg.hp_budget,
            eta_clip=cfg.eta_clip,
            seed=child_seed(cfg.seed, 29),
            gbt_rounds=cfg.gbt_rounds,
        )

    models = fit_family(family, train)
    table = evaluate_candidates(
        models,
        test,
        nuis=pair,
        eval_set_id=f"test-n{test.n}-seed{cfg.seed}",
    )
    selected = {name: table.selected(name) for name in table.risk_names()}
    split = (cfg.train_frac, cfg.test_frac) + (
        (cfg.nuisance_frac,) if cfg.procedure == "separate" else ()
    )
    return SelectionRun(
        procedure=cfg.procedure,
        split=split,
        risk_table=table,
        selected=selected,
        seed=cfg.seed,
        models={m.id: m for m in models},
        train_idx=train_idx,
        nuisance_idx=nuis_idx,
        test_idx=test_idx,
        nuisances=pair,
    )


def kendall(ranking_a, ranking_b) -> float:
    """Kendall rank correlation: (concordant - discordant) / all pairs.

    Tied pairs count as neither concordant nor discordant but stay in the
    denominator, so a constant ranking scores 0 against anything.
    """
    a = np.asarray(ranking_a, dtype=float)
    b = np.asarray(ranking_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigurationError("rankings must be 1-d arrays of equal length")
    n = a.size
    if n < 2:
        raise ConfigurationError("kendall needs at least 2 values")
    ii, jj = np.triu_indices(n, k=1)
    signs = np.sign(a[ii] - a[jj]) * np.sign(b[ii] - b[jj])
    return float(np.sum(signs) / (n * (n - 1) / 2.0))


@dataclass(frozen=True)
class AgreementReport:
    """Per-risk agreement with the oracle effect-error ranking.

    ``relative_kendall`` centers each Kendall value on the mean across risks
    of the same run, so the values sum to zero; ``excess_tau_risk`` is the
    relative gap between the effect error of the risk's selected candidate
    and the best achievable one.
    """

    kendall: dict
    relative_kendall: dict
    excess_tau_risk: dict


def agreement(run: SelectionRun, oracle_col: str = "tau_risk") -> AgreementReport:
    table = run.risk_table
    if oracle_col not in table.columns:
        raise DataError(f"risk table lacks the oracle column {oracle_col!r}")
    oracle_values = table.column(oracle_col)
    risk_names = [name for name in table.risk_names() if name != oracle_col]
    kappa = {name: kendall(table.column(name), oracle_values) for name in risk_names}
    mean_kappa = float(np.mean(list(kappa.values())))
    relative = {name: kappa[name] - mean_kappa for name in risk_names}
    best = float(np.min(oracle_values))
    id_to_pos = {cid: i for i, cid in enumerate(table.candidate_ids)}
    excess = {}
    for name in risk_names:
        chosen = oracle_values[id_to_pos[run.selected[name]]]
        excess[name] = float((chosen - best) / max(best, 1e-12))
    return AgreementReport(kendall=kappa, relative_kendall=relative, excess_tau_risk=excess)


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    replication: int
    ate_rel_bias: float
    holdout_tau_risk: float
    selected_candidate: str


def split_ratio_sweep(
    data: Dataset,
    family: CandidateFamily,
    ratios,
    holdout_frac: float = 0.3,
    n_replications: int = 1,
    base_cfg: SelectionConfig | None = None,
    risk: str = "r_risk",
    seed: int = 0,
) -> list:
    """Trade-off between data for fitting candidates and data for selection.

    A holdout partition (30% by default) provides silver-standard causal
    targets through the oracle columns. For each train/test ratio the rest of
    the data goes through a selection run; the candidate picked by ``risk``
    is scored by its relative ATE bias against the silver ATE and by its
    effect error on the holdout partition.
    """
    data.require_oracle()
    ratios = [float(r) for r in ratios]
    if any(not 0.0 < r < 1.0 for r in ratios):
        raise ConfigurationError("ratios must lie strictly inside (0, 1)")
    if not 0.0 < holdout_frac < 1.0:
        raise ConfigurationError("holdout_frac must be in (0, 1)")
    cfg = base_cfg if base_cfg is not None else SelectionConfig()
    n_holdout = int(round(holdout_frac * data.n))
    n_work = data.n - n_holdout
    smallest = min(min(ratios), 1.0 - max(ratios))
    if n_holdout < 1 or int(smallest * n_work) < 2:
        raise ConfigurationError("not enough rows for the smallest split")

    rows = []
    for rep in range(n_replications):
        rng = np.random.default_rng(child_seed(seed, 41, rep))
        perm = rng.permutation(data.n)
        holdout = data.subset(perm[:n_holdout])
        work = data.subset(perm[n_holdout:])
        silver_ate = float(np.mean(holdout.cate))
        for k, ratio in enumerate(ratios):
            run_cfg = replace(
                cfg,
                procedure="shared",
                train_frac=ratio,
                test_frac=1.0 - ratio,
                nuisance_frac=0.0,
                seed=child_seed(seed, 43, rep, k),
            )
            run = run_selection(work, family, run_cfg)
            model = run.models[run.selected[risk]]
            ate_hat = estimate_ate(model, work.x[run.test_idx])
            rows.append(
                SweepRow(
                    ratio=ratio,
                    replication=rep,
                    ate_rel_bias=abs(ate_hat - silver_ate) / max(abs(silver_ate), 1e-12),
                    holdout_tau_risk=tau_risk(model, holdout),
                    selected_candidate=run.selected[risk],
                )
            )
    return rows
