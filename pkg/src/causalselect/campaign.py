"""Campaign orchestration: many instances, one results CSV.

A campaign repeats the full pipeline over independently seeded dataset
instances: generate (or load) data, measure overlap, run each requested
(procedure x nuisance variant) selection round, score ranking agreement, and
append rows to a results file. Replays of the same config are byte-identical
regardless of worker count because every instance derives its own seed from
(campaign seed, instance index) and rows are merged in instance order.
"""

from __future__ import annotations

import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .candidates import CandidateFamily, caussim_family, gbt_family
from .datagen import Dataset, SimConfig, child_seed, simulate
from .dataset_io import ingest_csv
from .errors import ConfigurationError
from .overlap import ntv, ntv_plugin
from .selection import SelectionConfig, agreement, run_selection, split_ratio_sweep

SCHEMA_VERSION = 1

RESULTS_HEADER = (
    "instance_id,theta,ntv,procedure,risk_name,nuisance_mode,"
    "kendall,relative_kendall,excess_tau_risk,selected_candidate"
)
SWEEP_HEADER = (
    "instance_id,theta,ratio,replication,ate_rel_bias,holdout_tau_risk,selected_candidate"
)

#: split used by the separate-nuisance procedure when none is configured
SEPARATE_SPLIT = (0.5, 0.25, 0.25)  # train, nuisance, test


@dataclass(frozen=True)
class SourceConfig:
    kind: str = "caussim"  # "caussim" | "csv"
    n: int = 5000
    p_a: float = 0.5
    theta_range: tuple = (0.0, 2.5)
    d_basis: int = 2
    gamma: float = 1.0
    sigma_noise: float | None = None
    coef_scale: float = 1.0
    path: str = ""  # csv source only


@dataclass(frozen=True)
class FamilyConfig:
    kind: str = "caussim_120"  # "caussim_120" | "gbt_18"
    seed: int = 0
    lambdas: tuple = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)
    n_bases: int = 10
    gbt_rounds: int = 30


@dataclass(frozen=True)
class CampaignConfig:
    """Versioned description of a whole campaign; JSON round-trippable."""

    name: str
    seed: int
    n_instances: int
    source: SourceConfig = SourceConfig()
    family: FamilyConfig = FamilyConfig()
    nuisance_variants: tuple = ("stacked",)
    procedures: tuple = ("shared",)
    train_frac: float = 0.9
    test_frac: float = 0.1
    nuisance_frac: float = 0.0
    hp_budget: int = 10
    eta_clip: float = 1e-10
    nuisance_gbt_rounds: int = 30
    mode: str = "selection"  # "selection" | "split_sweep"
    ratios: tuple = (0.5, 0.8, 0.9)
    strict_overlap_range: bool = False

    def validate(self) -> None:
        if self.n_instances < 1:
            raise ConfigurationError("n_instances must be >= 1")
        if self.source.kind not in ("caussim", "csv"):
            raise ConfigurationError(f"unknown source kind {self.source.kind!r}")
        if self.source.kind == "csv" and not self.source.path:
            raise ConfigurationError("csv source needs a path")
        if self.family.kind not in ("caussim_120", "gbt_18"):
            raise ConfigurationError(f"unknown family kind {self.family.kind!r}")
        if self.mode not in ("selection", "split_sweep"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        bad = set(self.nuisance_variants) - {"oracle", "linear", "stacked"}
        if bad or not self.nuisance_variants:
            raise ConfigurationError(f"bad nuisance variants {sorted(bad)}")
        bad = set(self.procedures) - {"shared", "separate"}
        if bad or not self.procedures:
            raise ConfigurationError(f"bad procedures {sorted(bad)}")
        lo, hi = self.source.theta_range
        if lo > hi or lo < 0:
            raise ConfigurationError("theta_range must satisfy 0 <= lo <= hi")
        if self.strict_overlap_range and hi > 2.5:
            raise ConfigurationError(
                "theta_range exceeds [0, 2.5] under strict_overlap_range"
            )


def _as_config(payload: dict) -> CampaignConfig:
    payload = dict(payload)
    try:
        source = payload.pop("source", {})
        family = payload.pop("family", {})
        if isinstance(source, dict):
            source = SourceConfig(**{**source, "theta_range": tuple(source.get("theta_range", (0.0, 2.5)))})
        if isinstance(family, dict):
            family = FamilyConfig(**{**family, "lambdas": tuple(family.get("lambdas", FamilyConfig.lambdas))})
        for name in ("nuisance_variants", "procedures", "ratios"):
            if name in payload:
                payload[name] = tuple(payload[name])
        return CampaignConfig(source=source, family=family, **payload)
    except TypeError as exc:
        raise ConfigurationError(f"bad campaign config: {exc}") from exc


def config_to_json(cfg: CampaignConfig) -> str:
    payload = {"schema_version": SCHEMA_VERSION, **asdict(cfg)}
    return json.dumps(payload, indent=2, sort_keys=True)


def config_from_json(text: str) -> CampaignConfig:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid campaign JSON: {exc}") from exc
    version = payload.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema_version {version!r}")
    cfg = _as_config(payload)
    cfg.validate()
    return cfg


def build_family(cfg: CampaignConfig) -> CandidateFamily:
    if cfg.family.kind == "caussim_120":
        return caussim_family(
            seed=cfg.family.seed,
            lambdas=tuple(cfg.family.lambdas),
            n_bases=cfg.family.n_bases,
        )
    return gbt_family(n_rounds=cfg.family.gbt_rounds)


def instance_dataset(cfg: CampaignConfig, index: int) -> tuple:
    """Dataset and theta for one instance; a pure function of (cfg, index)."""
    if cfg.source.kind == "csv":
        return ingest_csv(cfg.source.path), float("nan")
    lo, hi = cfg.source.theta_range
    u = np.random.default_rng(child_seed(cfg.seed, index, 101)).random()
    theta = lo + (hi - lo) * u
    sim = SimConfig(
        seed=child_seed(cfg.seed, index),
        n=cfg.source.n,
        theta=theta,
        p_a=cfg.source.p_a,
        d_basis=cfg.source.d_basis,
        gamma=cfg.source.gamma,
        sigma_noise=cfg.source.sigma_noise,
        coef_scale=cfg.source.coef_scale,
    )
    return simulate(sim), theta


def _instance_overlap(cfg: CampaignConfig, data: Dataset, index: int) -> float:
    if data.e is not None:
        p_a = cfg.source.p_a if cfg.source.kind == "caussim" else float(np.mean(data.a))
        return ntv(data.e, p_a)
    report = ntv_plugin(
        data, model="gbt", calibrate=True, seed=child_seed(cfg.seed, index, 7)
    )
    return report.ntv


def _split_for(cfg: CampaignConfig, procedure: str) -> tuple:
    """(train, nuisance, test) fractions for one procedure.

    A configured nuisance_frac applies to both procedures so the shared run
    carves (and ignores) the same partition: procedure comparisons then see
    identical train and test rows. Otherwise the shared run trains on all
    non-test rows and the separate run falls back to the default split.
    """
    if cfg.nuisance_frac > 0:
        return cfg.train_frac, cfg.nuisance_frac, cfg.test_frac
    if procedure == "separate":
        return SEPARATE_SPLIT
    return 1.0 - cfg.test_frac, 0.0, cfg.test_frac


def _selection_rows(cfg: CampaignConfig, index: int) -> list:
    data, theta = instance_dataset(cfg, index)
    overlap_value = _instance_overlap(cfg, data, index)
    family = build_family(cfg)
    rows = []
    for procedure in cfg.procedures:
        train_frac, nuisance_frac, test_frac = _split_for(cfg, procedure)
        for variant in cfg.nuisance_variants:
            sel_cfg = SelectionConfig(
                procedure=procedure,
                train_frac=train_frac,
                test_frac=test_frac,
                nuisance_frac=nuisance_frac,
                nuisance_variant=variant,
                hp_budget=cfg.hp_budget,
                eta_clip=cfg.eta_clip,
                gbt_rounds=cfg.nuisance_gbt_rounds,
                # one seed per instance: procedure and variant comparisons
                # are paired on identical splits
                seed=child_seed(cfg.seed, index, 3),
            )
            run = run_selection(data, family, sel_cfg)
            report = agreement(run)
            for risk_name in sorted(report.kendall):
                rows.append(
                    f"{index},{theta:.17g},{overlap_value:.17g},{procedure},{risk_name},"
                    f"{variant},{report.kendall[risk_name]:.17g},"
                    f"{report.relative_kendall[risk_name]:.17g},"
                    f"{report.excess_tau_risk[risk_name]:.17g},{run.selected[risk_name]}"
                )
    return rows


def _sweep_rows(cfg: CampaignConfig, index: int) -> list:
    data, theta = instance_dataset(cfg, index)
    family = build_family(cfg)
    base = SelectionConfig(
        nuisance_variant=cfg.nuisance_variants[0],
        hp_budget=cfg.hp_budget,
        eta_clip=cfg.eta_clip,
        gbt_rounds=cfg.nuisance_gbt_rounds,
    )
    rows = []
    for row in split_ratio_sweep(
        data,
        family,
        ratios=cfg.ratios,
        base_cfg=base,
        seed=child_seed(cfg.seed, index, 5),
    ):
        rows.append(
            f"{index},{theta:.17g},{row.ratio:.17g},{row.replication},"
            f"{row.ate_rel_bias:.17g},{row.holdout_tau_risk:.17g},{row.selected_candidate}"
        )
    return rows


def _instance_rows(args) -> list:
    cfg, index = args
    if cfg.mode == "split_sweep":
        return _sweep_rows(cfg, index)
    return _selection_rows(cfg, index)


def campaign_rows(cfg: CampaignConfig, jobs: int = 1, log=None) -> list:
    """All result rows of a campaign, merged in instance order."""
    cfg.validate()
    tasks = [(cfg, index) for index in range(cfg.n_instances)]
    if jobs <= 1:
        chunks = []
        for task in tasks:
            chunks.append(_instance_rows(task))
            if log is not None:
                print(f"instance {task[1] + 1}/{cfg.n_instances} done", file=log)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_instance_rows, tasks))
        if log is not None:
            print(f"{cfg.n_instances} instances done on {jobs} workers", file=log)
    rows = []
    for chunk in chunks:
        rows.extend(chunk)
    return rows


def run_campaign(cfg: CampaignConfig, out_path: str, jobs: int = 1, quiet: bool = False) -> str:
    """Run a campaign and write its results CSV; returns the output path."""
    header = SWEEP_HEADER if cfg.mode == "split_sweep" else RESULTS_HEADER
    rows = campaign_rows(cfg, jobs=jobs, log=None if quiet else sys.stderr)
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(row + "\n")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return out_path


# ---------------------------------------------------------------------------
# Desk-scale named recipes
# ---------------------------------------------------------------------------


def recipe(name: str, **overrides) -> CampaignConfig:
    """Named desk-scale campaign recipes.

    * ``fig4_desk``: risk comparison across overlap tertiles;
    * ``fig6_desk``: shared versus separate nuisance procedures;
    * ``fig7_desk``: linear versus stacked nuisance estimators;
    * ``fig8_desk``: train/test split-ratio sweep.

    ``overrides`` replace top-level config fields (e.g. ``n_instances=5``).
    """
    recipes = {
        "fig4_desk": CampaignConfig(
            name="fig4_desk",
            seed=40,
            n_instances=50,
            source=SourceConfig(n=5000),
            nuisance_variants=("stacked",),
            procedures=("shared",),
            hp_budget=4,
        ),
        "fig6_desk": CampaignConfig(
            name="fig6_desk",
            seed=60,
            n_instances=30,
            source=SourceConfig(n=5000),
            nuisance_variants=("stacked",),
            procedures=("shared", "separate"),
            train_frac=0.375,
            test_frac=0.25,
            nuisance_frac=0.375,
            hp_budget=4,
        ),
        "fig7_desk": CampaignConfig(
            name="fig7_desk",
            seed=70,
            n_instances=30,
            source=SourceConfig(n=3000),
            nuisance_variants=("linear", "stacked"),
            procedures=("shared",),
            hp_budget=4,
        ),
        "fig8_desk": CampaignConfig(
            name="fig8_desk",
            seed=80,
            n_instances=10,
            source=SourceConfig(n=3000),
            nuisance_variants=("stacked",),
            procedures=("shared",),
            hp_budget=4,
            mode="split_sweep",
            ratios=(0.5, 0.8, 0.9),
        ),
    }
    if name not in recipes:
        raise ConfigurationError(f"unknown recipe {name!r}; pick one of {sorted(recipes)}")
    cfg = recipes[name]
    if overrides:
        payload = asdict(cfg)
        payload.update(overrides)
        cfg = _as_config(payload)
        cfg.validate()
    return cfg
