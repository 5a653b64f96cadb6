"""Families of candidate outcome models.

A candidate couples a featurization (random radial-basis knots or the raw
features) with one of three regression structures over the treatment arms:

* ``s``   - one head fitted on the features plus the treatment indicator;
* ``t``   - a separate featurizer and head per arm;
* ``sft`` - a shared featurizer, separate heads per arm.

Every fitted candidate exposes ``predict(x, a)`` and the implied effect
``cate(x) = predict(x, 1) - predict(x, 0)``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import learners
from .datagen import Dataset, ResponseSurface, child_seed, rbf_featurize, rbf_kernel, root_inverse
from .errors import ConfigurationError, DegenerateDataError

CAUSSIM_LAMBDAS = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)
GBT_LEARNING_RATES = (0.01, 0.1, 1.0)
GBT_MAX_LEAF_NODES = (25, 27, 30, 32, 35, 40)


@dataclass(frozen=True)
class CandidateSpec:
    """Immutable description of one candidate; its id is a stable hash."""

    meta: str  # "s" | "t" | "sft"
    head: str  # "ridge" | "gbt"
    featurizer: str = "rbf"  # "rbf" | "identity"
    ridge_lambda: float = 1.0
    gbt_learning_rate: float = 0.1
    gbt_max_leaf_nodes: int = 31
    gbt_n_rounds: int = 30
    n_knots: int = 2
    gamma: float = 1.0
    basis_seed: int = 0
    basis_index: int = 0

    @property
    def params_label(self) -> str:
        if self.head == "ridge":
            return f"lam{self.ridge_lambda:g}"
        return f"lr{self.gbt_learning_rate:g}-leaf{self.gbt_max_leaf_nodes}"

    @property
    def id(self) -> str:
        key = (
            self.meta,
            self.head,
            self.featurizer,
            self.ridge_lambda,
            self.gbt_learning_rate,
            self.gbt_max_leaf_nodes,
            self.gbt_n_rounds,
            self.n_knots,
            self.gamma,
            self.basis_seed,
        )
        digest = hashlib.sha1(repr(key).encode()).hexdigest()[:8]
        return f"{self.meta}-{self.head}-{self.params_label}-b{self.basis_index:02d}-{digest}"


@dataclass(frozen=True)
class CandidateFamily:
    members: tuple
    provenance: str

    def __post_init__(self):
        ids = [m.id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("candidate ids are not unique")

    def __len__(self) -> int:
        return len(self.members)

    def ids(self) -> list:
        return [m.id for m in self.members]

    def manifest_csv(self) -> str:
        lines = ["id,meta,params"]
        for m in self.members:
            lines.append(f"{m.id},{m.meta},{m.head} {m.params_label}")
        return "\n".join(lines) + "\n"


@dataclass
class OutcomeModel:
    """A fitted candidate: featurizer(s) plus head(s), keyed by a stable id."""

    spec: CandidateSpec
    surfaces: tuple  # per-arm featurizers; entries may be None (identity)
    heads: tuple  # one head for "s", (head0, head1) otherwise

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def meta(self) -> str:
        return self.spec.meta

    def _features(self, x: np.ndarray, arm: int) -> np.ndarray:
        surface = self.surfaces[arm if len(self.surfaces) > 1 else 0]
        if surface is None:
            return np.atleast_2d(np.asarray(x, dtype=float))
        return rbf_featurize(x, surface)

    def predict(self, x: np.ndarray, a) -> np.ndarray:
        """Predicted outcome at covariates ``x`` under treatment ``a``.

        ``a`` may be a scalar arm or a per-row vector.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a_arr = np.broadcast_to(np.asarray(a), (x.shape[0],)).astype(float)
        if self.meta == "s":
            feats = np.hstack([self._features(x, 0), a_arr[:, None]])
            return self.heads[0].predict(feats)
        out = np.empty(x.shape[0])
        for arm in (0, 1):
            mask = a_arr == arm
            if mask.any():
                out[mask] = self.heads[arm].predict(self._features(x[mask], arm))
        return out

    def cate(self, x: np.ndarray) -> np.ndarray:
        return self.predict(x, 1) - self.predict(x, 0)


@dataclass
class FunctionOutcomeModel:
    """Outcome model defined by two callables, e.g. oracle response surfaces."""

    mu0_fn: object
    mu1_fn: object
    id: str = "oracle-pair"

    def predict(self, x: np.ndarray, a) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a_arr = np.broadcast_to(np.asarray(a), (x.shape[0],)).astype(float)
        m0 = np.asarray(self.mu0_fn(x), dtype=float)
        m1 = np.asarray(self.mu1_fn(x), dtype=float)
        return np.where(a_arr == 1, m1, m0)

    def cate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.mu1_fn(x), dtype=float) - np.asarray(
            self.mu0_fn(x), dtype=float
        )


def oracle_model(data: Dataset) -> FunctionOutcomeModel:
    """The true response pair of a simulated dataset, as an outcome model."""
    if data.truth is None:
        raise ConfigurationError("dataset carries no analytic ground truth")
    return FunctionOutcomeModel(mu0_fn=data.truth.mu0, mu1_fn=data.truth.mu1)


def _sample_basis(x_rows: np.ndarray, spec: CandidateSpec, rng: np.random.Generator) -> ResponseSurface:
    n = x_rows.shape[0]
    if n < spec.n_knots:
        raise DegenerateDataError(
            f"need at least {spec.n_knots} rows to draw knots, got {n}"
        )
    idx = rng.choice(n, size=spec.n_knots, replace=False)
    knots = x_rows[idx]
    gram = rbf_kernel(knots, knots, spec.gamma)
    return ResponseSurface(representers=knots, gamma=spec.gamma, z_norm=root_inverse(gram))


def _fit_head(spec: CandidateSpec, feats: np.ndarray, y: np.ndarray):
    if spec.head == "ridge":
        return learners.ridge_fit(feats, y, lam=spec.ridge_lambda)
    if spec.head == "gbt":
        return learners.gbt_fit(
            feats,
            y,
            loss="squared",
            learning_rate=spec.gbt_learning_rate,
            max_leaf_nodes=spec.gbt_max_leaf_nodes,
            n_rounds=spec.gbt_n_rounds,
        )
    raise ConfigurationError(f"unknown head {spec.head!r}")


def fit_candidate(spec: CandidateSpec, train: Dataset) -> OutcomeModel:
    """Fit one candidate on the training split.

    Radial-basis knots are redrawn deterministically from ``basis_seed``: the
    ``t`` meta draws them from each arm's own rows (both arms of a duplicated
    dataset therefore get identical featurizers), ``sft`` and ``s`` draw from
    all rows.
    """
    if spec.meta not in ("s", "t", "sft"):
        raise ConfigurationError(f"unknown meta {spec.meta!r}")
    x, a, y = train.x, train.a, train.y
    if spec.meta in ("t", "sft"):
        if not ((a == 0).any() and (a == 1).any()):
            raise DegenerateDataError(f"{spec.meta}-learner needs both arms in train")

    if spec.meta == "s":
        surface = None
        if spec.featurizer == "rbf":
            surface = _sample_basis(x, spec, np.random.default_rng(spec.basis_seed))
            feats = rbf_featurize(x, surface)
        else:
            feats = x
        head = _fit_head(spec, np.hstack([feats, a[:, None].astype(float)]), y)
        return OutcomeModel(spec=spec, surfaces=(surface,), heads=(head,))

    if spec.meta == "t":
        surfaces = []
        heads = []
        for arm in (0, 1):
            rows = a == arm
            if spec.featurizer == "rbf":
                # fresh generator per arm: identical arm data gives identical knots
                surface = _sample_basis(
                    x[rows], spec, np.random.default_rng(spec.basis_seed)
                )
                feats = rbf_featurize(x[rows], surface)
            else:
                surface, feats = None, x[rows]
            surfaces.append(surface)
            heads.append(_fit_head(spec, feats, y[rows]))
        return OutcomeModel(spec=spec, surfaces=tuple(surfaces), heads=tuple(heads))

    # sft: one shared featurization, separate heads
    surface = None
    feats = x
    if spec.featurizer == "rbf":
        surface = _sample_basis(x, spec, np.random.default_rng(spec.basis_seed))
        feats = rbf_featurize(x, surface)
    heads = tuple(_fit_head(spec, feats[a == arm], y[a == arm]) for arm in (0, 1))
    return OutcomeModel(spec=spec, surfaces=(surface,), heads=heads)


def fit_family(family: CandidateFamily, train: Dataset) -> list:
    return [fit_candidate(spec, train) for spec in family.members]


def caussim_family(
    seed: int,
    lambdas: tuple = CAUSSIM_LAMBDAS,
    n_bases: int = 10,
    n_knots: int = 2,
    gamma: float = 1.0,
) -> CandidateFamily:
    """Ridge candidates over random bases: len(lambdas) x n_bases x {t, sft}.

    Defaults give the 120-member family (6 penalties, 10 bases, 2 metas).
    """
    members = []
    for i in range(n_bases):
        basis = child_seed(seed, i)
        for lam in lambdas:
            for meta in ("t", "sft"):
                members.append(
                    CandidateSpec(
                        meta=meta,
                        head="ridge",
                        featurizer="rbf",
                        ridge_lambda=float(lam),
                        n_knots=n_knots,
                        gamma=gamma,
                        basis_seed=basis,
                        basis_index=i,
                    )
                )
    provenance = hashlib.sha1(
        repr(("caussim", seed, tuple(lambdas), n_bases, n_knots, gamma)).encode()
    ).hexdigest()[:12]
    return CandidateFamily(members=tuple(members), provenance=provenance)


def gbt_family(
    learning_rates: tuple = GBT_LEARNING_RATES,
    max_leaf_nodes: tuple = GBT_MAX_LEAF_NODES,
    n_rounds: int = 30,
) -> CandidateFamily:
    """Boosted-tree s-learner candidates over the rate x leaves grid (18)."""
    members = tuple(
        CandidateSpec(
            meta="s",
            head="gbt",
            featurizer="identity",
            gbt_learning_rate=float(lr),
            gbt_max_leaf_nodes=int(leaves),
            gbt_n_rounds=n_rounds,
        )
        for lr in learning_rates
        for leaves in max_leaf_nodes
    )
    provenance = hashlib.sha1(
        repr(("gbt", tuple(learning_rates), tuple(max_leaf_nodes), n_rounds)).encode()
    ).hexdigest()[:12]
    return CandidateFamily(members=members, provenance=provenance)


def estimate_ate(model, x: np.ndarray) -> float:
    """Mean predicted effect over the rows of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 0:
        raise ConfigurationError("estimate_ate needs at least one row")
    return float(np.mean(model.cate(x)))
