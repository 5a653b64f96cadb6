"""Minimal supervised-learning core.

Self-contained numpy implementations of the handful of learners the rest of
the package needs: closed-form ridge regression, L2 logistic regression fit
by damped Newton steps (IRLS), exact-split gradient-boosted trees for squared
and logistic losses, convex model stacking with out-of-fold weights, and
Platt score calibration. Everything is deterministic given its inputs and
serializable to plain dicts (see :func:`model_to_dict`).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateDataError, NumericalError


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# Ridge regression
# ---------------------------------------------------------------------------


@dataclass
class RidgeModel:
    weights: np.ndarray
    intercept: float
    lam: float

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x @ self.weights + self.intercept


def ridge_fit(x: np.ndarray, y: np.ndarray, lam: float) -> RidgeModel:
    """Solve ``min ||y - xw - b||^2 + lam ||w||^2`` with unpenalized intercept.

    The intercept is removed by centering, then the regularized normal
    equations are solved exactly. Raises :class:`NumericalError` when
    ``lam == 0`` and the centered design is rank deficient.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ConfigurationError(f"lam must be >= 0, got {lam}")
    if x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise ConfigurationError("x and y must share at least one row")
    n, p = x.shape
    if p == 0:
        return RidgeModel(weights=np.zeros(0), intercept=float(np.mean(y)), lam=lam)
    xm = x.mean(axis=0)
    ym = float(np.mean(y))
    xc = x - xm
    yc = y - ym
    gram = xc.T @ xc + lam * np.eye(p)
    if lam == 0 and np.linalg.matrix_rank(gram) < p:
        raise NumericalError("singular normal equations at lam=0")
    try:
        w = np.linalg.solve(gram, xc.T @ yc)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"ridge solve failed: {exc}") from exc
    return RidgeModel(weights=w, intercept=ym - float(xm @ w), lam=lam)


# ---------------------------------------------------------------------------
# L2 logistic regression (IRLS)
# ---------------------------------------------------------------------------


@dataclass
class LogisticModel:
    weights: np.ndarray
    intercept: float
    l2: float
    max_iter: int
    tol: float
    converged: bool = True
    n_iter: int = 0
    loss_path: list = field(default_factory=list)  # accepted penalized losses

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x @ self.weights + self.intercept

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(x))


def _logistic_loss(z: np.ndarray, a: np.ndarray, w: np.ndarray, l2: float) -> float:
    # sum form: penalty l2/2 * ||w||^2 matches the 1/C convention
    return float(np.sum(np.logaddexp(0.0, z) - a * z) + 0.5 * l2 * np.sum(w * w))


def logistic_fit(
    x: np.ndarray,
    a: np.ndarray,
    l2: float,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> LogisticModel:
    """L2-penalized logistic regression via damped Newton (IRLS) steps.

    Minimizes the summed log-loss plus ``l2/2 * ||w||^2`` (intercept free).
    Steps are halved until the penalized loss does not increase, so the loss
    is non-increasing across accepted iterations. Stops when the gradient
    norm falls below ``tol``; the flag ``converged`` records which exit fired.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = np.asarray(a, dtype=float)
    if l2 < 0:
        raise ConfigurationError(f"l2 must be >= 0, got {l2}")
    classes = np.unique(a)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ConfigurationError("labels must be binary 0/1")
    if classes.size < 2:
        raise DegenerateDataError("logistic fit needs both classes present")

    n, p = x.shape
    design = np.hstack([x, np.ones((n, 1))])
    pen = np.zeros(p + 1)
    pen[:p] = l2
    theta = np.zeros(p + 1)
    z = design @ theta
    loss = _logistic_loss(z, a, theta[:p], l2)
    loss_path = [loss]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        prob = sigmoid(z)
        grad = design.T @ (prob - a) + pen * theta
        if np.linalg.norm(grad) < tol:
            converged = True
            break
        r = np.maximum(prob * (1.0 - prob), 1e-10)
        hess = (design * r[:, None]).T @ design + np.diag(pen)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"IRLS solve failed: {exc}") from exc
        t = 1.0
        for _ in range(50):
            cand = theta - t * step
            cz = design @ cand
            closs = _logistic_loss(cz, a, cand[:p], l2)
            if closs <= loss:
                theta, z, loss = cand, cz, closs
                loss_path.append(loss)
                break
            t *= 0.5
        else:
            break  # no improving step length; stop at current iterate
    else:
        it = max_iter
    return LogisticModel(
        weights=theta[:p],
        intercept=float(theta[p]),
        l2=l2,
        max_iter=max_iter,
        tol=tol,
        converged=converged,
        n_iter=it,
        loss_path=loss_path,
    )


# ---------------------------------------------------------------------------
# Gradient-boosted trees with exact greedy splits
# ---------------------------------------------------------------------------


@dataclass
class Tree:
    """Binary regression tree stored as flat arrays; feature -1 marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[idx]
            active = feat >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            node = idx[rows]
            go_left = x[rows, feat[rows]] <= self.threshold[node]
            idx[rows] = np.where(go_left, self.left[node], self.right[node])
        return self.value[idx]


def _best_split(x, g, rows, min_samples_leaf):
    """Best exact split of ``rows``: (gain, feature, threshold) or None.

    Maximizes the squared-error reduction of fitting per-side means. The
    winning candidate of each feature is re-scored with exactly rounded sums
    so that splits producing the same partition (e.g. two features isolating
    the same extreme point) tie exactly, and the lower feature index wins.
    """
    m = rows.size
    if m < 2 * min_samples_leaf or m < 2:
        return None
    gsub = g[rows]
    total = math.fsum(gsub)
    base = total * total / m
    best = None
    for f in range(x.shape[1]):
        v = x[rows, f]
        # tie order inside equal values cannot matter: only boundaries between
        # distinct values are candidate splits
        order = np.argsort(v)
        vs = v[order]
        gs = gsub[order]
        ok = vs[1:] > vs[:-1]
        if min_samples_leaf > 1:
            nl = np.arange(1, m)
            ok = ok & (nl >= min_samples_leaf) & (m - nl >= min_samples_leaf)
        if not ok.any():
            continue
        left_sum = np.cumsum(gs)[:-1]
        nl = np.arange(1, m, dtype=float)
        score = left_sum**2 / nl + (total - left_sum) ** 2 / (m - nl)
        score[~ok] = -np.inf
        j = int(np.argmax(score))
        left = math.fsum(gs[: j + 1])
        right = total - left
        gain = left * left / (j + 1) + right * right / (m - j - 1) - base
        if gain > 1e-12 and (best is None or gain > best[0]):
            best = (gain, f, float((vs[j] + vs[j + 1]) / 2.0))
    return best


def _fit_tree(x, g, max_leaf_nodes, min_samples_leaf):
    """Grow a tree best-first on gradients ``g``.

    Returns ``(tree, train_values)`` where ``train_values`` is the tree's
    prediction on the training rows (known from the build partition), or
    None when no gain-positive split exists at the root.
    """
    n = x.shape[0]
    rows_all = np.arange(n)
    root_split = _best_split(x, g, rows_all, min_samples_leaf)
    if root_split is None:
        return None
    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    value = [float(np.mean(g))]
    leaf_rows = {0: rows_all}
    heap = []
    counter = 0
    heapq.heappush(heap, (-root_split[0], counter, 0, rows_all, root_split))
    n_leaves = 1
    while heap and n_leaves < max_leaf_nodes:
        _, _, node, rows, split = heapq.heappop(heap)
        _, f, thr = split
        mask = x[rows, f] <= thr
        del leaf_rows[node]
        for child_rows in (rows[mask], rows[~mask]):
            child = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(np.mean(g[child_rows])))
            leaf_rows[child] = child_rows
            child_split = _best_split(x, g, child_rows, min_samples_leaf)
            if child_split is not None:
                counter += 1
                heapq.heappush(heap, (-child_split[0], counter, child, child_rows, child_split))
        feature[node] = f
        threshold[node] = thr
        left[node] = len(feature) - 2
        right[node] = len(feature) - 1
        n_leaves += 1
    tree = Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
    )
    train_values = np.empty(n)
    for node, rows in leaf_rows.items():
        train_values[rows] = tree.value[node]
    return tree, train_values


@dataclass
class GbtModel:
    """Boosted trees: prediction is ``base_score + learning_rate * sum(trees)``,
    passed through a sigmoid for the logistic loss."""

    trees: list
    learning_rate: float
    max_leaf_nodes: int
    n_rounds: int
    base_score: float
    loss: str
    min_samples_leaf: int = 1

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(x)
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        if self.loss == "logistic":
            return sigmoid(self.decision(x))
        return self.decision(x)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        if self.loss != "logistic":
            raise ConfigurationError("predict_proba needs a logistic-loss model")
        return sigmoid(self.decision(x))


def gbt_fit(
    x: np.ndarray,
    y: np.ndarray,
    loss: str = "squared",
    learning_rate: float = 0.1,
    max_leaf_nodes: int = 31,
    n_rounds: int = 100,
    min_samples_leaf: int = 1,
) -> GbtModel:
    """Gradient boosting with exact greedy splits on raw feature values.

    Each round fits one tree to the current gradients (residuals for the
    squared loss, ``a - p`` for the logistic loss); leaf values are mean
    gradients. Boosting stops early once no leaf admits a gain-positive
    split. A constant binary target yields the base score and no trees.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if loss not in ("squared", "logistic"):
        raise ConfigurationError(f"unknown loss {loss!r}")
    if x.shape[0] < 2:
        raise ConfigurationError("gbt_fit needs at least 2 rows")
    if learning_rate < 0:
        raise ConfigurationError("learning_rate must be >= 0")
    if max_leaf_nodes < 2:
        raise ConfigurationError("max_leaf_nodes must be >= 2")

    if loss == "logistic":
        if not np.all(np.isin(np.unique(y), (0.0, 1.0))):
            raise ConfigurationError("logistic loss needs binary 0/1 targets")
        rate = float(np.clip(np.mean(y), 1e-12, 1.0 - 1e-12))
        base = float(np.log(rate / (1.0 - rate)))
    else:
        base = float(np.mean(y))

    model = GbtModel(
        trees=[],
        learning_rate=learning_rate,
        max_leaf_nodes=max_leaf_nodes,
        n_rounds=n_rounds,
        base_score=base,
        loss=loss,
        min_samples_leaf=min_samples_leaf,
    )
    if loss == "logistic" and np.unique(y).size < 2:
        return model
    if learning_rate == 0.0 or n_rounds == 0:
        return model

    raw = np.full(x.shape[0], base)
    for _ in range(n_rounds):
        grad = y - (sigmoid(raw) if loss == "logistic" else raw)
        fitted = _fit_tree(x, grad, max_leaf_nodes, min_samples_leaf)
        if fitted is None:
            break
        tree, train_values = fitted
        model.trees.append(tree)
        raw += learning_rate * train_values
    return model


# ---------------------------------------------------------------------------
# Stacking with out-of-fold meta weights
# ---------------------------------------------------------------------------


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css - 1.0)[0][-1]
    lam = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - lam, 0.0)


def _simplex_lstsq(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Minimize ``||t - p @ w||^2`` over the probability simplex.

    Projected gradient descent, then a sweep of the vertices so the result is
    never worse than the best single column.
    """
    k = p.shape[1]
    if k == 1:
        return np.ones(1)
    gram = p.T @ p
    lin = p.T @ t
    lip = float(np.max(np.linalg.eigvalsh(gram)))
    w = np.full(k, 1.0 / k)
    if lip > 0:
        step = 1.0 / lip
        for _ in range(500):
            w = _project_simplex(w - step * (gram @ w - lin))
    obj = lambda wt: float(np.sum((t - p @ wt) ** 2))
    best_w, best_obj = w, obj(w)
    for i in range(k):
        vert = np.zeros(k)
        vert[i] = 1.0
        vo = obj(vert)
        if vo < best_obj:
            best_w, best_obj = vert, vo
    return best_w


def _fold_slices(n: int, k: int) -> list:
    return [idx for idx in np.array_split(np.arange(n), k)]


@dataclass
class StackedModel:
    """Convex combination of base models, weights fit on out-of-fold
    predictions and bases refit on the full data."""

    base_models: list
    meta_weights: np.ndarray
    oof_folds: int
    task: str  # "regression" | "classification"

    def _base_predictions(self, x: np.ndarray) -> np.ndarray:
        cols = [
            m.predict_proba(x) if self.task == "classification" else m.predict(x)
            for m in self.base_models
        ]
        return np.column_stack(cols)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self._base_predictions(x) @ self.meta_weights

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        if self.task != "classification":
            raise ConfigurationError("predict_proba needs a classification stack")
        return self.predict(x)


def stack_fit(
    fitters: list,
    x: np.ndarray,
    target: np.ndarray,
    task: str = "regression",
    oof_folds: int = 5,
) -> StackedModel:
    """Fit a stacked model from base ``fitters`` (callables ``fit(x, t)``).

    Meta weights minimize squared error (regression) or the Brier score
    (classification) of the convex combination of out-of-fold base
    predictions; bases are then refit on all rows.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    target = np.asarray(target, dtype=float)
    if oof_folds < 2:
        raise ConfigurationError("oof_folds must be >= 2")
    n = x.shape[0]
    if n < oof_folds:
        raise ConfigurationError(f"need at least {oof_folds} rows, got {n}")
    if task not in ("regression", "classification"):
        raise ConfigurationError(f"unknown task {task!r}")

    oof = np.zeros((n, len(fitters)))
    for fold in _fold_slices(n, oof_folds):
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        for j, fitter in enumerate(fitters):
            m = fitter(x[mask], target[mask])
            oof[fold, j] = (
                m.predict_proba(x[fold]) if task == "classification" else m.predict(x[fold])
            )
    weights = _simplex_lstsq(oof, target)
    bases = [fitter(x, target) for fitter in fitters]
    return StackedModel(
        base_models=bases, meta_weights=weights, oof_folds=oof_folds, task=task
    )


# ---------------------------------------------------------------------------
# Platt calibration
# ---------------------------------------------------------------------------


@dataclass
class PlattMap:
    """Monotone logistic map from a raw score to a probability."""

    slope: float
    intercept: float

    def __call__(self, scores: np.ndarray) -> np.ndarray:
        return sigmoid(self.slope * np.asarray(scores, dtype=float) + self.intercept)


def platt_calibrate(scores: np.ndarray, labels: np.ndarray, l2: float = 1e-8) -> PlattMap:
    """Fit a one-dimensional logistic map from scores to label probability."""
    scores = np.asarray(scores, dtype=float)
    model = logistic_fit(scores[:, None], labels, l2=l2)
    return PlattMap(slope=float(model.weights[0]), intercept=model.intercept)


# ---------------------------------------------------------------------------
# JSON-friendly serialization
# ---------------------------------------------------------------------------


def model_to_dict(model) -> dict:
    """Serialize any fitted learner to a plain dict.

    Schema: a ``kind`` tag plus the model's scalar fields; arrays become
    lists; stacked models nest their bases under ``base_models``.
    """
    if isinstance(model, RidgeModel):
        return {
            "kind": "ridge",
            "weights": model.weights.tolist(),
            "intercept": model.intercept,
            "lam": model.lam,
        }
    if isinstance(model, LogisticModel):
        return {
            "kind": "logistic",
            "weights": model.weights.tolist(),
            "intercept": model.intercept,
            "l2": model.l2,
            "max_iter": model.max_iter,
            "tol": model.tol,
            "converged": model.converged,
            "n_iter": model.n_iter,
        }
    if isinstance(model, GbtModel):
        return {
            "kind": "gbt",
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in model.trees
            ],
            "learning_rate": model.learning_rate,
            "max_leaf_nodes": model.max_leaf_nodes,
            "n_rounds": model.n_rounds,
            "base_score": model.base_score,
            "loss": model.loss,
            "min_samples_leaf": model.min_samples_leaf,
        }
    if isinstance(model, StackedModel):
        return {
            "kind": "stacked",
            "base_models": [model_to_dict(m) for m in model.base_models],
            "meta_weights": model.meta_weights.tolist(),
            "oof_folds": model.oof_folds,
            "task": model.task,
        }
    if isinstance(model, PlattMap):
        return {"kind": "platt", "slope": model.slope, "intercept": model.intercept}
    raise ConfigurationError(f"cannot serialize {type(model).__name__}")


def model_from_dict(payload: dict):
    """Inverse of :func:`model_to_dict`."""
    kind = payload.get("kind")
    if kind == "ridge":
        return RidgeModel(
            weights=np.asarray(payload["weights"], dtype=float),
            intercept=float(payload["intercept"]),
            lam=float(payload["lam"]),
        )
    if kind == "logistic":
        return LogisticModel(
            weights=np.asarray(payload["weights"], dtype=float),
            intercept=float(payload["intercept"]),
            l2=float(payload["l2"]),
            max_iter=int(payload["max_iter"]),
            tol=float(payload["tol"]),
            converged=bool(payload["converged"]),
            n_iter=int(payload["n_iter"]),
        )
    if kind == "gbt":
        trees = [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int64),
                threshold=np.asarray(t["threshold"], dtype=float),
                left=np.asarray(t["left"], dtype=np.int64),
                right=np.asarray(t["right"], dtype=np.int64),
                value=np.asarray(t["value"], dtype=float),
            )
            for t in payload["trees"]
        ]
        return GbtModel(
            trees=trees,
            learning_rate=float(payload["learning_rate"]),
            max_leaf_nodes=int(payload["max_leaf_nodes"]),
            n_rounds=int(payload["n_rounds"]),
            base_score=float(payload["base_score"]),
            loss=payload["loss"],
            min_samples_leaf=int(payload["min_samples_leaf"]),
        )
    if kind == "stacked":
        return StackedModel(
            base_models=[model_from_dict(m) for m in payload["base_models"]],
            meta_weights=np.asarray(payload["meta_weights"], dtype=float),
            oof_folds=int(payload["oof_folds"]),
            task=payload["task"],
        )
    if kind == "platt":
        return PlattMap(slope=float(payload["slope"]), intercept=float(payload["intercept"]))
    raise ConfigurationError(f"unknown model kind {kind!r}")
