"""Self-contained deterministic base classifiers with a uniform contract.

Every learner is trained through :func:`fit_learner` and scored through
:func:`predict_proba`; scores are always in [0, 1].  The roster is small
and diverse on purpose:

* ``logistic``  - full-batch gradient descent on standardized inputs
  (learning rate 0.1, 500 iterations, L2 1e-4); score is the sigmoid output.
* ``tree``      - CART with Gini impurity, max depth 5, min leaf 2,
  midpoint thresholds, ties broken by lowest feature index then lowest
  threshold; score is the leaf class fraction.
* ``forest``    - 25 bootstrap trees with sqrt(f) features per split and
  per-tree seeds derived from the master seed; score is the mean of the
  trees' hard votes (leaf fraction >= 0.5 counts as a vote for class 1).
* ``knn``       - k=5 Euclidean neighbors on standardized features,
  distance ties broken by lower training-sample index; score is the
  positive fraction among the neighbors.
* ``gnb``       - Gaussian naive Bayes with a 1e-9 variance floor; score
  is the positive-class posterior.
* ``leak_probe`` - diagnostic only: scores 1.0 for rows it saw at fit time
  and 0.0 otherwise, used to prove cross-validation hygiene.

Training and scoring are pure functions of (spec, X, y, seed), so fitted
models are safe to share read-only across threads or processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TrainingError(RuntimeError):
    """Raised when an optimizer diverges or a learner cannot be fit."""


ALGORITHMS = ("logistic", "tree", "forest", "knn", "gnb", "leak_probe")

_DEFAULT_PARAMS = {
    "logistic": {"lr": 0.1, "n_iter": 500, "l2": 1e-4},
    "tree": {"max_depth": 5, "min_leaf": 2},
    "forest": {"n_trees": 25, "max_depth": 5, "min_leaf": 2},
    "knn": {"k": 5},
    "gnb": {"var_floor": 1e-9},
    "leak_probe": {},
}


@dataclass(frozen=True)
class LearnerSpec:
    """Algorithm choice plus hyperparameters and a display name."""

    algorithm: str
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.name:
            object.__setattr__(self, "name", self.algorithm)
        defaults = _DEFAULT_PARAMS[self.algorithm]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(
                f"unknown parameters for {self.algorithm}: {sorted(unknown)}"
            )
        object.__setattr__(self, "params", {**defaults, **self.params})
        self._check_ranges()

    def _check_ranges(self):
        p = self.params
        if self.algorithm == "logistic":
            if p["lr"] <= 0 or p["n_iter"] < 1 or p["l2"] < 0:
                raise ValueError("logistic requires lr > 0, n_iter >= 1, l2 >= 0")
        elif self.algorithm in ("tree", "forest"):
            if p["max_depth"] < 1 or p["min_leaf"] < 1:
                raise ValueError("tree requires max_depth >= 1 and min_leaf >= 1")
            if self.algorithm == "forest" and p["n_trees"] < 1:
                raise ValueError("forest requires n_trees >= 1")
        elif self.algorithm == "knn":
            if p["k"] < 1:
                raise ValueError("knn requires k >= 1")
        elif self.algorithm == "gnb":
            if p["var_floor"] <= 0:
                raise ValueError("gnb requires var_floor > 0")


@dataclass
class FittedBaseModel:
    """A trained learner: spec, expected input width, and learned state."""

    spec: LearnerSpec
    feature_count: int
    parameters: dict


def default_learners() -> list[LearnerSpec]:
    """The standard five-learner roster with default hyperparameters."""
    return [
        LearnerSpec("logistic"),
        LearnerSpec("tree"),
        LearnerSpec("forest"),
        LearnerSpec("knn"),
        LearnerSpec("gnb"),
    ]


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_gradient(weights, bias, X, y, l2=0.0):
    """Mean negative log-likelihood plus (l2/2)*||w||^2 and its exact gradient.

    Returns ``(grad_weights, grad_bias, loss)``.  The bias is not
    regularized.
    """
    X = np.asarray(X, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    z = X @ weights + bias
    p = _sigmoid(z)
    # per-sample NLL = softplus(z) - y*z, stable via logaddexp
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (weights @ weights))
    residual = p - y
    grad_w = X.T @ residual / n + l2 * weights
    grad_b = float(residual.mean())
    return grad_w, grad_b, loss


def _standardize_params(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return mean, std


def _fit_logistic(X, y, params, name):
    lr, n_iter, l2 = params["lr"], params["n_iter"], params["l2"]
    mean, std = _standardize_params(X)
    Xs = (X - mean) / std
    w = np.zeros(X.shape[1])
    b = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_iter):
            grad_w, grad_b, loss = logistic_loss_gradient(w, b, Xs, y, l2)
            if not np.isfinite(loss):
                raise TrainingError(f"learner {name!r}: loss became non-finite")
            w = w - lr * grad_w
            b = b - lr * grad_b
    if not (np.isfinite(w).all() and np.isfinite(b)):
        raise TrainingError(f"learner {name!r}: parameters became non-finite")
    return {"weights": w, "bias": float(b), "mean": mean, "std": std}


def _score_logistic(params, X):
    Xs = (X - params["mean"]) / params["std"]
    return _sigmoid(Xs @ params["weights"] + params["bias"])


# ---------------------------------------------------------------------------
# CART tree / random forest
# ---------------------------------------------------------------------------


def _gini(pos: float, total: float) -> float:
    p = pos / total
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _best_split(X, y, feature_indices, min_leaf):
    """Lowest-weighted-Gini split over the candidate features.

    Candidate thresholds are midpoints between consecutive distinct values;
    ties resolve to the lowest feature index, then the lowest threshold.
    Returns ``(feature, threshold, weighted_gini)`` or ``None``.
    """
    n = y.size
    best = None
    for j in feature_indices:
        v = X[:, j]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        cum_pos = np.cumsum(y[order])
        cut = np.flatnonzero(sv[:-1] < sv[1:])
        cut = cut[(cut + 1 >= min_leaf) & (n - cut - 1 >= min_leaf)]
        if cut.size == 0:
            continue
        n_left = cut + 1.0
        n_right = n - n_left
        pos_left = cum_pos[cut]
        pos_right = cum_pos[-1] - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        gini_l = 1.0 - p_l * p_l - (1.0 - p_l) * (1.0 - p_l)
        gini_r = 1.0 - p_r * p_r - (1.0 - p_r) * (1.0 - p_r)
        weighted = (n_left * gini_l + n_right * gini_r) / n
        k = int(np.argmin(weighted))  # first occurrence = lowest threshold
        if best is None or weighted[k] < best[2]:
            threshold = float((sv[cut[k]] + sv[cut[k] + 1]) / 2.0)
            best = (int(j), threshold, float(weighted[k]))
    return best


def _build_tree(X, y, depth, max_depth, min_leaf, mtry, rng):
    pos = float(y.sum())
    n = y.size
    value = pos / n
    if depth >= max_depth or pos == 0.0 or pos == n or n < 2 * min_leaf:
        return {"leaf": True, "value": value}
    f = X.shape[1]
    if mtry is None or mtry >= f:
        feature_indices = np.arange(f)
    else:
        feature_indices = np.sort(rng.choice(f, size=mtry, replace=False))
    split = _best_split(X, y, feature_indices, min_leaf)
    if split is None or split[2] >= _gini(pos, n):
        return {"leaf": True, "value": value}
    feature, threshold, _ = split
    left = X[:, feature] <= threshold
    return {
        "leaf": False,
        "feature": feature,
        "threshold": threshold,
        "left": _build_tree(X[left], y[left], depth + 1, max_depth, min_leaf, mtry, rng),
        "right": _build_tree(X[~left], y[~left], depth + 1, max_depth, min_leaf, mtry, rng),
    }


def _tree_fractions(node, X):
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if nd["leaf"]:
            out[idx] = nd["value"]
            continue
        left = X[idx, nd["feature"]] <= nd["threshold"]
        stack.append((nd["left"], idx[left]))
        stack.append((nd["right"], idx[~left]))
    return out


def _fit_tree(X, y, params, name):
    node = _build_tree(X, y, 0, params["max_depth"], params["min_leaf"], None, None)
    return {"tree": node}


def _score_tree(params, X):
    return _tree_fractions(params["tree"], X)


def _fit_forest(X, y, params, name, seed):
    n, f = X.shape
    mtry = max(1, int(np.sqrt(f)))
    trees = []
    for t in range(params["n_trees"]):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(t,)))
        )
        idx = rng.integers(0, n, size=n)
        trees.append(
            _build_tree(
                X[idx], y[idx], 0, params["max_depth"], params["min_leaf"], mtry, rng
            )
        )
    return {"trees": trees}


def _score_forest(params, X):
    votes = np.zeros(X.shape[0])
    for node in params["trees"]:
        votes += _tree_fractions(node, X) >= 0.5
    return votes / len(params["trees"])


# ---------------------------------------------------------------------------
# k-nearest neighbors
# ---------------------------------------------------------------------------


def _fit_knn(X, y, params, name):
    mean, std = _standardize_params(X)
    return {
        "train_x": (X - mean) / std,
        "train_y": y.astype(np.float64),
        "mean": mean,
        "std": std,
        "k": int(params["k"]),
    }


def _score_knn(params, X):
    Xs = (X - params["mean"]) / params["std"]
    train = params["train_x"]
    k = min(params["k"], train.shape[0])
    # exact squared distances; stable argsort breaks ties by lower train index
    d2 = ((Xs[:, None, :] - train[None, :, :]) ** 2).sum(axis=2)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return params["train_y"][order].mean(axis=1)


# ---------------------------------------------------------------------------
# Gaussian naive Bayes
# ---------------------------------------------------------------------------


def _fit_gnb(X, y, params, name):
    floor = params["var_floor"]
    means = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.vstack([X[y == c].var(axis=0) for c in (0, 1)])
    variances = np.maximum(variances, floor)
    priors = np.array([float(np.mean(y == c)) for c in (0, 1)])
    return {"means": means, "variances": variances, "priors": priors}


def _score_gnb(params, X):
    joint = np.empty((X.shape[0], 2))
    for c in (0, 1):
        mean = params["means"][c]
        var = params["variances"][c]
        loglik = -0.5 * (np.log(2.0 * np.pi * var) + (X - mean) ** 2 / var).sum(axis=1)
        joint[:, c] = np.log(params["priors"][c]) + loglik
    shift = joint.max(axis=1, keepdims=True)
    e = np.exp(joint - shift)
    return e[:, 1] / e.sum(axis=1)


# ---------------------------------------------------------------------------
# leak probe
# ---------------------------------------------------------------------------


def _fit_leak_probe(X, y, params, name):
    return {"train_x": X.copy()}


def _score_leak_probe(params, X):
    seen = (X[:, None, :] == params["train_x"][None, :, :]).all(axis=2).any(axis=1)
    return seen.astype(np.float64)


# ---------------------------------------------------------------------------
# uniform contract
# ---------------------------------------------------------------------------


def fit_learner(spec: LearnerSpec, X, y, seed: int) -> FittedBaseModel:
    """Train ``spec`` on ``(X, y)``; deterministic in ``(spec, X, y, seed)``."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one row per label")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must contain only 0 and 1")
    y = y.astype(np.int64)
    if spec.algorithm != "leak_probe" and y.min() == y.max():
        raise ValueError("single-class labels: both classes must be present")

    if spec.algorithm == "logistic":
        parameters = _fit_logistic(X, y, spec.params, spec.name)
    elif spec.algorithm == "tree":
        parameters = _fit_tree(X, y, spec.params, spec.name)
    elif spec.algorithm == "forest":
        parameters = _fit_forest(X, y, spec.params, spec.name, int(seed))
    elif spec.algorithm == "knn":
        parameters = _fit_knn(X, y, spec.params, spec.name)
    elif spec.algorithm == "gnb":
        parameters = _fit_gnb(X, y, spec.params, spec.name)
    else:
        parameters = _fit_leak_probe(X, y, spec.params, spec.name)
    return FittedBaseModel(spec=spec, feature_count=X.shape[1], parameters=parameters)


def predict_proba(model: FittedBaseModel, X) -> np.ndarray:
    """Score rows of ``X`` with a fitted model; outputs lie in [0, 1].

    Scores are a pure function of the values in ``X`` (the array is
    normalized to one memory layout before any linear algebra).
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if X.shape[1] != model.feature_count:
        raise ValueError(
            f"column-count mismatch: model expects {model.feature_count}, got {X.shape[1]}"
        )
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    alg = model.spec.algorithm
    if alg == "logistic":
        return _score_logistic(model.parameters, X)
    if alg == "tree":
        return _score_tree(model.parameters, X)
    if alg == "forest":
        return _score_forest(model.parameters, X)
    if alg == "knn":
        return _score_knn(model.parameters, X)
    if alg == "gnb":
        return _score_gnb(model.parameters, X)
    return _score_leak_probe(model.parameters, X)


# ---------------------------------------------------------------------------
# archive (de)serialization of learned state
# ---------------------------------------------------------------------------

_ARRAY_KEYS = {
    "logistic": ("weights", "mean", "std"),
    "knn": ("train_x", "train_y", "mean", "std"),
    "gnb": ("means", "variances", "priors"),
    "leak_probe": ("train_x",),
    "tree": (),
    "forest": (),
}


def parameters_to_jsonable(model: FittedBaseModel) -> dict:
    out = {}
    for key, value in model.parameters.items():
        if isinstance(value, np.ndarray):
            out[key] = value.tolist()
        elif isinstance(value, (np.floating, np.integer)):
            out[key] = value.item()
        else:
            out[key] = value
    return out


def parameters_from_jsonable(algorithm: str, raw: dict) -> dict:
    out = dict(raw)
    for key in _ARRAY_KEYS[algorithm]:
        out[key] = np.asarray(out[key], dtype=np.float64)
    if algorithm == "knn":
        out["k"] = int(out["k"])
    return out
