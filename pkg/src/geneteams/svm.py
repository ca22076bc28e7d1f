"""Binary C-SVC with an RBF kernel, solved by SMO.

Labels are +1 (patient) / -1 (control). The dual

    min 1/2 a^T Q a - e^T a,   Q_ij = y_i y_j K(x_i, x_j),
    0 <= a_i <= C_i,           y^T a = 0

is solved by two-variable updates on the maximal violating pair. The Gram
matrix is precomputed in full, which is what the cohort sizes here need.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
from numba import njit

GRID = tuple(10.0**e for e in range(-4, 5))


class SvmError(ValueError):
    pass


# -- scaling ------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingTransform:
    lo: np.ndarray
    hi: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        out = (X - self.lo) / safe
        # degenerate dimensions map to 0
        return np.where(span > 0, out, 0.0)


def fit_scaling(X) -> ScalingTransform:
    """Per-dimension min-max from training rows; test rows are not clamped."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise SvmError("scaling needs at least one training row")
    return ScalingTransform(X.min(axis=0), X.max(axis=0))


def apply_scaling(t: ScalingTransform, X) -> np.ndarray:
    return t.apply(X)


# -- kernel -------------------------------------------------------------------


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise SvmError(f"length mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def sq_distances(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    return np.exp(-gamma * sq_distances(A, B))


# -- solver -------------------------------------------------------------------


@njit(cache=True)
def _smo(K, y, cap, tol, max_iter):
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q alpha - e at alpha = 0
    it = 0
    while it < max_iter:
        # maximal violating pair
        i = -1
        j = -1
        gmax = -np.inf
        gmin = np.inf
        for t in range(n):
            v = -y[t] * grad[t]
            up = (y[t] > 0 and alpha[t] < cap[t]) or (y[t] < 0 and alpha[t] > 0)
            low = (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < cap[t])
            if up and v > gmax:
                gmax = v
                i = t
            if low and v < gmin:
                gmin = v
                j = t
        if i < 0 or j < 0 or gmax - gmin < tol:
            break
        it += 1
        yi = y[i]
        yj = y[j]
        ai = alpha[i]
        aj = alpha[j]
        qii = K[i, i]
        qjj = K[j, j]
        qij = yi * yj * K[i, j]
        if yi != yj:
            quad = qii + qjj + 2.0 * qij
            if quad <= 0:
                quad = 1e-12
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni = ai + delta
            nj = aj + delta
            if diff > 0:
                if nj < 0:
                    nj = 0.0
                    ni = diff
            else:
                if ni < 0:
                    ni = 0.0
                    nj = -diff
            if diff > cap[i] - cap[j]:
                if ni > cap[i]:
                    ni = cap[i]
                    nj = cap[i] - diff
            else:
                if nj > cap[j]:
                    nj = cap[j]
                    ni = cap[j] + diff
        else:
            quad = qii + qjj - 2.0 * qij
            if quad <= 0:
                quad = 1e-12
            delta = (grad[i] - grad[j]) / quad
            s = ai + aj
            ni = ai - delta
            nj = aj + delta
            if s > cap[i]:
                if ni > cap[i]:
                    ni = cap[i]
                    nj = s - cap[i]
            else:
                if nj < 0:
                    nj = 0.0
                    ni = s
            if s > cap[j]:
                if nj > cap[j]:
                    nj = cap[j]
                    ni = s - cap[j]
            else:
                if ni < 0:
                    ni = 0.0
                    nj = s
        di = ni - ai
        dj = nj - aj
        alpha[i] = ni
        alpha[j] = nj
        for t in range(n):
            grad[t] += y[t] * (yi * K[t, i] * di + yj * K[t, j] * dj)
    return alpha, grad, it


def _bias(alpha, grad, y, cap) -> float:
    """b = -rho, averaging over free vectors or taking the bound midpoint."""
    yg = y * grad
    free = (alpha > 0) & (alpha < cap)
    if free.any():
        return -float(yg[free].mean())
    at_upper = alpha >= cap
    at_lower = ~at_upper
    ub, lb = np.inf, -np.inf
    # rho bounds from the KKT conditions at the bounds
    for mask, sign in ((at_upper, 1.0), (at_lower, -1.0)):
        for t in np.flatnonzero(mask):
            if y[t] * sign > 0:
                lb = max(lb, yg[t])
            else:
                ub = min(ub, yg[t])
    return -0.5 * (ub + lb)


@dataclass(frozen=True)
class SvmHyperparams:
    c: float
    gamma: float

    def __post_init__(self):
        if not (self.c > 0 and self.gamma > 0):
            raise SvmError("c and gamma must be positive")


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    c: float
    scaling: ScalingTransform | None = None
    # training-time diagnostics, not serialised
    alpha: np.ndarray | None = field(default=None, repr=False, compare=False)
    train_labels: np.ndarray | None = field(default=None, repr=False, compare=False)
    train_gradient: np.ndarray | None = field(default=None, repr=False, compare=False)
    caps: np.ndarray | None = field(default=None, repr=False, compare=False)
    iterations: int = field(default=0, repr=False, compare=False)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def prepare(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise SvmError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X if self.scaling is None else self.scaling.apply(X)


def as_pm1(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SvmError("labels must be +1 or -1")
    return y


def dual_objective(K, y, alpha) -> float:
    """Value of 1/2 a^T Q a - e^T a (the minimised form)."""
    ya = y * alpha
    return float(0.5 * ya @ K @ ya - alpha.sum())


def fit_svm(
    X,
    labels,
    params: SvmHyperparams,
    scale: bool = True,
    tol: float = 1e-3,
    max_iter: int = 10_000_000,
    class_weight: dict[int, float] | None = None,
    kernel: np.ndarray | None = None,
) -> SvmModel:
    """Train on raw rows; with ``scale`` a min-max transform is fitted first.

    ``kernel`` may carry a precomputed Gram matrix of the (scaled) rows,
    which lets grid search reuse it across penalty values.
    """
    X = np.asarray(X, dtype=float)
    y = as_pm1(labels)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise SvmError("features and labels disagree in length")
    if not np.all(np.isfinite(X)):
        raise SvmError("features contain non-finite values")
    if not ((y > 0).any() and (y < 0).any()):
        raise SvmError("training data must contain both classes")
    scaling = fit_scaling(X) if scale else None
    Xs = scaling.apply(X) if scaling is not None else X
    K = rbf_matrix(Xs, Xs, params.gamma) if kernel is None else kernel
    cap = np.full(y.size, float(params.c))
    if class_weight:
        for lab, wt in class_weight.items():
            cap[y == lab] *= wt
    alpha, grad, it = _smo(K, y, cap, tol, max_iter)
    b = _bias(alpha, grad, y, cap)
    sv = alpha > 0
    return SvmModel(
        support_vectors=Xs[sv].copy(),
        dual_coef=(alpha * y)[sv],
        bias=b,
        gamma=float(params.gamma),
        c=float(params.c),
        scaling=scaling,
        alpha=alpha,
        train_labels=y,
        train_gradient=grad,
        caps=cap,
        iterations=int(it),
    )


def decision_values(model: SvmModel, X) -> np.ndarray:
    """f(x) = sum_i alpha_i y_i k(x_i, x) + b for raw rows (scaled here)."""
    Xs = model.prepare(X)
    if model.support_vectors.shape[0] == 0:
        return np.full(Xs.shape[0], model.bias)
    return rbf_matrix(Xs, model.support_vectors, model.gamma) @ model.dual_coef + model.bias


def decision_value(model: SvmModel, x) -> float:
    return float(decision_values(model, np.asarray(x, dtype=float)[None, :])[0])


def predict(model: SvmModel, X) -> np.ndarray:
    """Sign of the decision value; exact zeros go to +1."""
    return np.where(decision_values(model, X) >= 0, 1, -1)


def kkt_violation(model: SvmModel) -> float:
    """Largest gap m(a) - M(a) over the maximal violating pair (0 at optimum)."""
    a, y, g, cap = model.alpha, model.train_labels, model.train_gradient, model.caps
    v = -y * g
    up = ((y > 0) & (a < cap)) | ((y < 0) & (a > 0))
    low = ((y > 0) & (a > 0)) | ((y < 0) & (a < cap))
    if not up.any() or not low.any():
        return 0.0
    return float(max(v[up].max() - v[low].min(), 0.0))


# -- model selection ------------------------------------------------------------


def stratified_folds(labels, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Validation index sets; each class is shuffled and dealt round-robin."""
    y = np.asarray(labels)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise SvmError(f"class {cls} has {idx.size} examples, fewer than {k} folds")
        idx = rng.permutation(idx)
        for pos, t in enumerate(idx):
            folds[(pos + offset) % k].append(int(t))
        offset += idx.size
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


@dataclass
class GridResult:
    best: SvmHyperparams
    cv_accuracy: float
    table: dict[tuple[float, float], float]


def grid_search_cv(
    X,
    labels,
    k: int = 5,
    grid_c: Sequence[float] = GRID,
    grid_gamma: Sequence[float] = GRID,
    rng: np.random.Generator | int | None = 0,
    tol: float = 1e-3,
    class_weight: dict[int, float] | None = None,
) -> GridResult:
    """Stratified k-fold CV accuracy for every (c, gamma); best wins.

    Scaling is fitted on each fold's training part only. Ties go to the
    smaller c, then the smaller gamma.
    """
    X = np.asarray(X, dtype=float)
    y = as_pm1(labels)
    rng = np.random.default_rng(rng)
    folds = stratified_folds(y, k, rng)
    correct = {(c, g): [] for c, g in product(grid_c, grid_gamma)}
    for val in folds:
        tr = np.setdiff1d(np.arange(y.size), val)
        t = fit_scaling(X[tr])
        Xtr, Xva = t.apply(X[tr]), t.apply(X[val])
        d_tr = sq_distances(Xtr, Xtr)
        d_va = sq_distances(Xva, Xtr)
        for g in grid_gamma:
            K = np.exp(-g * d_tr)
            K_va = np.exp(-g * d_va)
            for c in grid_c:
                m = fit_svm(Xtr, y[tr], SvmHyperparams(c, g), scale=False, tol=tol,
                            class_weight=class_weight, kernel=K)
                f = K_va @ (m.alpha * y[tr]) + m.bias
                pred = np.where(f >= 0, 1.0, -1.0)
                correct[(c, g)].append(float(np.mean(pred == y[val])))
    table = {key: float(np.mean(v)) for key, v in correct.items()}
    best_key, best_acc = None, -1.0
    for c in sorted(grid_c):
        for g in sorted(grid_gamma):
            if table[(c, g)] > best_acc:
                best_key, best_acc = (c, g), table[(c, g)]
    return GridResult(SvmHyperparams(*best_key), best_acc, table)


# -- persistence -----------------------------------------------------------------


def model_to_dict(model: SvmModel) -> dict:
    d = {
        "kernel": "rbf",
        "gamma": model.gamma,
        "c": model.c,
        "bias": model.bias,
        "support_vectors": model.support_vectors.tolist(),
        "dual_coef": model.dual_coef.tolist(),
        "scaling": None,
    }
    if model.scaling is not None:
        d["scaling"] = {"lo": model.scaling.lo.tolist(), "hi": model.scaling.hi.tolist()}
    return d


def model_from_dict(d: dict) -> SvmModel:
    sc = d.get("scaling")
    n_feat = len(sc["lo"]) if sc else (len(d["support_vectors"][0]) if d["support_vectors"] else 0)
    sv = np.array(d["support_vectors"], dtype=float).reshape(-1, n_feat)
    return SvmModel(
        support_vectors=sv,
        dual_coef=np.array(d["dual_coef"], dtype=float),
        bias=float(d["bias"]),
        gamma=float(d["gamma"]),
        c=float(d["c"]),
        scaling=ScalingTransform(np.array(sc["lo"], dtype=float), np.array(sc["hi"], dtype=float)) if sc else None,
    )


def save_model(path, model: SvmModel) -> None:
    # json writes floats with repr, so the round trip is bit-exact
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> SvmModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
