"""RBF-kernel SVM trained by sequential minimal optimization, one-vs-rest
for multiclass. Standardization happens inside and travels with the model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import InvalidHyperparam, NonConvergence
from .base import Standardizer, check_columns, fit_standardizer

KKT_TOL = 1e-3
MAX_ITER = 100_000


def rbf_kernel(A, B, gamma: float):
    a2 = (A * A).sum(axis=1)[:, None]
    b2 = (B * B).sum(axis=1)[None, :]
    sq = np.maximum(a2 + b2 - 2.0 * A @ B.T, 0.0)
    return np.exp(-gamma * sq)


@dataclass
class _BinarySvm:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i over support vectors
    bias: float

    def decision(self, K_cols):
        # K_cols: kernel matrix rows=query, cols=support vectors
        return K_cols @ self.dual_coef + self.bias


def _smo_solve(K, y, C, tol=KKT_TOL, max_iter=MAX_ITER, seed=0):
    """Platt-style SMO on a precomputed kernel. Returns (alpha, b).

    Deterministic: the working pair is the KKT violator plus the partner
    maximizing |E_i - E_j|, falling back through the error ordering.
    """
    n = len(y)
    alpha = np.zeros(n)
    b = 0.0
    iters = 0
    examine_all = True
    while iters < max_iter:
        changed = 0
        if examine_all:
            candidates = range(n)
        else:
            candidates = np.flatnonzero((alpha > 1e-9) & (alpha < C - 1e-9))
        for i in candidates:
            iters += 1
            if iters > max_iter:
                break
            errors = K @ (alpha * y) + b - y
            r = errors[i] * y[i]
            if not ((r < -tol and alpha[i] < C - 1e-12)
                    or (r > tol and alpha[i] > 1e-12)):
                continue
            for j in np.argsort(-np.abs(errors - errors[i]), kind="stable"):
                if j == i:
                    continue
                if _take_step(K, y, alpha, i, int(j), C, tol):
                    b = _compute_bias(K, y, alpha, C)
                    changed += 1
                    break
        if changed == 0:
            if examine_all:
                break
            examine_all = True
        else:
            examine_all = False
    else:
        raise NonConvergence(f"SMO hit the {max_iter}-iteration cap")
    return alpha, _compute_bias(K, y, alpha, C)


def _take_step(K, y, alpha, i, j, C, tol):
    if i == j:
        return False
    a_i, a_j = alpha[i], alpha[j]
    s = y[i] * y[j]
    if s > 0:
        L, H = max(0.0, a_i + a_j - C), min(C, a_i + a_j)
    else:
        L, H = max(0.0, a_j - a_i), min(C, C + a_j - a_i)
    if H - L < 1e-12:
        return False
    f_i = (alpha * y) @ K[i]
    f_j = (alpha * y) @ K[j]
    E_i = f_i - y[i]
    E_j = f_j - y[j]
    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    if eta <= 1e-12:
        return False
    a_j_new = a_j + y[j] * (E_i - E_j) / eta
    a_j_new = min(max(a_j_new, L), H)
    if abs(a_j_new - a_j) < 1e-12:
        return False
    alpha[j] = a_j_new
    alpha[i] = a_i + s * (a_j - a_j_new)
    return True


def _compute_bias(K, y, alpha, C):
    free = np.flatnonzero((alpha > 1e-9) & (alpha < C - 1e-9))
    decision_no_bias = K @ (alpha * y)
    if free.size:
        return float(np.mean(y[free] - decision_no_bias[free]))
    # no free vectors: midpoint of the feasible bias interval
    lower = y - decision_no_bias
    upper_set = lower[((alpha < 1e-9) & (y > 0)) | ((alpha > C - 1e-9) & (y < 0))]
    lower_set = lower[((alpha < 1e-9) & (y < 0)) | ((alpha > C - 1e-9) & (y > 0))]
    lo = lower_set.max() if lower_set.size else -np.inf
    hi = upper_set.min() if upper_set.size else np.inf
    if np.isfinite(lo) and np.isfinite(hi):
        return float((lo + hi) / 2.0)
    return float(lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0))


def kkt_violations(K, y, alpha, b, C):
    """Max KKT violation per training point (diagnostic for tests)."""
    decision = K @ (alpha * y) + b
    margins = y * decision
    v = np.zeros(len(y))
    lower = alpha <= 1e-9
    upper = alpha >= C - 1e-9
    free = ~lower & ~upper
    v[lower] = np.maximum(0.0, 1.0 - margins[lower])
    v[free] = np.abs(1.0 - margins[free])
    v[upper] = np.maximum(0.0, margins[upper] - 1.0)
    return v


class SvmRbfModel:
    family = "svm_rbf"

    def __init__(self, subproblems, classes, C, gamma, standardizer, n_features):
        self.subproblems = subproblems  # one _BinarySvm per class (one-vs-rest)
        self.classes = np.asarray(classes, dtype=np.int64)
        self.C = C
        self.gamma = gamma
        self.standardizer = standardizer
        self.n_features = n_features

    def decision_values(self, X):
        X = check_columns(self, X)
        Z = self.standardizer.transform(X)
        out = np.empty((len(Z), len(self.classes)))
        for k, sub in enumerate(self.subproblems):
            Kq = rbf_kernel(Z, sub.support_vectors, self.gamma)
            out[:, k] = sub.decision(Kq)
        return out

    def predict(self, X):
        # argmax decision value; ties -> lowest class code
        return self.classes[np.argmax(self.decision_values(X), axis=1)]

    def to_dict(self):
        return {
            "classes": self.classes.tolist(),
            "n_features": self.n_features,
            "C": self.C,
            "gamma": self.gamma,
            "standardizer": self.standardizer.to_dict(),
            "subproblems": [
                {
                    "support_vectors": s.support_vectors.tolist(),
                    "dual_coef": s.dual_coef.tolist(),
                    "bias": s.bias,
                }
                for s in self.subproblems
            ],
        }

    @classmethod
    def from_dict(cls, d):
        subs = [
            _BinarySvm(
                support_vectors=np.array(s["support_vectors"], dtype=np.float64).reshape(
                    -1, d["n_features"]
                ),
                dual_coef=np.array(s["dual_coef"], dtype=np.float64),
                bias=s["bias"],
            )
            for s in d["subproblems"]
        ]
        return cls(
            subproblems=subs,
            classes=d["classes"],
            C=d["C"],
            gamma=d["gamma"],
            standardizer=Standardizer.from_dict(d["standardizer"]),
            n_features=d["n_features"],
        )


def train_svm_rbf(ds: Dataset, C: float = 1.0, gamma: float = 1.0,
                  seed: int = 0) -> SvmRbfModel:
    ds.require_labels()
    if C <= 0:
        raise InvalidHyperparam("C must be > 0")
    if gamma <= 0:
        raise InvalidHyperparam("gamma must be > 0")
    classes = np.unique(ds.y)
    standardizer = fit_standardizer(ds.X)
    Z = standardizer.transform(ds.X)
    K = rbf_kernel(Z, Z, gamma)
    subproblems = []
    for k, cls_code in enumerate(classes):
        y_bin = np.where(ds.y == cls_code, 1.0, -1.0)
        try:
            alpha, b = _smo_solve(K, y_bin, C, seed=seed + k)
        except NonConvergence as exc:
            raise NonConvergence(f"subproblem class={int(cls_code)}: {exc}") from exc
        sv = np.flatnonzero(alpha > 1e-9)
        subproblems.append(_BinarySvm(
            support_vectors=Z[sv].copy(),
            dual_coef=(alpha * y_bin)[sv],
            bias=b,
        ))
    return SvmRbfModel(subproblems=subproblems, classes=classes, C=C, gamma=gamma,
                       standardizer=standardizer, n_features=ds.X.shape[1])
