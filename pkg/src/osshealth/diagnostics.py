"""Exploratory statistics and the per-class ridgeline density series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri  # inverse normal CDF
from scipy.stats import chi2 as chi2_dist

from .errors import (
    ClassTooSmall,
    ConstantColumn,
    DimensionMismatch,
    SampleSizeOutOfRange,
    SingularCovariance,
)
from .features import LifecycleStage

# Ridgeline stacking order, top to bottom.
RIDGE_CLASS_ORDER = (
    LifecycleStage.SANDBOX,
    LifecycleStage.INCUBATING,
    LifecycleStage.GRADUATED,
)


# --- Spearman ---------------------------------------------------------------

def _average_ranks(x):
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_matrix(X, on_constant: str = "flag"):
    """Pairwise Spearman rho: Pearson on average ranks.

    Constant columns make rho undefined; those entries report 0 and the
    returned flag matrix marks them (on_constant='raise' errors instead).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise DimensionMismatch("need a 2-D matrix with >= 2 rows")
    p = X.shape[1]
    ranks = np.column_stack([_average_ranks(X[:, j]) for j in range(p)])
    stds = ranks.std(axis=0)
    constant = stds == 0.0
    if constant.any() and on_constant == "raise":
        raise ConstantColumn(f"columns {np.flatnonzero(constant).tolist()} are constant")
    centered = ranks - ranks.mean(axis=0)
    denom = np.outer(stds, stds) * len(X)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = (centered.T @ centered) / denom
    rho[constant, :] = 0.0
    rho[:, constant] = 0.0
    np.fill_diagonal(rho, 1.0)
    flags = np.zeros((p, p), dtype=bool)
    flags[constant, :] = True
    flags[:, constant] = True
    return rho, flags


# --- Shapiro-Wilk (AS R94 polynomial approximation) -------------------------

_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
def _poly(coeffs, x):
    return sum(c * x ** i for i, c in enumerate(coeffs))


def shapiro_wilk(x):
    """W statistic and approximate p-value for normality (3 <= n <= 5000)."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = len(x)
    if not 3 <= n <= 5000:
        raise SampleSizeOutOfRange(f"n={n}; valid range is [3, 5000]")
    if x[0] == x[-1]:
        raise ConstantColumn("sample has zero variance")

    m = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    mm = float(m @ m)
    a = m / math.sqrt(mm)
    u = 1.0 / math.sqrt(n)
    if n > 5:
        a_n = a[-1] + _poly((0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056), u)
        a_n1 = a[-2] + _poly((0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633), u)
        phi = (mm - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * a_n ** 2 - 2 * a_n1 ** 2)
        a = m / math.sqrt(phi)
        a[-1], a[-2] = a_n, a_n1
        a[0], a[1] = -a_n, -a_n1
    else:
        a_n = a[-1] + _poly((0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056), u)
        if n == 3:
            a = np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
        else:
            phi = (mm - 2 * m[-1] ** 2) / (1 - 2 * a_n ** 2)
            a = m / math.sqrt(phi)
            a[-1] = a_n
            a[0] = -a_n

    w_num = float(a @ x) ** 2
    w_den = float(((x - x.mean()) ** 2).sum())
    W = min(w_num / w_den, 1.0)

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(W)) - math.asin(math.sqrt(0.75)))
        return W, max(0.0, min(1.0, p))
    if n <= 11:
        g = -2.273 + 0.459 * n
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
        z = (-math.log(g - math.log(1.0 - W)) - mu) / sigma
    else:
        ln_n = math.log(n)
        mu = _poly(_C5, ln_n)
        sigma = math.exp(_poly(_C6, ln_n))
        z = (math.log(1.0 - W) - mu) / sigma
    p = 0.5 * math.erfc(z / math.sqrt(2.0))  # upper normal tail
    return W, p


# --- Box's M -----------------------------------------------------------------

def boxs_m(X, y):
    """Box's M for equality of class covariance matrices, chi-square
    approximation with the standard scale factor."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = sorted(set(int(v) for v in y))
    K = len(classes)
    N, p = X.shape
    if K < 2:
        raise SingularCovariance("need at least two classes")
    covs, ns = [], []
    for code in classes:
        rows = X[y == code]
        if len(rows) <= p:
            raise SingularCovariance(
                f"class {code} has {len(rows)} rows <= {p} features"
            )
        covs.append(np.cov(rows, rowvar=False, ddof=1))
        ns.append(len(rows))
    pooled = sum((n - 1) * S for n, S in zip(ns, covs)) / (N - K)

    def logdet(S):
        sign, val = np.linalg.slogdet(S)
        if sign <= 0:
            raise SingularCovariance("covariance matrix is singular")
        return val

    M = (N - K) * logdet(pooled) - sum((n - 1) * logdet(S) for n, S in zip(ns, covs))
    c1 = (
        (2 * p * p + 3 * p - 1) / (6.0 * (p + 1) * (K - 1))
        * (sum(1.0 / (n - 1) for n in ns) - 1.0 / (N - K))
    )
    df = p * (p + 1) * (K - 1) / 2.0
    stat = M * (1.0 - c1)
    p_value = float(chi2_dist.sf(stat, df))
    return float(M), float(df), p_value


# --- partial dependence -------------------------------------------------------

def partial_dependence(model, X, feature: int, grid_points: int = 20):
    """Per-class mean predicted probability with one feature forced to
    each value of its quantile grid. Returns (grid, curves[K, grid])."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or not 0 <= feature < X.shape[1]:
        raise DimensionMismatch(f"feature {feature} out of range for {X.shape}")
    grid = np.quantile(X[:, feature], np.linspace(0.0, 1.0, grid_points))
    curves = []
    for v in grid:
        forced = X.copy()
        forced[:, feature] = v
        curves.append(model.predict_proba(forced).mean(axis=0))
    return grid, np.asarray(curves).T


# --- ridgeline densities -------------------------------------------------------

@dataclass
class RidgeCurve:
    stage: LifecycleStage
    x: np.ndarray
    density: np.ndarray
    quartiles: tuple  # (Q1, Q2, Q3)

    def quartile_band(self) -> np.ndarray:
        q1, q2, q3 = self.quartiles
        band = np.full(len(self.x), 4, dtype=np.int64)
        band[self.x <= q3] = 3
        band[self.x <= q2] = 2
        band[self.x <= q1] = 1
        return band


@dataclass
class RidgelineSeries:
    feature: str
    curves: list  # RidgeCurve, top-to-bottom sandbox/incubating/graduated


def silverman_bandwidth(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    std = v.std(ddof=1) if n > 1 else 0.0
    iqr = np.quantile(v, 0.75) - np.quantile(v, 0.25)
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    if spread == 0.0:
        spread = max(abs(v).max(), 1.0) * 1e-3  # degenerate sample
    return 0.9 * spread * n ** (-0.2)


def ridgeline_series(values_by_class: dict, feature: str,
                     bandwidth: float = None, grid_points: int = 256) -> RidgelineSeries:
    """Gaussian KDE per class on a shared-rule grid, quartiles on the raw
    values (linear interpolation)."""
    curves = []
    for stage in RIDGE_CLASS_ORDER:
        if stage not in values_by_class:
            continue
        values = np.asarray(values_by_class[stage], dtype=np.float64)
        if len(values) < 2:
            raise ClassTooSmall(f"class {stage.slug()} has {len(values)} value(s)")
        h = bandwidth if bandwidth is not None else silverman_bandwidth(values)
        grid = np.linspace(values.min() - 3 * h, values.max() + 3 * h, grid_points)
        z = (grid[:, None] - values[None, :]) / h
        density = np.exp(-0.5 * z * z).sum(axis=1) / (len(values) * h * math.sqrt(2 * math.pi))
        quartiles = tuple(float(q) for q in np.quantile(values, [0.25, 0.5, 0.75]))
        curves.append(RidgeCurve(stage=stage, x=grid, density=density,
                                 quartiles=quartiles))
    if not curves:
        raise ClassTooSmall("no classes supplied")
    return RidgelineSeries(feature=feature, curves=curves)


@dataclass
class DiagnosticsSummary:
    spearman: np.ndarray
    spearman_flags: np.ndarray
    shapiro: dict    # feature -> (W, p) or None when degenerate
    boxs_m: tuple    # (M, df, p) or None when not computable

    def to_dict(self, column_names):
        return {
            "spearman": self.spearman.tolist(),
            "spearman_undefined": self.spearman_flags.tolist(),
            "shapiro_wilk": {
                name: (None if self.shapiro.get(name) is None else {
                    "W": self.shapiro[name][0], "p": self.shapiro[name][1],
                })
                for name in column_names
            },
            "boxs_m": (None if self.boxs_m is None else {
                "statistic": self.boxs_m[0], "df": self.boxs_m[1], "p": self.boxs_m[2],
            }),
        }


def summarize(X, y, column_names) -> DiagnosticsSummary:
    rho, flags = spearman_matrix(X)
    shapiro = {}
    for j, name in enumerate(column_names):
        col = np.asarray(X)[:, j]
        try:
            shapiro[name] = shapiro_wilk(col)
        except (SampleSizeOutOfRange, ConstantColumn):
            shapiro[name] = None
    try:
        box = boxs_m(X, y) if y is not None else None
    except SingularCovariance:
        box = None
    return DiagnosticsSummary(spearman=rho, spearman_flags=flags,
                              shapiro=shapiro, boxs_m=box)
