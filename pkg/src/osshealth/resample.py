"""SMOTE oversampling and Tomek-link cleaning for the training set."""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .errors import ClassTooSmall


def _pairwise_sq_dists(X):
    diff = X[:, None, :] - X[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def smote(ds: Dataset, k: int = 5, seed: int = 0) -> Dataset:
    """Grow every non-majority class to the majority count.

    Synthetic rows interpolate between a random class member and one of
    its k nearest same-class neighbors; ids get a `synthetic:` prefix.
    """
    ds.require_labels()
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = ds.class_counts()
    majority = max(counts.values())
    if all(c == majority for c in counts.values()):
        return ds

    rng = np.random.default_rng(seed)
    new_rows, new_labels, new_ids = [], [], []
    for code in sorted(counts):
        deficit = majority - counts[code]
        if deficit == 0:
            continue
        if counts[code] < 2:
            raise ClassTooSmall(
                f"class {code} has {counts[code]} row(s); SMOTE needs at least 2"
            )
        class_idx = np.flatnonzero(ds.y == code)
        Xc = ds.X[class_idx]
        eff_k = min(k, len(Xc) - 1)
        sq = _pairwise_sq_dists(Xc)
        np.fill_diagonal(sq, np.inf)
        # stable ordering: distance, then lower index
        neighbor_order = np.argsort(sq, axis=1, kind="stable")[:, :eff_k]
        for serial in range(deficit):
            base = int(rng.integers(len(Xc)))
            nn = int(neighbor_order[base, rng.integers(eff_k)])
            u = rng.uniform(0.0, 1.0)
            new_rows.append(Xc[base] + u * (Xc[nn] - Xc[base]))
            new_labels.append(code)
            new_ids.append(f"synthetic:{code}:{serial}")

    return Dataset(
        X=np.vstack([ds.X, np.array(new_rows)]) if new_rows else ds.X.copy(),
        y=np.concatenate([ds.y, np.array(new_labels, dtype=np.int64)]),
        column_names=list(ds.column_names),
        row_ids=list(ds.row_ids) + new_ids,
    )


def tomek_links(ds: Dataset) -> list:
    """Unordered pairs (i, j), i < j, of opposite-class rows that are
    mutually nearest neighbors (Euclidean, ties to the lower index)."""
    if ds.n_rows < 2:
        return []
    sq = _pairwise_sq_dists(ds.X)
    np.fill_diagonal(sq, np.inf)
    nearest = np.argmin(sq, axis=1)  # argmin takes the lowest index on ties
    links = []
    for i in range(ds.n_rows):
        j = int(nearest[i])
        if j > i and int(nearest[j]) == i and ds.y[i] != ds.y[j]:
            links.append((i, j))
    return links


def smote_tomek(ds: Dataset, k: int = 5, seed: int = 0,
                remove: str = "both") -> Dataset:
    """SMOTE, then drop Tomek-link members ('both' endpoints by default;
    'majority' drops only the majority-class endpoint). Repeats link
    removal until none remain, preserving surviving row order."""
    out = smote(ds, k=k, seed=seed)
    while True:
        links = tomek_links(out)
        if not links:
            return out
        counts = out.class_counts()
        majority = max(counts, key=lambda c: (counts[c], -c))
        doomed = set()
        for i, j in links:
            if remove == "both":
                doomed.update((i, j))
            else:
                for idx in (i, j):
                    if int(out.y[idx]) == majority:
                        doomed.add(idx)
        if not doomed:
            return out
        out = out.take([i for i in range(out.n_rows) if i not in doomed])
