"""Reference imputers for missing view rows: mean, KNN, and SVT completion.

These fill missing rows so that any complete-data classifier can run on
incomplete data; they never touch present entries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from mvtsk.dataset import DegeneracyWarning, MultiViewDataset, ViewBlock


@dataclass
class ImputedDataset:
    """A completed dataset plus the record of which rows were filled."""

    dataset: MultiViewDataset
    imputed_rows: list  # list[np.ndarray(bool)], True where a row was filled


def _completed(ds: MultiViewDataset, filled: list) -> ImputedDataset:
    views = [
        ViewBlock(vb.name, filled[v], np.ones(ds.n_instances, dtype=bool))
        for v, vb in enumerate(ds.views)
    ]
    record = [vb.missing.copy() for vb in ds.views]
    return ImputedDataset(MultiViewDataset(views, ds.labels.copy(), ds.n_classes), record)


def mean_impute(ds: MultiViewDataset) -> ImputedDataset:
    """Missing rows of each view become that view's present-row column means."""
    filled = []
    for vb in ds.views:
        if not vb.present.any():
            raise ValueError(f"view '{vb.name}': no present rows to average")
        data = vb.data.copy()
        data[vb.missing] = vb.data[vb.present].mean(axis=0)
        filled.append(data)
    return _completed(ds, filled)


def knn_impute(ds: MultiViewDataset, k: int) -> ImputedDataset:
    """Missing rows become the mean of the k nearest donors' rows.

    Donors for instance i in view v are the instances present in view v;
    distance is Euclidean over the concatenation of the views present in
    both i and the donor.  Rows with no shared view with any donor fall
    back to the view's mean (with a warning).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    present = np.column_stack([vb.present for vb in ds.views])
    means = [vb.data[vb.present].mean(axis=0) if vb.present.any() else None for vb in ds.views]

    filled = [vb.data.copy() for vb in ds.views]
    n_fallback = 0
    for v, vb in enumerate(ds.views):
        donors = np.flatnonzero(vb.present)
        if donors.size == 0:
            raise ValueError(f"view '{vb.name}': no donors available")
        for i in np.flatnonzero(vb.missing):
            shared = present[i][:, None] & present[donors].T  # V x n_donors
            usable = shared.any(axis=0)
            if not usable.any():
                if means[v] is None:
                    raise ValueError(f"view '{vb.name}': no donors and no mean fallback")
                filled[v][i] = means[v]
                n_fallback += 1
                continue
            cand = donors[usable]
            dists = np.zeros(cand.size)
            for w in range(ds.n_views):
                both = present[i, w] & present[cand, w]
                if not both.any():
                    continue
                diff = ds.views[w].data[cand[both]] - ds.views[w].data[i]
                dists[both] += (diff**2).sum(axis=1)
            order = np.argsort(dists, kind="stable")[: min(k, cand.size)]
            filled[v][i] = ds.views[v].data[cand[order]].mean(axis=0)
    if n_fallback:
        warnings.warn(
            f"{n_fallback} rows had no shared view with any donor; used mean imputation",
            DegeneracyWarning,
        )
    return _completed(ds, filled)


def svt_matrix(
    M: np.ndarray,
    observed: np.ndarray,
    tau: float,
    step: float,
    max_iters: int = 500,
    tol: float = 1e-4,
) -> np.ndarray:
    """Singular value thresholding on one matrix with an entrywise mask.

    Iterates the standard dual scheme: shrink the dual's singular values by
    tau, then step the dual along the observed-entry residual, until the
    relative residual on the observed set drops below tol.  Raises if the
    residual grows for 10 consecutive iterations.
    """
    M = np.asarray(M, dtype=float)
    observed = np.asarray(observed, dtype=bool)
    obs_norm = np.linalg.norm(M[observed])
    if obs_norm == 0:
        return np.zeros_like(M)

    Y = np.zeros_like(M)
    prev = np.inf
    growth = 0
    for _ in range(max_iters):
        u, s, vt = np.linalg.svd(Y, full_matrices=False)
        s = np.maximum(s - tau, 0.0)
        X = (u * s) @ vt
        resid = np.linalg.norm((X - M)[observed]) / obs_norm
        if resid < tol:
            return X
        growth = growth + 1 if resid > prev else 0
        if growth >= 10:
            raise RuntimeError(f"SVT diverged: residual grew 10 iterations to {resid:.3e}")
        prev = resid
        Y = Y + step * np.where(observed, M - X, 0.0)
    return X


def svt_complete(
    ds: MultiViewDataset,
    tau: float | None = None,
    step: float | None = None,
    max_iters: int = 500,
    tol: float = 1e-4,
) -> ImputedDataset:
    """Low-rank completion of the horizontally concatenated views.

    A missing view row is a block of missing entries in the N x sum(d_v)
    stacked matrix.  Defaults follow the usual parameterization:
    tau = 5 sqrt(N D), step = 1.2 N D / |observed|.
    """
    stacked = np.hstack([vb.data for vb in ds.views])
    observed = np.hstack(
        [np.repeat(vb.present[:, None], vb.dim, axis=1) for vb in ds.views]
    )
    n, total_d = stacked.shape
    if tau is None:
        tau = 5.0 * np.sqrt(n * total_d)
    if step is None:
        step = 1.2 * n * total_d / max(int(observed.sum()), 1)

    completed = svt_matrix(stacked, observed, tau, step, max_iters, tol)
    filled = []
    col = 0
    for vb in ds.views:
        block = vb.data.copy()
        block[vb.missing] = completed[vb.missing, col : col + vb.dim]
        filled.append(block)
        col += vb.dim
    return _completed(ds, filled)
