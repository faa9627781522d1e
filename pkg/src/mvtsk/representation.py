"""Joint missing-row imputation and common/specific representation learning.

Each view X^v (N x d_v, absent rows zeroed) is modeled as

    X~^v = X^v + E^v U^v  ~=  Hs^v.T @ Bs^v + Hc.T @ Bc^v

where Hc (m x N) is shared across views, Hs^v (m x N) is private to view v,
Bs^v/Bc^v (m x d_v) are the bases, E^v is the diagonal missing-row
indicator, and U^v holds learned corrections for the missing rows only.
The objective adds an orthogonality penalty between the two representations
(weight lam1), Laplacian smoothness of the imputed views on graphs built
from the current representations (lam2), and a local-reconstruction penalty
on the same graphs (lam3).  Every block has a closed-form minimizer, so
training is plain block coordinate descent; a tiny ridge keeps all systems
solvable.

Test-time transform keeps the trained bases frozen and learns only the test
set's representations and corrections with the same updates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from mvtsk.dataset import DegeneracyWarning, MultiViewDataset
from mvtsk.graphs import GraphOperators, build_operators


class ConvergenceError(RuntimeError):
    """The objective became non-finite during optimization."""


@dataclass
class DualRepConfig:
    """Hyperparameters for representation learning.

    m              latent dimension (shared by the common and specific parts)
    lam1           orthogonality penalty between specific and common parts
    lam2           first-order (Laplacian) graph penalty on imputed views
    lam3           second-order (reconstruction) graph penalty
    p              neighbor count for the similarity graphs
    max_iters      iteration cap T
    tol            relative objective-change stopping tolerance
    ridge          small diagonal added to every linear system
    graph_refresh  rebuild graphs every k iterations; None freezes them
                   after initialization
    """

    m: int = 10
    lam1: float = 1.0
    lam2: float = 1.0
    lam3: float = 1.0
    p: int = 5
    max_iters: int = 100
    tol: float = 1e-6
    ridge: float = 1e-8
    graph_refresh: int | None = 1
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if min(self.lam1, self.lam2, self.lam3) < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.ridge <= 0:
            raise ValueError("ridge must be positive")
        if self.graph_refresh is not None and not math.isinf(self.graph_refresh):
            if self.graph_refresh < 1:
                raise ValueError("graph_refresh must be >= 1, or None to freeze")
        elif self.graph_refresh is not None:
            self.graph_refresh = None  # inf means never refresh

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "lam1": self.lam1,
            "lam2": self.lam2,
            "lam3": self.lam3,
            "p": self.p,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "ridge": self.ridge,
            "graph_refresh": self.graph_refresh,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DualRepConfig":
        return cls(**d)


@dataclass
class DualRepModel:
    """State of the factorization for one dataset.

    X[v]    zero-filled data, N x d_v        missing[v]  bool vector, length N
    Hs[v]   specific representation, m x N   Bs[v]       its basis, m x d_v
    Hc      common representation, m x N     Bc[v]       common basis, m x d_v
    U[v]    corrections, N x d_v, nonzero only on missing rows
    Xt[v]   imputed view, X[v] + U[v] on missing rows (X + E U)

    col_means[v] holds the per-feature means over present training rows and
    seeds the imputation of unseen data.
    """

    X: list
    missing: list
    Hs: list
    Bs: list
    Bc: list
    U: list
    Hc: np.ndarray
    Xt: list
    col_means: list
    config: DualRepConfig
    objective_trace: list = field(default_factory=list)

    @property
    def n_views(self) -> int:
        return len(self.X)

    @property
    def n_instances(self) -> int:
        return self.X[0].shape[0]

    def refresh_imputed(self, v: int):
        """Recompute Xt[v] = X[v] + E[v] U[v]; present rows stay bit-exact."""
        xt = self.X[v].copy()
        miss = self.missing[v]
        xt[miss] += self.U[v][miss]
        self.Xt[v] = xt

    def reconstruction(self, v: int) -> np.ndarray:
        """Model estimate Hs^v.T Bs^v + Hc.T Bc^v, N x d_v."""
        return self.Hs[v].T @ self.Bs[v] + self.Hc.T @ self.Bc[v]


def init_model(ds: MultiViewDataset, cfg: DualRepConfig) -> DualRepModel:
    """Seeded uniform [0, 1) representations and bases; missing rows of the
    imputed views warm-started at the per-view present-row feature means
    (stored through U so Xt = X + E U holds from the start)."""
    if cfg.m > min(ds.dims):
        warnings.warn(
            f"latent dimension m={cfg.m} exceeds the smallest view dimension "
            f"{min(ds.dims)}; the factorization is over-parameterized",
            DegeneracyWarning,
        )
    rng = np.random.default_rng(cfg.seed)
    n = ds.n_instances
    X, missing, Hs, Bs, Bc, U, Xt, col_means = [], [], [], [], [], [], [], []
    for vb in ds.views:
        X.append(vb.data.copy())
        missing.append(vb.missing.copy())
        Hs.append(rng.uniform(size=(cfg.m, n)))
        Bs.append(rng.uniform(size=(cfg.m, vb.dim)))
        Bc.append(rng.uniform(size=(cfg.m, vb.dim)))
        means = vb.data[vb.present].mean(axis=0) if vb.present.any() else np.zeros(vb.dim)
        col_means.append(means)
        u = np.zeros((n, vb.dim))
        u[vb.missing] = means
        U.append(u)
        Xt.append(None)
    Hc = rng.uniform(size=(cfg.m, n))
    model = DualRepModel(X, missing, Hs, Bs, Bc, U, Hc, Xt, col_means, cfg)
    for v in range(model.n_views):
        model.refresh_imputed(v)
    return model


def refresh_graphs(model: DualRepModel, cfg: DualRepConfig):
    """Operators for each specific representation and the common one.

    Graph nodes are instances, i.e. columns of the representations.
    """
    specific_ops = [build_operators(model.Hs[v].T, cfg.p) for v in range(model.n_views)]
    common_ops = build_operators(model.Hc.T, cfg.p)
    return specific_ops, common_ops


def _penalty_matrix(spec_op: GraphOperators, common_op: GraphOperators, cfg: DualRepConfig):
    return cfg.lam2 * (spec_op.laplacian + common_op.laplacian) + cfg.lam3 * (
        spec_op.reconstruction + common_op.reconstruction
    )


def update_error(
    model: DualRepModel, v: int, spec_op: GraphOperators, common_op: GraphOperators,
    cfg: DualRepConfig,
) -> np.ndarray:
    """Closed-form corrections for view v's missing rows.

    Only the missing-row submatrix of the normal equations is solved (the
    indicator zeroes the present rows, so the full system is singular by
    construction); present rows of the result are exactly zero.
    """
    miss = model.missing[v]
    u = np.zeros_like(model.U[v])
    if not miss.any():
        return u
    m2 = _penalty_matrix(spec_op, common_op, cfg)
    rhs_full = model.reconstruction(v) - model.X[v] - m2 @ model.X[v]
    sub = np.ix_(miss, miss)
    nm = int(miss.sum())
    system = np.eye(nm) + m2[sub] + cfg.ridge * np.eye(nm)
    try:
        u[miss] = np.linalg.solve(system, rhs_full[miss])
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            f"singular imputation system for view {v}; graphs are ill-conditioned"
        ) from exc
    return u


def update_specific(model: DualRepModel, v: int, cfg: DualRepConfig) -> np.ndarray:
    """Least-squares specific representation given everything else."""
    Bs, Bc, Hc = model.Bs[v], model.Bc[v], model.Hc
    lhs = Bs @ Bs.T + cfg.lam1 * (Hc @ Hc.T) + cfg.ridge * np.eye(cfg.m)
    rhs = Bs @ model.Xt[v].T - Bs @ Bc.T @ Hc
    return np.linalg.solve(lhs, rhs)


def update_specific_basis(model: DualRepModel, v: int, cfg: DualRepConfig) -> np.ndarray:
    Hs, Hc, Bc = model.Hs[v], model.Hc, model.Bc[v]
    lhs = Hs @ Hs.T + cfg.ridge * np.eye(cfg.m)
    rhs = Hs @ model.Xt[v] - Hs @ Hc.T @ Bc
    return np.linalg.solve(lhs, rhs)


def update_common_basis(model: DualRepModel, v: int, cfg: DualRepConfig) -> np.ndarray:
    """Per-view least-squares common basis (the cross-view sum printed in
    some derivations is dimensionally inconsistent for unequal d_v)."""
    Hs, Hc, Bs = model.Hs[v], model.Hc, model.Bs[v]
    lhs = Hc @ Hc.T + cfg.ridge * np.eye(cfg.m)
    rhs = Hc @ model.Xt[v] - Hc @ Hs.T @ Bs
    return np.linalg.solve(lhs, rhs)


def update_common(model: DualRepModel, cfg: DualRepConfig) -> np.ndarray:
    """Shared representation from the cross-view normal equations."""
    lhs = cfg.ridge * np.eye(cfg.m)
    rhs = np.zeros((cfg.m, model.n_instances))
    for v in range(model.n_views):
        Bc, Bs, Hs = model.Bc[v], model.Bs[v], model.Hs[v]
        lhs = lhs + Bc @ Bc.T + cfg.lam1 * (Hs @ Hs.T)
        rhs = rhs + Bc @ model.Xt[v].T - Bc @ Bs.T @ Hs
    return np.linalg.solve(lhs, rhs)


def objective(model: DualRepModel, specific_ops, common_ops, cfg: DualRepConfig) -> float:
    """Total loss: squared reconstruction error, orthogonality penalty, and
    the two graph penalties evaluated on the imputed views."""
    total = 0.0
    for v in range(model.n_views):
        xt = model.Xt[v]
        resid = xt - model.reconstruction(v)
        total += float((resid**2).sum())
        total += cfg.lam1 * float(((model.Hs[v].T @ model.Hc) ** 2).sum())
        lap = specific_ops[v].laplacian + common_ops.laplacian
        rec = specific_ops[v].reconstruction + common_ops.reconstruction
        total += cfg.lam2 * float(np.sum(xt * (lap @ xt)))
        total += cfg.lam3 * float(np.sum(xt * (rec @ xt)))
    return total


def _should_refresh(iteration: int, cfg: DualRepConfig) -> bool:
    if iteration == 1:
        return False  # representations unchanged since init-time build
    return cfg.graph_refresh is not None and (iteration - 1) % cfg.graph_refresh == 0


def _run(model: DualRepModel, cfg: DualRepConfig, update_bases: bool) -> DualRepModel:
    specific_ops, common_ops = refresh_graphs(model, cfg)
    trace = [objective(model, specific_ops, common_ops, cfg)]
    for t in range(1, cfg.max_iters + 1):
        if _should_refresh(t, cfg):
            specific_ops, common_ops = refresh_graphs(model, cfg)
        for v in range(model.n_views):
            model.U[v] = update_error(model, v, specific_ops[v], common_ops, cfg)
            model.refresh_imputed(v)
            model.Hs[v] = update_specific(model, v, cfg)
            if update_bases:
                model.Bs[v] = update_specific_basis(model, v, cfg)
                model.Bc[v] = update_common_basis(model, v, cfg)
        model.Hc = update_common(model, cfg)
        value = objective(model, specific_ops, common_ops, cfg)
        if not np.isfinite(value):
            raise ConvergenceError(
                f"objective became non-finite at iteration {t} (trace: {trace[-3:]})"
            )
        trace.append(value)
        if abs(trace[-1] - trace[-2]) / max(abs(trace[-1]), 1.0) < cfg.tol:
            break
    model.objective_trace = trace
    return model


def fit(ds: MultiViewDataset, cfg: DualRepConfig) -> DualRepModel:
    """Block coordinate descent until the objective change is below tol or
    max_iters is reached.  The trace records the initial objective followed
    by one value per iteration."""
    return _run(init_model(ds, cfg), cfg, update_bases=True)


@dataclass
class TransformResult:
    """Representations, corrections, and imputed views learned for new data."""

    U: list
    Hs: list
    Hc: np.ndarray
    Xt: list
    objective_trace: list


def transform(model: DualRepModel, ds: MultiViewDataset, cfg: DualRepConfig | None = None) -> TransformResult:
    """Impute and represent unseen data under the trained (frozen) bases.

    Only the new data's corrections and representations are learned; graphs
    are rebuilt from the new representations on the training schedule.
    Missing rows warm-start at the training feature means.
    """
    cfg = model.config if cfg is None else cfg
    if [vb.dim for vb in ds.views] != [x.shape[1] for x in model.X]:
        raise ValueError(
            f"view dimensions {[vb.dim for vb in ds.views]} do not match the "
            f"trained model {[x.shape[1] for x in model.X]}"
        )
    rng = np.random.default_rng(cfg.seed)
    n = ds.n_instances
    X, missing, Hs, U, Xt = [], [], [], [], []
    for v, vb in enumerate(ds.views):
        X.append(vb.data.copy())
        missing.append(vb.missing.copy())
        Hs.append(rng.uniform(size=(cfg.m, n)))
        u = np.zeros((n, vb.dim))
        u[vb.missing] = model.col_means[v]
        U.append(u)
        Xt.append(None)
    Hc = rng.uniform(size=(cfg.m, n))
    state = DualRepModel(
        X, missing, Hs, [b.copy() for b in model.Bs], [b.copy() for b in model.Bc],
        U, Hc, Xt, model.col_means, cfg,
    )
    for v in range(state.n_views):
        state.refresh_imputed(v)
    _run(state, cfg, update_bases=False)
    return TransformResult(state.U, state.Hs, state.Hc, state.Xt, state.objective_trace)
