"""Seeded Monte-Carlo experiments on the subspace loss of sample CCA.

Each grid cell is a (model, n) pair.  Replicate ``r`` of cell ``c`` draws its
data from ``SeedSequence(master_seed, spawn_key=(c, r))``, so results do not
depend on execution order or on how many threads run the cells.  Losses are
always measured against the population loadings under the true ``Sigma_x``:

* ``op``  : ``||P_hat - P||^2``    (in [0, 1])
* ``fro`` : ``||P_hat - P||_F^2``  (in [0, 2k])
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
import scipy.stats
from numpy.typing import ArrayLike, NDArray

from .errors import (
    AllReplicatesFailed,
    CCAError,
    InvalidConfig,
    MismatchedGrids,
    NonPositiveLoss,
    RankDeficient,
    Singular,
    TooFewPoints,
)
from .estimator import DataPair, sample_cca, sample_covariances, sample_gaussian
from .linalg import orthonormal_basis, sqrt_and_inv_sqrt
from .population import (
    CanonicalSpec,
    apply_transform,
    build_joint,
    population_cca,
)
from .theory import (
    RateParams,
    first_order_frobenius_loss,
    sample_size_condition,
    upper_rate,
)

METRICS = ("op", "fro")
CSV_HEADER = (
    "cell_index",
    "n",
    "p1",
    "p2",
    "k",
    "lambda_k",
    "lambda_k1",
    "kappa_x",
    "kappa_y",
    "metric",
    "mean_loss",
    "std_err",
    "replicates",
    "failures",
    "rate_principal",
    "rate_high_order",
)

__all__ = [
    "METRICS",
    "CSV_HEADER",
    "ExperimentConfig",
    "Cell",
    "CellResult",
    "replicate_seed",
    "projector_losses",
    "run_cell",
    "run_sweep",
    "results_to_csv",
    "results_to_json",
    "fit_rate_slope",
    "factor_ratio_test",
    "invariance_experiment",
    "p2_independence_experiment",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid of models and sample sizes with replicate settings.

    ``k`` overrides the models' own target rank when given.
    """

    models: tuple[CanonicalSpec, ...]
    n_grid: tuple[int, ...]
    replicates: int
    master_seed: int = 0
    k: int | None = None
    losses: tuple[str, ...] = METRICS
    ridge: float = 0.0
    center: bool = False

    def __post_init__(self) -> None:
        models = (self.models,) if isinstance(self.models, CanonicalSpec) else tuple(self.models)
        if not models:
            raise InvalidConfig("at least one model is required")
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "losses", tuple(self.losses))
        if self.replicates < 2:
            raise InvalidConfig("replicates must be at least 2")
        if not self.n_grid:
            raise InvalidConfig("n_grid must not be empty")
        if not self.losses or set(self.losses) - set(METRICS):
            raise InvalidConfig(f"losses must be a non-empty subset of {METRICS}")
        if self.ridge < 0.0:
            raise InvalidConfig("ridge must be non-negative")
        for m in models:
            if min(self.n_grid) <= max(m.p1, m.p2):
                raise InvalidConfig(f"every n must exceed max(p1, p2) = {max(m.p1, m.p2)}")
            k = self.k if self.k is not None else m.k
            if k is None or not 1 <= k < m.p:
                raise InvalidConfig("each model needs a target rank k with 1 <= k < p")
            if not m.lambdas[k - 1] > m.lambdas[k]:
                raise InvalidConfig("eigen-gap Delta = 0 at the target rank")

    def rank(self, model: CanonicalSpec) -> int:
        return int(self.k if self.k is not None else model.k)

    def cells(self) -> list["Cell"]:
        """Cartesian grid in lexicographic (model, n) order."""
        out = []
        for idx, (mi, n) in enumerate(itertools.product(range(len(self.models)), self.n_grid)):
            out.append(Cell(idx, mi, n, self.rank(self.models[mi])))
        return out


@dataclass(frozen=True)
class Cell:
    index: int
    model_index: int
    n: int
    k: int


@dataclass
class CellResult:
    """Aggregated losses of one cell.

    ``std_err`` is the sample standard deviation over successful replicates
    divided by the square root of their number.
    """

    cell_index: int
    model_index: int
    params: dict[str, Any]
    mean_loss: dict[str, float]
    std_err: dict[str, float]
    replicates: int
    failures: int
    rate_refs: dict[str, dict[str, float]]
    losses: dict[str, list[float]] = field(default_factory=dict, repr=False)

    def to_dict(self, include_losses: bool = False) -> dict:
        d = asdict(self)
        if not include_losses:
            d.pop("losses")
        return d


def replicate_seed(master_seed: int, cell_index: int, replicate: int) -> np.random.SeedSequence:
    """Seed for one replicate; a pure function of its three arguments."""
    return np.random.SeedSequence(master_seed, spawn_key=(cell_index, replicate))


def projector_losses(basis_true: NDArray[np.float64], basis_est: NDArray[np.float64]) -> dict[str, float]:
    """Squared operator and Frobenius norms of the projector difference.

    Both arguments are orthonormal bases of whitened subspaces of equal
    dimension.  The cosines ``c`` of the principal angles give
    ``op = 1 - c_min^2`` and ``fro = 2 sum (1 - c)(1 + c)``.
    """
    cos = np.clip(np.linalg.svd(basis_true.T @ basis_est, compute_uv=False), 0.0, 1.0)
    sin2 = (1.0 - cos) * (1.0 + cos)
    return {"op": float(sin2.max()), "fro": float(2.0 * sin2.sum())}


@dataclass(frozen=True)
class _Population:
    """Per-model quantities reused across cells."""

    spec: CanonicalSpec
    root_x: NDArray[np.float64]
    basis: NDArray[np.float64]
    joint: Any
    kappa_x: float
    kappa_y: float


def _prepare(spec: CanonicalSpec, k: int) -> _Population:
    joint = build_joint(spec)
    pop = population_cca(joint)
    root, _ = sqrt_and_inv_sqrt(spec.sigma_x, inverse=False)
    basis = orthonormal_basis(root @ pop.phi[:, :k])
    return _Population(spec, root, basis, joint, spec.kappa_x, spec.kappa_y)


def _summarize(values: NDArray[np.float64]) -> tuple[float, float]:
    m = values.size
    mean = float(np.sum(values) / m)
    if m < 2:
        return mean, float("nan")
    var = float(np.sum((values - mean) ** 2) / (m - 1))
    return mean, math.sqrt(var / m)


def _run_cell(
    cell: Cell,
    prep: _Population,
    master_seed: int,
    replicates: int,
    metrics: Sequence[str],
    ridge: float,
    center: bool,
) -> CellResult:
    spec, k, n = prep.spec, cell.k, cell.n
    values: dict[str, list[float]] = {m: [] for m in metrics}
    failures = 0
    for r in range(replicates):
        data = sample_gaussian(prep.joint, n, replicate_seed(master_seed, cell.index, r))
        try:
            est = sample_cca(sample_covariances(data, center=center), k, ridge=ridge)
            basis = orthonormal_basis(prep.root_x @ est.phi)
        except (Singular, RankDeficient):
            failures += 1
            continue
        losses = projector_losses(prep.basis, basis)
        for m in metrics:
            values[m].append(losses[m])
    if failures == replicates:
        raise AllReplicatesFailed(f"all {replicates} replicates of cell {cell.index} failed")
    mean_loss, std_err = {}, {}
    for m in metrics:
        mean_loss[m], std_err[m] = _summarize(np.asarray(values[m]))
    lk, lk1 = float(spec.lambdas[k - 1]), float(spec.lambdas[k])
    params = {
        "n": n,
        "p1": spec.p1,
        "p2": spec.p2,
        "k": k,
        "lambda_k": lk,
        "lambda_k1": lk1,
        "kappa_x": prep.kappa_x,
        "kappa_y": prep.kappa_y,
        "lambdas": spec.lambdas.tolist(),
    }
    rate_refs = {}
    rp = RateParams(spec.p1, spec.p2, n, k, lk, lk1)
    for m, norm in (("op", "operator"), ("fro", "frobenius")):
        terms = upper_rate(rp, norm)
        rate_refs[m] = {"principal": terms.principal, "high_order": terms.high_order}
    rate_refs["condition"] = {"sample_size_ratio": sample_size_condition(rp)}
    return CellResult(
        cell_index=cell.index,
        model_index=cell.model_index,
        params=params,
        mean_loss=mean_loss,
        std_err=std_err,
        replicates=replicates,
        failures=failures,
        rate_refs=rate_refs,
        losses={m: list(v) for m, v in values.items()},
    )


def run_cell(
    cell: Cell,
    config: ExperimentConfig,
    prepared: _Population | None = None,
) -> CellResult:
    """Run all replicates of one cell.

    Replicates whose sample covariance is singular are counted in
    ``failures`` and excluded.

    Raises
    ------
    AllReplicatesFailed
        If no replicate succeeded.
    """
    spec = config.models[cell.model_index]
    prep = prepared if prepared is not None else _prepare(spec, cell.k)
    return _run_cell(
        cell, prep, config.master_seed, config.replicates, config.losses, config.ridge, config.center
    )


def run_sweep(
    config: ExperimentConfig,
    threads: int = 1,
    order: Iterable[int] | None = None,
) -> list[CellResult | CCAError]:
    """Run every cell of the grid.

    Parameters
    ----------
    config : ExperimentConfig
    threads : int, default 1
        Worker threads; cells are independent and results do not depend on it.
    order : iterable of int, optional
        Execution order of cell indices (defaults to grid order).

    Returns
    -------
    list
        One entry per cell in grid order: a :class:`CellResult`, or the
        exception that made the cell fail.
    """
    cells = config.cells()
    order = list(range(len(cells))) if order is None else list(order)
    if sorted(order) != list(range(len(cells))):
        raise InvalidConfig("order must be a permutation of the cell indices")
    preps: dict[int, _Population] = {}
    for mi, spec in enumerate(config.models):
        preps[mi] = _prepare(spec, config.rank(spec))

    def job(i: int) -> CellResult | CCAError:
        cell = cells[i]
        try:
            return run_cell(cell, config, preps[cell.model_index])
        except CCAError as exc:
            return exc

    results: dict[int, CellResult | CCAError] = {}
    if threads <= 1:
        for i in order:
            results[i] = job(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, res in zip(order, pool.map(job, order)):
                results[i] = res
    return [results[i] for i in range(len(cells))]


def _fmt(v: float) -> str:
    return repr(float(v))


def results_to_csv(results: Sequence[CellResult | CCAError]) -> str:
    """CSV text with one row per (cell, metric); failed cells are skipped."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for res in results:
        if not isinstance(res, CellResult):
            continue
        p = res.params
        for m in res.mean_loss:
            w.writerow(
                [
                    res.cell_index,
                    p["n"],
                    p["p1"],
                    p["p2"],
                    p["k"],
                    _fmt(p["lambda_k"]),
                    _fmt(p["lambda_k1"]),
                    _fmt(p["kappa_x"]),
                    _fmt(p["kappa_y"]),
                    m,
                    _fmt(res.mean_loss[m]),
                    _fmt(res.std_err[m]),
                    res.replicates,
                    res.failures,
                    _fmt(res.rate_refs[m]["principal"]),
                    _fmt(res.rate_refs[m]["high_order"]),
                ]
            )
    return buf.getvalue()


def results_to_json(results: Sequence[CellResult | CCAError]) -> str:
    rows = []
    for i, res in enumerate(results):
        if isinstance(res, CellResult):
            rows.append(res.to_dict())
        else:
            rows.append({"cell_index": i, "error": type(res).__name__, "message": str(res)})
    return json.dumps({"cells": rows}, indent=2) + "\n"


# ---------------------------------------------------------------- analyses


def fit_rate_slope(
    results: Sequence[CellResult] | None = None,
    metric: str = "fro",
    axis: str = "n",
    *,
    xs: ArrayLike | None = None,
    ys: ArrayLike | None = None,
) -> tuple[float, float]:
    """OLS slope of ``log(mean_loss)`` against ``log(n)`` and its standard error.

    Either pass cell results (one model) or explicit ``xs`` / ``ys`` arrays.

    Raises
    ------
    TooFewPoints
        With fewer than 3 points.
    NonPositiveLoss
        If a loss is not strictly positive.
    """
    if axis != "n":
        raise InvalidConfig("only the 'n' axis is supported")
    if xs is None or ys is None:
        if results is None:
            raise TooFewPoints("no results given")
        ok = [r for r in results if isinstance(r, CellResult)]
        if len({r.model_index for r in ok}) > 1:
            raise InvalidConfig("results must be filtered to a single model")
        x = np.array([r.params["n"] for r in ok], dtype=float)
        y = np.array([r.mean_loss[metric] for r in ok], dtype=float)
    else:
        x = np.asarray(xs, dtype=float).ravel()
        y = np.asarray(ys, dtype=float).ravel()
    if x.size < 3:
        raise TooFewPoints(f"need at least 3 points, got {x.size}")
    if np.any(y <= 0.0) or np.any(x <= 0.0):
        raise NonPositiveLoss("losses and sample sizes must be positive")
    fit = scipy.stats.linregress(np.log(x), np.log(y))
    return float(fit.slope), float(fit.stderr)


_MATCH_KEYS = ("n", "p1", "p2", "k", "lambda_k")


def factor_ratio_test(
    results_a: Sequence[CellResult],
    results_b: Sequence[CellResult],
    metric: str = "fro",
    threshold: float = 3.0,
    min_fraction: float = 0.8,
) -> dict:
    """Compare observed loss ratios with the upper-bound principal-term ratio.

    The two sweeps must share their grid and differ only in
    ``lambda_{k+1}``.  For each ``n`` the observed ratio ``mean_a / mean_b``
    gets a delta-method standard error
    ``ratio * sqrt((se_a / mean_a)^2 + (se_b / mean_b)^2)``.  The verdict
    passes when ``|observed - predicted| <= threshold * se`` on at least
    ``min_fraction`` of the cells.

    The report also carries the ratio of first-order asymptotic losses as a
    diagnostic.
    """
    a = [r for r in results_a if isinstance(r, CellResult)]
    b = [r for r in results_b if isinstance(r, CellResult)]
    if len(a) != len(b) or not a:
        raise MismatchedGrids("sweeps have different numbers of cells")
    norm = "frobenius" if metric == "fro" else "operator"
    cells = []
    passed = 0
    for ra, rb in zip(a, b):
        pa, pb = ra.params, rb.params
        if any(pa[key] != pb[key] for key in _MATCH_KEYS):
            raise MismatchedGrids(f"cells {ra.cell_index} and {rb.cell_index} differ beyond lambda_k1")
        ma, mb = ra.mean_loss[metric], rb.mean_loss[metric]
        ratio = ma / mb
        se = ratio * math.sqrt((ra.std_err[metric] / ma) ** 2 + (rb.std_err[metric] / mb) ** 2)
        rp_a = RateParams(pa["p1"], pa["p2"], pa["n"], pa["k"], pa["lambda_k"], pa["lambda_k1"])
        rp_b = RateParams(pb["p1"], pb["p2"], pb["n"], pb["k"], pb["lambda_k"], pb["lambda_k1"])
        predicted = upper_rate(rp_a, norm).principal / upper_rate(rp_b, norm).principal
        ok = abs(ratio - predicted) <= threshold * se
        passed += int(ok)
        asym = first_order_frobenius_loss(pa["lambdas"], pa["k"], pa["p1"], pa["n"]) / (
            first_order_frobenius_loss(pb["lambdas"], pb["k"], pb["p1"], pb["n"])
        )
        cells.append(
            {
                "n": pa["n"],
                "observed_ratio": ratio,
                "std_err": se,
                "predicted_ratio": predicted,
                "z": (ratio - predicted) / se if se > 0 else float("inf"),
                "pass": ok,
                "first_order_ratio": asym,
                "condition_a": sample_size_condition(rp_a),
                "condition_b": sample_size_condition(rp_b),
            }
        )
    fraction = passed / len(cells)
    return {"metric": metric, "cells": cells, "fraction_passed": fraction, "verdict": fraction >= min_fraction}


def invariance_experiment(
    model: CanonicalSpec,
    transforms: Sequence[tuple[ArrayLike, ArrayLike]],
    n: int,
    replicates: int,
    seed: int = 0,
    k: int | None = None,
) -> dict:
    """Exact linear invariance of the sample-CCA subspace loss.

    For every replicate one data set is drawn; for each transform pair the
    data become ``(X T1, Y T2)`` and the loss is measured against the
    transformed population loadings ``T1^{-1} Phi`` under
    ``T1^T Sigma_x T1``.  The report holds the largest absolute difference
    from the untransformed loss per metric.
    """
    k = model.k if k is None else k
    joint = build_joint(model)
    pop = population_cca(joint)
    phi = pop.phi[:, :k]
    root, _ = sqrt_and_inv_sqrt(model.sigma_x, inverse=False)
    base_basis = orthonormal_basis(root @ phi)
    prepared = []
    for t1, t2 in transforms:
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        cov_t = apply_transform(joint, t1, t2)
        root_t, _ = sqrt_and_inv_sqrt(cov_t.sigma_x, inverse=False)
        basis_t = orthonormal_basis(root_t @ np.linalg.solve(t1, phi))
        prepared.append((t1, t2, root_t, basis_t))
    max_diff = dict.fromkeys(METRICS, 0.0)
    base_losses = []
    for r in range(replicates):
        data = sample_gaussian(joint, n, replicate_seed(seed, 0, r))
        est = sample_cca(sample_covariances(data), k)
        base = projector_losses(base_basis, orthonormal_basis(root @ est.phi))
        base_losses.append(base)
        for t1, t2, root_t, basis_t in prepared:
            moved = DataPair(data.x @ t1, data.y @ t2)
            est_t = sample_cca(sample_covariances(moved), k)
            loss_t = projector_losses(basis_t, orthonormal_basis(root_t @ est_t.phi))
            for m in METRICS:
                max_diff[m] = max(max_diff[m], abs(loss_t[m] - base[m]))
    return {
        "n": n,
        "replicates": replicates,
        "transforms": len(prepared),
        "max_abs_diff": max_diff,
        "mean_base_loss": {m: float(np.mean([b[m] for b in base_losses])) for m in METRICS},
    }


def p2_independence_experiment(
    lambdas: ArrayLike,
    p1: int,
    p2_grid: Sequence[int],
    k: int,
    n: int,
    replicates: int,
    seed: int = 0,
    fill: float = 0.0,
    metric: str = "fro",
    rel_tol: float = 0.2,
    z_tol: float = 3.0,
) -> dict:
    """Loss of the x-side subspace as the dimension of y grows.

    The model is in standard form: ``lambdas`` followed by ``fill`` up to
    ``min(p1, p2)`` correlations, identity marginals.  Each ``p2`` is one
    cell of a sweep.  The verdict passes when every pair of cells differs by
    at most ``rel_tol`` relative to the smaller mean and by at most
    ``z_tol`` pooled standard errors.  Cells whose sample-size ratio exceeds
    1 are listed under ``condition_violated`` but still run.
    """
    head = np.asarray(lambdas, dtype=float).ravel()
    models = []
    for p2 in p2_grid:
        p = min(p1, p2)
        lam = np.full(p, float(fill))
        lam[: min(head.size, p)] = head[:p]
        models.append(CanonicalSpec(np.eye(p1), np.eye(p2), lam, np.eye(p1)[:, :p], np.eye(p2)[:, :p], k))
    config = ExperimentConfig(tuple(models), (n,), replicates, seed, k, (metric,))
    results = run_sweep(config)
    cells, flagged = [], []
    for p2, res in zip(p2_grid, results):
        if not isinstance(res, CellResult):
            raise res
        ratio = res.rate_refs["condition"]["sample_size_ratio"]
        if ratio > 1.0:
            flagged.append(p2)
        cells.append(
            {
                "p2": p2,
                "mean_loss": res.mean_loss[metric],
                "std_err": res.std_err[metric],
                "failures": res.failures,
                "sample_size_ratio": ratio,
            }
        )
    pairs, verdict = [], True
    for ca, cb in itertools.combinations(cells, 2):
        diff = abs(ca["mean_loss"] - cb["mean_loss"])
        rel = diff / min(ca["mean_loss"], cb["mean_loss"])
        z = diff / math.hypot(ca["std_err"], cb["std_err"])
        ok = rel <= rel_tol and z <= z_tol
        verdict &= ok
        pairs.append({"p2_a": ca["p2"], "p2_b": cb["p2"], "rel_diff": rel, "z": z, "pass": ok})
    return {
        "p1": p1,
        "n": n,
        "k": k,
        "metric": metric,
        "replicates": replicates,
        "cells": cells,
        "pairs": pairs,
        "condition_violated": flagged,
        "verdict": verdict,
    }
