"""Gaussian sampling, sample covariances and sample CCA.

Sample covariances use the divisor ``n`` and, by default, no centering: the
data are assumed to have mean zero.  Sample CCA never regularizes silently;
a ridge term must be requested explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch, InvalidShape, NotPsd, RankTooLarge, Singular, TooFewSamples
from .linalg import EPS_PD, TOL_PSD, as_matrix, sqrt_and_inv_sqrt, svd
from .population import CanonicalDecomposition, JointCovariance, TOL_UNIT

TIE_TOL = 1e-12

__all__ = [
    "DataPair",
    "SampleCovariances",
    "sample_gaussian",
    "sample_covariances",
    "sample_cca",
    "standard_form_reduce",
    "write_data_pair",
    "read_data_pair",
    "read_matrix_csv",
    "cca",
]


@dataclass(frozen=True)
class DataPair:
    """Paired observations: ``x`` is n x p1, ``y`` is n x p2."""

    x: NDArray[np.float64]
    y: NDArray[np.float64]

    def __post_init__(self) -> None:
        x = as_matrix(self.x, "x")
        y = as_matrix(self.y, "y")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class SampleCovariances:
    sx: NDArray[np.float64]
    sy: NDArray[np.float64]
    sxy: NDArray[np.float64]
    n: int


def _joint_factor(sigma: NDArray[np.float64]) -> NDArray[np.float64]:
    """Factor ``L`` with ``L L^T = Sigma`` for a PSD joint covariance.

    PD inputs get a plain Cholesky factor.  For PSD-but-singular inputs a
    Cholesky factor of ``Sigma + 1e-12 ||Sigma|| I`` would leave noise of
    order 1e-6 in the degenerate directions, so the eigen factor
    ``V sqrt(w)`` is used instead; it reproduces exact linear relations.
    """
    w, v = np.linalg.eigh(sigma)
    scale = max(abs(w[0]), abs(w[-1]))
    if w[0] < -TOL_PSD * scale:
        raise NotPsd(f"joint covariance has eigenvalue {w[0]:.3e}")
    if scale > 0.0 and w[0] >= EPS_PD * scale:
        return np.linalg.cholesky(sigma)
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_gaussian(cov: JointCovariance, n: int, seed: Any = None) -> DataPair:
    """Draw ``n`` i.i.d. rows from ``N(0, Sigma)``.

    Parameters
    ----------
    cov : JointCovariance
        Joint covariance, PSD.
    n : int
        Number of rows, at least 1.
    seed : int, SeedSequence or Generator
        Anything accepted by :func:`numpy.random.default_rng`.

    Returns
    -------
    DataPair
    """
    if n < 1:
        raise TooFewSamples(f"n must be >= 1, got {n}")
    factor = _joint_factor(cov.full)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, factor.shape[1])) @ factor.T
    return DataPair(z[:, : cov.p1], z[:, cov.p1 :])


def sample_covariances(data: DataPair, center: bool = False) -> SampleCovariances:
    """Cross-product covariances with divisor ``n``; optional centering."""
    x, y, n = data.x, data.y, data.n
    if center:
        if n < 2:
            raise TooFewSamples("centering needs at least 2 rows")
        x = x - x.mean(axis=0)
        y = y - y.mean(axis=0)
    sx = x.T @ x / n
    sy = y.T @ y / n
    return SampleCovariances(0.5 * (sx + sx.T), 0.5 * (sy + sy.T), x.T @ y / n, n)


def sample_cca(covs: SampleCovariances, k: int, ridge: float = 0.0) -> CanonicalDecomposition:
    """Top-``k`` sample canonical pairs.

    ``Phi_hat = Sx^{-1/2} U_k`` and ``Psi_hat = Sy^{-1/2} V_k`` where
    ``U_k, V_k`` are the top singular vectors of ``Sx^{-1/2} Sxy Sy^{-1/2}``.

    Parameters
    ----------
    covs : SampleCovariances
    k : int
        Number of pairs, ``1 <= k <= min(p1, p2)``.
    ridge : float, default 0
        Added to the diagonals of ``Sx`` and ``Sy`` before whitening.

    Raises
    ------
    Singular
        If a (ridged) marginal sample covariance is numerically singular.
    RankTooLarge
        If ``k`` is out of range.
    """
    p1, p2 = covs.sx.shape[0], covs.sy.shape[0]
    if not 1 <= k <= min(p1, p2):
        raise RankTooLarge(f"k = {k} must lie in [1, {min(p1, p2)}]")
    sx, sy = covs.sx, covs.sy
    if ridge:
        sx = sx + ridge * np.eye(p1)
        sy = sy + ridge * np.eye(p2)
    try:
        _, ax = sqrt_and_inv_sqrt(sx)
        _, ay = sqrt_and_inv_sqrt(sy)
    except NotPsd as exc:  # rounding can push a rank-deficient Gram matrix slightly negative
        raise Singular(str(exc)) from exc
    dec = svd(ax @ covs.sxy @ ay)
    s = dec.singulars
    if s[0] > 1.0 + TOL_UNIT:
        # can only happen through rounding on nearly singular inputs
        raise Singular(f"sample correlation {s[0]:.12g} exceeds 1")
    info: dict[str, Any] = {"ridge": float(ridge)}
    if k < s.size and s[k - 1] - s[k] <= TIE_TOL:
        info["tie_at_k"] = True
    lam = np.clip(s[:k], 0.0, 1.0)
    return CanonicalDecomposition(
        phi=ax @ dec.left[:, :k], psi=ay @ dec.right[:, :k], lambdas=lam, info=info
    )


def standard_form_reduce(data: DataPair, pop: CanonicalDecomposition) -> DataPair:
    """Map data to canonical coordinates ``a = Phi^T x``, ``b = Psi^T y``.

    ``pop`` must carry square loadings (see ``population_cca(..., complete=True)``).
    """
    phi, psi = pop.phi, pop.psi
    if phi.shape != (data.x.shape[1],) * 2 or psi.shape != (data.y.shape[1],) * 2:
        raise InvalidShape("standard-form reduction needs square loadings for both views")
    for m, name in ((phi, "phi"), (psi, "psi")):
        s = np.linalg.svd(m, compute_uv=False)
        if s[-1] < EPS_PD * s[0]:
            raise Singular(f"{name} is not full rank")
    return DataPair(data.x @ phi, data.y @ psi)


def write_data_pair(data: DataPair, x_path: str | Path, y_path: str | Path, header: bool = False) -> None:
    """Write X and Y to two CSV files with round-trip precision."""
    for m, path, prefix in ((data.x, x_path, "x"), (data.y, y_path, "y")):
        lines = []
        if header:
            lines.append(",".join(f"{prefix}{j + 1}" for j in range(m.shape[1])))
        lines.extend(",".join(repr(float(v)) for v in row) for row in m)
        Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path: str | Path, header: bool = False) -> NDArray[np.float64]:
    """Read a plain numeric CSV matrix."""
    m = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    return as_matrix(m, str(path))


def read_data_pair(x_path: str | Path, y_path: str | Path, header: bool = False) -> DataPair:
    return DataPair(read_matrix_csv(x_path, header), read_matrix_csv(y_path, header))


def cca(x: ArrayLike, y: ArrayLike, k: int, center: bool = False, ridge: float = 0.0) -> CanonicalDecomposition:
    """Convenience wrapper: sample CCA directly from data matrices."""
    return sample_cca(sample_covariances(DataPair(x, y), center=center), k, ridge=ridge)
