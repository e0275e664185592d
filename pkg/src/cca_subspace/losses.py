"""Principal angles, projection distances and excess prediction loss.

Two reduction matrices ``U1, U2`` (p x k) define variate subspaces
``span(x^T U)``.  Under the covariance inner product these subspaces are
compared through the whitened frames ``Sigma_x^{1/2} U``; the principal
angles between them drive every loss in this module:

* ``l1 = sin^2(theta_1) = ||P1 - P2||^2``
* ``l2 = sum_i sin^2(theta_i) = ||P1 - P2||_F^2 / 2``

The excess prediction loss of replacing an oracle reduction ``U_star`` by
``U`` for a response ``z`` with ``Sigma_xz = Sigma_x^{1/2} r sigma_z`` is
``sigma_z^2 r^T (P_star - P_U) r``.  Its worst case over responses is
``sigma_z^2 R^2 l1`` and its average over a uniform prior on the oracle
subspace is ``sigma_z^2 R^2 l2 / k``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch, InvalidParams, InvalidShape
from .linalg import as_matrix, orthonormal_basis, sqrt_and_inv_sqrt, sym_eig
from .population import JointCovariance, population_cca

__all__ = [
    "SubspaceDistance",
    "PredictionSetup",
    "BayesExcess",
    "principal_angles",
    "prediction_loss",
    "regression_loss",
    "excess_prediction_loss",
    "worst_case_excess",
    "worst_case_direction",
    "bayes_excess",
    "MultiviewReport",
    "multiview_sufficiency_demo",
]


@dataclass(frozen=True)
class SubspaceDistance:
    """Principal angles (descending) and the losses derived from them."""

    angles: NDArray[np.float64]
    l1: float
    l2: float
    op_dist: float
    fro_dist: float

    def to_dict(self) -> dict:
        return {
            "angles": [float(a) for a in self.angles],
            "l1": self.l1,
            "l2": self.l2,
            "op_dist": self.op_dist,
            "fro_dist": self.fro_dist,
        }


def _whitened_bases(
    u1: ArrayLike, u2: ArrayLike, sigma_x: ArrayLike | None
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    a = as_matrix(u1, "u1")
    b = as_matrix(u2, "u2")
    if a.shape != b.shape:
        raise DimensionMismatch(f"u1 has shape {a.shape} but u2 has shape {b.shape}")
    if sigma_x is not None:
        s = as_matrix(sigma_x, "sigma_x")
        if s.shape != (a.shape[0], a.shape[0]):
            raise DimensionMismatch(f"sigma_x has shape {s.shape}, expected {(a.shape[0],) * 2}")
        root, _ = sqrt_and_inv_sqrt(s, inverse=False)
        a, b = root @ a, root @ b
    return orthonormal_basis(a), orthonormal_basis(b)


def principal_angles(u1: ArrayLike, u2: ArrayLike, sigma_x: ArrayLike | None = None) -> SubspaceDistance:
    """Principal angles between ``span(x^T U1)`` and ``span(x^T U2)``.

    Parameters
    ----------
    u1, u2 : array_like, shape (p, k)
        Reduction matrices of full column rank.
    sigma_x : array_like, shape (p, p), optional
        Covariance of ``x`` defining the inner product; identity if omitted.

    Returns
    -------
    SubspaceDistance
        ``l1`` and ``l2`` are computed from the cosines as ``(1 - c)(1 + c)``,
        which stays accurate for tiny losses.  ``op_dist`` and ``fro_dist``
        are norms of the explicit projector difference.

    Examples
    --------
    >>> d = principal_angles([[1.0], [0.0]], [[np.cos(np.pi / 6)], [np.sin(np.pi / 6)]])
    >>> round(d.l1, 12)
    0.25
    """
    b1, b2 = _whitened_bases(u1, u2, sigma_x)
    cross = b1.T @ b2
    cos = np.clip(np.linalg.svd(cross, compute_uv=False), 0.0, 1.0)[::-1]
    sin2 = (1.0 - cos) * (1.0 + cos)
    # sines from the residual of b2 off span(b1): accurate angles near zero
    sines = np.linalg.svd(b2 - b1 @ cross, compute_uv=False)
    angles = np.arctan2(sines, cos)
    diff = b1 @ b1.T - b2 @ b2.T
    return SubspaceDistance(
        angles=angles,
        l1=float(sin2[0]),
        l2=float(np.sum(sin2)),
        op_dist=float(np.linalg.norm(diff, 2)),
        fro_dist=float(np.linalg.norm(diff, "fro")),
    )


@dataclass(frozen=True)
class PredictionSetup:
    """Response model: ``Sigma_xz = Sigma_x^{1/2} r_xz sigma_z``."""

    sigma_x: NDArray[np.float64]
    r_xz: NDArray[np.float64]
    sigma_z: float

    def __post_init__(self) -> None:
        s = as_matrix(self.sigma_x, "sigma_x")
        r = np.asarray(self.r_xz, dtype=float).ravel()
        if s.shape != (r.size, r.size):
            raise DimensionMismatch(f"sigma_x shape {s.shape} does not match r of length {r.size}")
        if not np.all(np.isfinite(r)) or float(r @ r) > 1.0 + 1e-10:
            raise InvalidParams(f"||r_xz||^2 = {float(r @ r):.6g} must be finite and at most 1")
        if not self.sigma_z > 0.0:
            raise InvalidParams(f"sigma_z must be positive, got {self.sigma_z}")
        object.__setattr__(self, "sigma_x", s)
        object.__setattr__(self, "r_xz", r)
        object.__setattr__(self, "sigma_z", float(self.sigma_z))

    @property
    def big_r2(self) -> float:
        return float(self.r_xz @ self.r_xz)

    @property
    def sigma_xz(self) -> NDArray[np.float64]:
        root, _ = sqrt_and_inv_sqrt(self.sigma_x, inverse=False)
        return root @ self.r_xz * self.sigma_z

    @classmethod
    def from_covariances(cls, sigma_x: ArrayLike, sigma_xz: ArrayLike, var_z: float) -> "PredictionSetup":
        """Build from ``Cov(x)``, ``Cov(x, z)`` and ``Var(z)``."""
        _, inv_root = sqrt_and_inv_sqrt(sigma_x)
        sigma_z = float(np.sqrt(var_z))
        r = inv_root @ np.asarray(sigma_xz, dtype=float).ravel() / sigma_z
        return cls(np.asarray(sigma_x, dtype=float), r, sigma_z)


def _whitened_projector(sigma_x: NDArray[np.float64], u: ArrayLike) -> NDArray[np.float64]:
    root, _ = sqrt_and_inv_sqrt(sigma_x, inverse=False)
    q = orthonormal_basis(root @ as_matrix(u, "u"))
    return q @ q.T


def prediction_loss(setup: PredictionSetup, u: ArrayLike | None = None) -> float:
    """Least-squares loss of predicting ``z`` from ``x^T U`` (all of ``x`` if None)."""
    r = setup.r_xz
    explained = float(r @ r) if u is None else float(r @ _whitened_projector(setup.sigma_x, u) @ r)
    return setup.sigma_z**2 * (1.0 - explained)


def regression_loss(
    sigma_x: ArrayLike, sigma_xz: ArrayLike, var_z: float, u: ArrayLike | None = None
) -> float:
    """Residual variance of the best linear predictor of ``z`` from ``x^T U``.

    Uses the un-whitened normal equations
    ``Var(z) - Sigma_zx U (U^T Sigma_x U)^{-1} U^T Sigma_xz``.
    """
    s = as_matrix(sigma_x, "sigma_x")
    c = np.asarray(sigma_xz, dtype=float).ravel()
    m = np.eye(s.shape[0]) if u is None else as_matrix(u, "u")
    g = m.T @ c
    return float(var_z - g @ np.linalg.solve(m.T @ s @ m, g))


def excess_prediction_loss(setup: PredictionSetup, u: ArrayLike, u_star: ArrayLike) -> float:
    """``loss(z | x^T U) - loss(z | x^T U_star)``; negative if ``U`` explains more."""
    p_star = _whitened_projector(setup.sigma_x, u_star)
    p_u = _whitened_projector(setup.sigma_x, u)
    r = setup.r_xz
    return setup.sigma_z**2 * float(r @ (p_star - p_u) @ r)


def _check_r2(r2: float) -> None:
    if not 0.0 <= r2 <= 1.0 + 1e-10:
        raise InvalidParams(f"R^2 must lie in [0, 1], got {r2}")


def worst_case_excess(
    r2: float, sigma_z: float, u: ArrayLike, u_star: ArrayLike, sigma_x: ArrayLike | None = None, oracle: bool = True
) -> float:
    """Largest excess loss over responses with ``||r||^2 = R^2``.

    With ``oracle=True`` the response is restricted to the oracle subspace
    (``P_star r = r``) and the value is ``sigma_z^2 R^2 sin^2(theta_1)``;
    otherwise it is ``sigma_z^2 R^2 sin(theta_1)``.
    """
    _check_r2(r2)
    d = principal_angles(u, u_star, sigma_x)
    factor = d.l1 if oracle else float(np.sqrt(d.l1))
    return sigma_z**2 * r2 * factor


def worst_case_direction(
    r2: float, u: ArrayLike, u_star: ArrayLike, sigma_x: ArrayLike | None = None
) -> NDArray[np.float64]:
    """Maximizer of the oracle-restricted excess loss.

    ``r = R Q g`` where ``Q`` spans the whitened oracle subspace and ``g`` is
    the leading eigenvector of ``Q^T (I - P_U) Q``.
    """
    _check_r2(r2)
    q, b = _whitened_bases(u_star, u, sigma_x)
    m = np.eye(q.shape[1]) - (q.T @ b) @ (b.T @ q)
    g = sym_eig(m).vectors[:, 0]
    return np.sqrt(r2) * (q @ g)


class BayesExcess(NamedTuple):
    analytic: float
    monte_carlo: float
    std_err: float


def bayes_excess(
    r2: float,
    sigma_z: float,
    u: ArrayLike,
    u_star: ArrayLike,
    sigma_x: ArrayLike | None = None,
    mc_trials: int = 100_000,
    seed: Any = None,
) -> BayesExcess:
    """Average excess loss under a uniform prior on the oracle subspace.

    The analytic value is ``sigma_z^2 R^2 l2 / k``.  The Monte-Carlo value
    averages the excess loss over ``r = R Q g / ||g||`` with ``g ~ N(0, I_k)``.

    Returns
    -------
    BayesExcess
        ``(analytic, monte_carlo, std_err)``, the last being the standard
        error of the Monte-Carlo mean.
    """
    _check_r2(r2)
    if mc_trials < 1:
        raise InvalidParams("mc_trials must be at least 1")
    d = principal_angles(u, u_star, sigma_x)
    q, b = _whitened_bases(u_star, u, sigma_x)
    k = q.shape[1]
    analytic = sigma_z**2 * r2 * d.l2 / k
    # r^T (P_star - P_U) r = R^2 g^T M g / |g|^2 for r in the oracle subspace
    m = np.eye(k) - (q.T @ b) @ (b.T @ q)
    rng = np.random.default_rng(seed)
    total, total_sq, done = 0.0, 0.0, 0
    while done < mc_trials:
        size = min(65_536, mc_trials - done)
        g = rng.standard_normal((size, k))
        vals = np.einsum("ij,jk,ik->i", g, m, g) / np.einsum("ij,ij->i", g, g)
        vals *= sigma_z**2 * r2
        total += float(vals.sum())
        total_sq += float(vals @ vals)
        done += size
    mean = total / mc_trials
    var = max(total_sq / mc_trials - mean**2, 0.0) * mc_trials / max(mc_trials - 1, 1)
    return BayesExcess(analytic, mean, float(np.sqrt(var / mc_trials)))


@dataclass
class ViewReport:
    loss_full: float
    loss_reduced: float
    gap: float
    excess: float
    lambdas: list[float]


@dataclass
class MultiviewReport:
    """Population-level losses for both views of the latent-factor model."""

    var_z: float
    latent_dim: int
    view1: ViewReport
    view2: ViewReport
    settings: dict = field(default_factory=dict)

    @property
    def max_gap(self) -> float:
        return max(abs(self.view1.gap), abs(self.view2.gap))

    def to_dict(self) -> dict:
        return asdict(self)


def multiview_sufficiency_demo(
    latent_dim: int,
    view_dims: Sequence[int],
    noise_scales: Sequence[float],
    weight_vector: ArrayLike,
    seed: Any = None,
    response_noise: float = 1.0,
) -> MultiviewReport:
    """Compare full-view and CCA-reduced prediction of a latent-driven response.

    The model is ``z = w^T h + e_z`` and ``x_i = A_i h + e_i`` for two views,
    with ``h ~ N(0, I_k)``, ``e_i ~ N(0, s_i^2 I)``, ``e_z ~ N(0, tau^2)``,
    all independent.  The views are conditionally independent given ``h``,
    so the top-k canonical variates of each view capture everything that view
    knows about ``h``, and hence about ``z``.  Covariances are assembled in
    closed form; nothing is sampled except the loading matrices ``A_i``.

    Parameters
    ----------
    latent_dim : int
        ``k``, the dimension of ``h``.
    view_dims : (int, int)
        ``(p1, p2)``, each at least ``k``.  Noise-free views need ``p_i = k``
        for the view covariance to be invertible.
    noise_scales : (float, float)
        ``(s1, s2)``, noise standard deviations of the views.
    weight_vector : array_like, shape (k,)
        ``w``.
    seed
        Seed for the Gaussian loading matrices.
    response_noise : float, default 1
        ``tau``, standard deviation of ``e_z``.

    Returns
    -------
    MultiviewReport
    """
    k = int(latent_dim)
    dims = [int(v) for v in view_dims]
    scales = [float(v) for v in noise_scales]
    w = np.asarray(weight_vector, dtype=float).ravel()
    if k < 1 or len(dims) != 2 or len(scales) != 2 or w.size != k:
        raise InvalidShape("need latent_dim >= 1, two view dims, two noise scales and len(w) = latent_dim")
    if min(dims) < k:
        raise InvalidShape(f"view dimensions {dims} must be at least latent_dim = {k}")
    if min(scales) < 0.0 or response_noise <= 0.0:
        raise InvalidParams("noise scales must be non-negative and response_noise positive")
    rng = np.random.default_rng(seed)
    loadings = [rng.standard_normal((p, k)) for p in dims]
    covs = [a @ a.T + s**2 * np.eye(a.shape[0]) for a, s in zip(loadings, scales)]
    cross = loadings[0] @ loadings[1].T
    var_z = float(w @ w + response_noise**2)
    pop = population_cca(JointCovariance(covs[0], covs[1], cross))
    reports = []
    for view, (a, s_view) in enumerate(zip(loadings, covs)):
        sigma_vz = a @ w
        red = (pop.phi if view == 0 else pop.psi)[:, :k]
        full = regression_loss(s_view, sigma_vz, var_z)
        reduced = regression_loss(s_view, sigma_vz, var_z, red)
        setup = PredictionSetup.from_covariances(s_view, sigma_vz, var_z)
        excess = excess_prediction_loss(setup, red, np.eye(s_view.shape[0]))
        reports.append(ViewReport(full, reduced, reduced - full, excess, pop.lambdas.tolist()))
    settings = {
        "view_dims": dims,
        "noise_scales": scales,
        "weight_vector": w.tolist(),
        "response_noise": float(response_noise),
    }
    return MultiviewReport(var_z, k, reports[0], reports[1], settings)
