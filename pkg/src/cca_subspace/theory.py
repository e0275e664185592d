"""Closed-form rates, KL divergences and randomized bound audits.

Rate formulas omit the unknown universal constants, so only ratios between
parameter settings carry meaning.  The audits return :class:`AuditReport`
objects that serialize to JSON with a fixed set of fields.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, NamedTuple

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DegenerateGap,
    DimensionMismatch,
    InvalidModel,
    InvalidParams,
    InvalidShape,
    MatchedProductViolated,
    NonPositiveEntries,
    NotPd,
    Singular,
)
from .estimator import sample_covariances, sample_gaussian
from .linalg import as_matrix, cholesky, projector, svd
from .losses import principal_angles, worst_case_direction, PredictionSetup, excess_prediction_loss
from .population import (
    CanonicalSpec,
    JointCovariance,
    build_joint,
    random_covariance,
    random_orthonormal_frame,
)

__all__ = [
    "RateParams",
    "RateTerms",
    "upper_rate",
    "lower_rate",
    "sample_size_condition",
    "first_order_frobenius_loss",
    "LowerBoundModel",
    "lower_bound_model",
    "kl_closed_form",
    "gaussian_kl",
    "AuditReport",
    "hadamard_matrices",
    "hadamard_bound_check",
    "WedinResult",
    "wedin_check",
    "wedin_audit",
    "kl_audit",
    "hadamard_audit",
    "metric_identity_audit",
    "BMatrixReport",
    "b_matrices",
    "b_matrix_diagnostics",
    "bmatrix_audit",
    "standard_form_covariance",
]


# ---------------------------------------------------------------- rates


@dataclass(frozen=True)
class RateParams:
    p1: int
    p2: int
    n: int
    k: int
    lambda_k: float
    lambda_k1: float

    def __post_init__(self) -> None:
        if not (self.n >= 1 and 1 <= self.k < min(self.p1, self.p2)):
            raise InvalidParams(
                f"need n >= 1 and 1 <= k < min(p1, p2); got n={self.n}, k={self.k}, "
                f"p1={self.p1}, p2={self.p2}"
            )
        if not 0.0 <= self.lambda_k1 < self.lambda_k <= 1.0:
            raise InvalidParams(
                f"need 0 <= lambda_k1 < lambda_k <= 1; got {self.lambda_k1}, {self.lambda_k}"
            )

    @property
    def delta(self) -> float:
        return self.lambda_k - self.lambda_k1

    @classmethod
    def from_spec(cls, spec: CanonicalSpec, n: int, k: int | None = None) -> "RateParams":
        k = spec.k if k is None else k
        if k is None or k >= spec.p:
            raise InvalidParams("spec needs a target rank k < number of correlations")
        return cls(spec.p1, spec.p2, n, k, float(spec.lambdas[k - 1]), float(spec.lambdas[k]))


class RateTerms(NamedTuple):
    principal: float
    high_order: float


def _correlation_factor(params: RateParams) -> float:
    return (1.0 - params.lambda_k**2) * (1.0 - params.lambda_k1**2) / params.delta**2


def upper_rate(params: RateParams, norm: str = "operator") -> RateTerms:
    """Constant-free upper-bound terms.

    ``principal = (1 - l_k^2)(1 - l_{k+1}^2) / Delta^2 * d / n`` with
    ``d = p1`` for the operator norm and ``d = p1 - k`` for the per-rank
    Frobenius loss; ``high_order = ((p1 + p2) / (n Delta^2))^2``.

    Examples
    --------
    >>> round(upper_rate(RateParams(10, 10, 1000, 2, 0.9, 0.3)).principal, 7)
    0.0048028
    """
    if norm == "operator":
        d = params.p1
    elif norm == "frobenius":
        d = params.p1 - params.k
    else:
        raise InvalidParams(f"norm must be 'operator' or 'frobenius', got {norm!r}")
    principal = _correlation_factor(params) * d / params.n
    high = ((params.p1 + params.p2) / (params.n * params.delta**2)) ** 2
    return RateTerms(principal, high)


def lower_rate(params: RateParams) -> float:
    """``min(factor * (p1 - k) / n, 1, (p1 - k) / k)``."""
    frob = _correlation_factor(params) * (params.p1 - params.k) / params.n
    return min(frob, 1.0, (params.p1 - params.k) / params.k)


def sample_size_condition(params: RateParams) -> float:
    """Ratio ``[(p1 + p2) / (n Delta^2)] / [(1 - l_k^2)(1 - l_{k+1}^2) / (1 + p2 / p1)]``.

    Values at most 1 indicate that the principal term dominates.  The ratio is
    infinite when ``lambda_k = 1``.
    """
    lhs = (params.p1 + params.p2) / (params.n * params.delta**2)
    rhs = (1.0 - params.lambda_k**2) * (1.0 - params.lambda_k1**2) / (1.0 + params.p2 / params.p1)
    return float("inf") if rhs == 0.0 else lhs / rhs


def first_order_frobenius_loss(lambdas: ArrayLike, k: int, p1: int, n: int) -> float:
    """Leading-order ``E ||P_hat - P||_F^2`` for sample CCA.

    Linearizing the sample estimating equations in standard form gives
    independent entries ``(Phi_hat)_{ij} ~ B_{ij} / (l_j^2 - l_i^2)``
    (``i > k >= j``) with ``E B_{ij}^2 = (1 - l_j^2)(l_i^2 + l_j^2 - 2 l_i^2 l_j^2) / n``;
    the projector distance is twice their squared sum.  Correlations past
    ``len(lambdas)`` are zero.
    """
    lam = np.zeros(p1)
    given = np.asarray(lambdas, dtype=float).ravel()[:p1]
    lam[: given.size] = given
    lj2 = lam[:k, None] ** 2
    li2 = lam[None, k:] ** 2
    num = (1.0 - lj2) * (li2 + lj2 - 2.0 * li2 * lj2)
    return float(2.0 * np.sum(num / (lj2 - li2) ** 2) / n)


# ---------------------------------------------------------------- KL


@dataclass(frozen=True)
class LowerBoundModel:
    """Two specs sharing covariances and correlations with matched frame products.

    Both specs carry ``lambda1`` with multiplicity ``k`` followed by
    ``lambda2`` for the remaining ``p1 - k`` correlations, and their full
    frames satisfy ``[U1, W1][V1, Z1]^T = [U2, W2][V2, Z2]^T``.
    """

    first: CanonicalSpec
    second: CanonicalSpec
    lambda1: float
    lambda2: float
    k: int

    def product_gap(self) -> float:
        a = self.first.frame_u @ self.first.frame_v.T
        b = self.second.frame_u @ self.second.frame_v.T
        return float(np.linalg.norm(a - b, "fro"))

    def frame_difference(self) -> float:
        """``||U1 V1^T - U2 V2^T||_F^2`` over the leading ``k`` columns."""
        k = self.k
        a = self.first.frame_u[:, :k] @ self.first.frame_v[:, :k].T
        b = self.second.frame_u[:, :k] @ self.second.frame_v[:, :k].T
        return float(np.linalg.norm(a - b, "fro") ** 2)


def _skew_rotation(p: int, scale: float, rng: np.random.Generator) -> NDArray[np.float64]:
    g = rng.standard_normal((p, p))
    s = g - g.T
    s /= np.linalg.norm(s, "fro")
    return scipy.linalg.expm(scale * s)


def lower_bound_model(
    p1: int,
    p2: int,
    k: int,
    lambda1: float,
    lambda2: float,
    sigma_x: ArrayLike | None = None,
    sigma_y: ArrayLike | None = None,
    scale: float | None = None,
    seed: Any = None,
) -> LowerBoundModel:
    """Random pair of models for the KL identity.

    The first model gets Haar frames ``[U, W]`` (p1 x p1) and ``[V, Z]``
    (p2 x p1).  The second right-multiplies both by the same orthogonal
    ``Q``: Haar-distributed if ``scale`` is None, otherwise
    ``expm(scale * S)`` for a random skew ``S`` with unit Frobenius norm, so
    that the perturbation size is controlled by ``scale``.
    """
    if not (1 <= k < p1 <= p2):
        raise InvalidShape(f"need 1 <= k < p1 <= p2, got k={k}, p1={p1}, p2={p2}")
    if not 0.0 <= lambda2 <= lambda1 < 1.0:
        raise InvalidParams(f"need 0 <= lambda2 <= lambda1 < 1, got {lambda1}, {lambda2}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_u, s_v, s_q = ss.spawn(3)
    fu = random_orthonormal_frame(p1, p1, s_u)
    fv = random_orthonormal_frame(p2, p1, s_v)
    if scale is None:
        q = random_orthonormal_frame(p1, p1, s_q)
    else:
        q = _skew_rotation(p1, scale, np.random.default_rng(s_q))
    sx = np.eye(p1) if sigma_x is None else np.asarray(sigma_x, dtype=float)
    sy = np.eye(p2) if sigma_y is None else np.asarray(sigma_y, dtype=float)
    lam = np.array([lambda1] * k + [lambda2] * (p1 - k))
    spec_k = k if lambda1 > lambda2 else None
    first = CanonicalSpec(sx, sy, lam, fu, fv, spec_k)
    second = CanonicalSpec(sx, sy, lam, fu @ q, fv @ q, spec_k)
    return LowerBoundModel(first, second, float(lambda1), float(lambda2), k)


def kl_closed_form(model: LowerBoundModel, n: float) -> float:
    """Closed-form KL divergence between ``n`` i.i.d. draws of the two models.

    ``n Delta^2 (1 + l1 l2) / (2 (1 - l1^2)(1 - l2^2)) * ||U1 V1^T - U2 V2^T||_F^2``
    """
    if model.product_gap() > 1e-8:
        raise MatchedProductViolated(
            f"frame products differ by {model.product_gap():.3e} in Frobenius norm"
        )
    l1, l2 = model.lambda1, model.lambda2
    if l1 >= 1.0:
        raise InvalidParams("lambda1 must be below 1")
    coef = n * (l1 - l2) ** 2 * (1.0 + l1 * l2) / (2.0 * (1.0 - l1**2) * (1.0 - l2**2))
    return coef * model.frame_difference()


def _as_cov_matrix(s: JointCovariance | ArrayLike) -> NDArray[np.float64]:
    return s.full if isinstance(s, JointCovariance) else as_matrix(s)


def gaussian_kl(
    sigma1: JointCovariance | ArrayLike, sigma2: JointCovariance | ArrayLike, n: float = 1
) -> float:
    """KL divergence of ``N(0, Sigma1)^n`` from ``N(0, Sigma2)^n``.

    ``(n/2) (tr(Sigma2^{-1} Sigma1) - d - log det(Sigma2^{-1} Sigma1))`` with
    log-determinants taken from Cholesky factors.
    """
    a = _as_cov_matrix(sigma1)
    b = _as_cov_matrix(sigma2)
    if a.shape != b.shape:
        raise DimensionMismatch(f"covariances have shapes {a.shape} and {b.shape}")
    try:
        la = cholesky(a)
        lb = cholesky(b)
    except NotPd as exc:
        raise Singular(str(exc)) from exc
    m = scipy.linalg.solve_triangular(lb, la, lower=True)
    trace = float(np.sum(m * m))
    logdet = 2.0 * float(np.sum(np.log(np.diag(la))) - np.sum(np.log(np.diag(lb))))
    return 0.5 * n * (trace - a.shape[0] - logdet)


# ---------------------------------------------------------------- audits


@dataclass
class AuditReport:
    """Outcome of a randomized bound audit.

    ``max_ratio`` is the largest observed value of ``quantity / bound`` (or
    ``error / tolerance`` for identity checks); ``violations`` counts trials
    beyond the tolerance.
    """

    name: str
    trials: int
    max_ratio: float
    violations: int
    reference_values: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def hadamard_matrices(alpha: ArrayLike, beta: ArrayLike) -> dict[str, NDArray[np.float64]]:
    """The three structured matrices built from positive vectors ``alpha``, ``beta``."""
    a = np.asarray(alpha, dtype=float).ravel()[:, None]
    b = np.asarray(beta, dtype=float).ravel()[None, :]
    s = a + b
    return {"A1": 1.0 / s, "A2": np.minimum(a, b) / s, "A3": np.maximum(a, b) / s}


def hadamard_bound_check(
    alpha: ArrayLike,
    beta: ArrayLike,
    trials: int,
    seed: Any = None,
    bound_scale: dict[str, float] | None = None,
) -> AuditReport:
    """Audit ``||A_m o B|| <= bound_m`` over random ``B`` with ``||B|| = 1``.

    Bounds are ``1/(2 delta)``, ``1/2`` and ``3/2`` with ``delta`` the
    smallest entry of ``alpha`` and ``beta``.  Even trials use a normalized
    Gaussian ``B``; odd trials use a normalized random rank-one ``B``, which
    probes the row and column scalings that drive the Hadamard norm.

    Parameters
    ----------
    alpha, beta : array_like
        Positive vectors.
    trials : int
        Number of random ``B`` matrices.
    seed
        RNG seed.
    bound_scale : dict, optional
        Multiplies the named bounds; used to exercise the failure path.

    Returns
    -------
    AuditReport
        ``reference_values`` holds each bound and its maximum observed ratio.
    """
    a = np.asarray(alpha, dtype=float).ravel()
    b = np.asarray(beta, dtype=float).ravel()
    if a.size == 0 or b.size == 0 or not (np.all(a > 0) and np.all(b > 0)):
        raise NonPositiveEntries("alpha and beta must be non-empty and strictly positive")
    delta = float(min(a.min(), b.min()))
    mats = hadamard_matrices(a, b)
    bounds = {"A1": 1.0 / (2.0 * delta), "A2": 0.5, "A3": 1.5}
    if bound_scale:
        bounds = {key: val * bound_scale.get(key, 1.0) for key, val in bounds.items()}
    rng = np.random.default_rng(seed)
    m, n = a.size, b.size
    worst = dict.fromkeys(mats, 0.0)
    violations = 0
    for t in range(trials):
        if t % 2 == 0:
            bm = rng.standard_normal((m, n))
        else:
            bm = np.outer(rng.standard_normal(m), rng.standard_normal(n))
        bm /= np.linalg.norm(bm, 2)
        for key, am in mats.items():
            val = float(np.linalg.norm(am * bm, 2))
            worst[key] = max(worst[key], val / bounds[key])
            if val > bounds[key] + 1e-9:
                violations += 1
    ref = {key: {"bound": bounds[key], "max_ratio": worst[key]} for key in mats}
    ref["delta"] = delta
    return AuditReport("hadamard", trials, max(worst.values()), violations, ref)


@dataclass(frozen=True)
class WedinResult:
    lhs: float
    bound: float
    violated: bool
    near_violation: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.bound if self.bound > 0 else (0.0 if self.lhs == 0 else float("inf"))


def wedin_check(a: ArrayLike, e: ArrayLike, k: int, tol: float = 1e-10) -> WedinResult:
    """Check ``||P_{U_k} - P_{U_hat_k}|| <= 2 ||E|| / (s_k - s_{k+1})``.

    ``U_k`` and ``U_hat_k`` are the leading left singular subspaces of ``A``
    and ``A + E``.  Ratios above 0.95 are flagged as near violations.
    """
    am = as_matrix(a, "a")
    em = as_matrix(e, "e")
    if am.shape != em.shape:
        raise DimensionMismatch(f"a has shape {am.shape}, e has shape {em.shape}")
    if not 1 <= k <= min(am.shape):
        raise InvalidParams(f"k = {k} out of range")
    d0 = svd(am)
    s = d0.singulars
    s_next = s[k] if k < s.size else 0.0
    gap = s[k - 1] - s_next
    if gap <= 0.0:
        raise DegenerateGap(f"sigma_k - sigma_(k+1) = {gap:g} must be positive")
    d1 = svd(am + em)
    lhs = float(np.linalg.norm(projector(d0.left[:, :k]) - projector(d1.left[:, :k]), 2))
    bound = 2.0 * float(np.linalg.norm(em, 2)) / gap
    return WedinResult(lhs, bound, lhs > bound + tol, lhs > 0.95 * bound)


def wedin_audit(trials: int, seed: Any = None, max_dim: int = 12) -> AuditReport:
    """Random matrices with singular gap >= 0.5 and perturbations with ``||E|| <= 0.1``."""
    root = np.random.SeedSequence(seed)
    worst, violations, near = 0.0, 0, 0
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(t,)))
        m = int(rng.integers(2, max_dim + 1))
        n = int(rng.integers(2, max_dim + 1))
        r = min(m, n)
        k = int(rng.integers(1, r)) if r > 1 else 1
        tail = np.sort(rng.uniform(0.0, 1.0, r - k))[::-1]
        head = np.sort(rng.uniform(0.0, 1.5, k))[::-1] + (tail[0] if tail.size else 0.0) + 0.5
        s = np.concatenate([head, tail])
        a = (random_orthonormal_frame(m, r, rng) * s) @ random_orthonormal_frame(n, r, rng).T
        e = rng.standard_normal((m, n))
        e *= rng.uniform(0.0, 0.1) / np.linalg.norm(e, 2)
        res = wedin_check(a, e, k)
        worst = max(worst, res.ratio)
        violations += int(res.violated)
        near += int(res.near_violation)
    return AuditReport("wedin", trials, worst, violations, {"near_violations": near, "factor": 2.0})


def kl_audit(trials: int, seed: Any = None, tol: float = 1e-8) -> AuditReport:
    """Closed-form versus generic Gaussian KL on random lower-bound models."""
    root = np.random.SeedSequence(seed)
    worst_err, violations = 0.0, 0
    for t in range(trials):
        ss = np.random.SeedSequence(root.entropy, spawn_key=(t,))
        rng = np.random.default_rng(ss)
        p1 = int(rng.integers(2, 7))
        p2 = int(rng.integers(p1, 9))
        k = int(rng.integers(1, p1))
        l1 = float(rng.uniform(0.1, 0.95))
        l2 = float(rng.uniform(0.0, l1))
        sx = random_covariance(p1, float(rng.uniform(1.0, 10.0)), rng)
        sy = random_covariance(p2, float(rng.uniform(1.0, 10.0)), rng)
        n = int(rng.integers(1, 50))
        model = lower_bound_model(p1, p2, k, l1, l2, sx, sy, seed=ss.spawn(1)[0])
        closed = kl_closed_form(model, n)
        generic = gaussian_kl(build_joint(model.first), build_joint(model.second), n)
        err = abs(closed - generic)
        worst_err = max(worst_err, err)
        violations += int(err > tol)
    return AuditReport("kl", trials, worst_err / tol, violations, {"max_abs_error": worst_err, "tol": tol})


def hadamard_audit(trials: int, seed: Any = None, bound_scale: dict[str, float] | None = None) -> AuditReport:
    """Hadamard bound checks over several random vector pairs (entries >= 0.1, dims <= 30)."""
    root = np.random.SeedSequence(seed)
    configs = 10
    per = max(1, trials // configs)
    worst = {"A1": 0.0, "A2": 0.0, "A3": 0.0}
    violations, total = 0, 0
    for c in range(configs):
        rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(c,)))
        m, n = (int(v) for v in rng.integers(1, 31, size=2))
        if c == 0:
            alpha, beta = np.ones(m), np.ones(n)
        else:
            alpha = 10.0 ** rng.uniform(-1.0, 1.0, m)
            beta = 10.0 ** rng.uniform(-1.0, 1.0, n)
            alpha[0] = 0.1
        rep = hadamard_bound_check(alpha, beta, per, rng, bound_scale)
        violations += rep.violations
        total += per
        for key in worst:
            worst[key] = max(worst[key], rep.reference_values[key]["max_ratio"])
    return AuditReport("hadamard", total, max(worst.values()), violations, {"max_ratio_by_matrix": worst})


def metric_identity_audit(trials: int, seed: Any = None, tol: float = 1e-10) -> AuditReport:
    """``l1 = ||dP||^2``, ``l2 = ||dP||_F^2 / 2`` and the worst-case maximizer identity."""
    root = np.random.SeedSequence(seed)
    worst, violations = 0.0, 0
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(t,)))
        p = int(rng.integers(2, 13))
        k = int(rng.integers(1, p))
        sx = random_covariance(p, float(10.0 ** rng.uniform(0.0, 3.0)), rng)
        u1 = rng.standard_normal((p, k))
        if t % 3 == 0:
            u2 = u1 + 10.0 ** rng.uniform(-8.0, -2.0) * rng.standard_normal((p, k))
        else:
            u2 = rng.standard_normal((p, k))
        d = principal_angles(u1, u2, sx)
        r2 = float(rng.uniform(0.0, 1.0))
        r = worst_case_direction(r2, u1, u2, sx)
        excess = excess_prediction_loss(PredictionSetup(sx, r, 1.0), u1, u2)
        errs = (abs(d.l1 - d.op_dist**2), abs(d.l2 - d.fro_dist**2 / 2.0), abs(excess - r2 * d.l1))
        worst = max(worst, max(errs) / tol)
        violations += int(max(errs) > tol)
    return AuditReport("metric_identities", trials, worst, violations, {"tol": tol})


# ---------------------------------------------------------------- B-matrices


def standard_form_covariance(lambdas: ArrayLike, p1: int, p2: int) -> JointCovariance:
    """``(I, [diag(lambda) 0], I)``; missing correlations are zero."""
    lam = np.asarray(lambdas, dtype=float).ravel()
    if lam.size > min(p1, p2):
        raise InvalidShape("more correlations than min(p1, p2)")
    sxy = np.zeros((p1, p2))
    sxy[np.arange(lam.size), np.arange(lam.size)] = lam
    return JointCovariance(np.eye(p1), np.eye(p2), sxy)


def _standard_lambdas(cov: JointCovariance, tol: float = 1e-10) -> NDArray[np.float64]:
    p = min(cov.p1, cov.p2)
    lam = np.diag(cov.sigma_xy)[:p].copy()
    off = cov.sigma_xy.copy()
    off[np.arange(p), np.arange(p)] = 0.0
    if (
        np.max(np.abs(cov.sigma_x - np.eye(cov.p1))) > tol
        or np.max(np.abs(cov.sigma_y - np.eye(cov.p2))) > tol
        or np.max(np.abs(off)) > tol
        or np.any(np.diff(lam) > tol)
        or np.any(lam < -tol)
        or np.any(lam > 1.0 + tol)
    ):
        raise InvalidModel("model is not in standard form (I, [diag(lambda) 0], I) with descending lambda")
    return lam


def b_matrices(
    sx: NDArray[np.float64], sy: NDArray[np.float64], sxy: NDArray[np.float64], sigma_xy: NDArray[np.float64], k: int
) -> dict[str, NDArray[np.float64]]:
    """Linearized residual matrices for standard-form sample covariances.

    Blocks ``21`` are rows ``k+1..`` and columns ``1..k``.  ``L1`` is the
    leading ``k x k`` block of ``sigma_xy`` and ``L2`` the trailing block.
    """
    l1 = np.diag(sigma_xy)[:k]
    l2 = sigma_xy[k:, k:]
    sxy21 = sxy[k:, :k]
    syx21 = sxy.T[k:, :k]
    sx21 = sx[k:, :k]
    sy21 = sy[k:, :k]
    b1 = sxy21 - sx21 * l1
    b2 = syx21 - sy21 * l1
    b = sxy21 * l1 + l2 @ syx21 - sx21 * l1**2 - (l2 @ sy21) * l1
    return {"B1": b1, "B2": b2, "B": b}


@dataclass
class BMatrixReport:
    """Monte-Carlo moments of the B-matrices with their analytic references.

    ``mean_sq_op`` and ``mean_sq_fro`` hold mean squared operator and
    Frobenius norms with standard errors in ``se_sq_op`` / ``se_sq_fro``.
    """

    n: int
    k: int
    p1: int
    p2: int
    replicates: int
    lambdas: list[float]
    mean_sq_op: dict[str, float]
    se_sq_op: dict[str, float]
    mean_sq_fro: dict[str, float]
    se_sq_fro: dict[str, float]
    analytic_sq_fro: dict[str, float]
    reference: dict[str, float]

    def to_dict(self) -> dict:
        return asdict(self)


def b_matrix_diagnostics(
    pop: JointCovariance, n: int, k: int, replicates: int, seed: Any = None
) -> BMatrixReport:
    """Sample the B-matrices of a standard-form model and summarize their sizes.

    Parameters
    ----------
    pop : JointCovariance
        Standard-form model ``(I, [diag(lambda) 0], I)``.
    n : int
        Sample size per replicate.
    k : int
        Target rank, with ``lambda_k > lambda_{k+1}``.
    replicates : int
        Number of independent data sets.
    seed
        Master seed; replicate ``r`` uses ``SeedSequence(seed, spawn_key=(r,))``.

    Returns
    -------
    BMatrixReport
        Analytic second moments: ``E||B1||_F^2 = (p1 - k) sum_j (1 - l_j^2) / n``,
        ``E||B2||_F^2 = (p2 - k) sum_j (1 - l_j^2) / n``,
        ``E||B||_F^2 = sum_{i>k, j<=k} (1 - l_j^2)(l_i^2 + l_j^2 - 2 l_i^2 l_j^2) / n``
        and the same summand divided by ``(l_k - l_i)^2`` for ``D^{-1} B``.
        Reference scalings are ``(1 - l_k^2) p1 / n`` and
        ``2 (1 - l_k^2)(1 - l_{k+1}^2)(p1 - k) k / (n Delta^2)``.
    """
    lam_diag = _standard_lambdas(pop)
    p1, p2 = pop.p1, pop.p2
    if not 1 <= k < p1:
        raise InvalidParams(f"k = {k} out of range")
    lam = np.zeros(p1)
    lam[: lam_diag.size] = lam_diag
    if not lam[k - 1] > lam[k]:
        raise DegenerateGap("lambda_k must exceed lambda_(k+1)")
    if replicates < 2:
        raise InvalidParams("need at least 2 replicates")
    dinv = 1.0 / (lam[k - 1] - lam[k:])
    keys = ("B1", "B2", "B", "DinvB")
    sq_op = {key: np.empty(replicates) for key in keys}
    sq_fro = {key: np.empty(replicates) for key in keys}
    entropy = np.random.SeedSequence(seed).entropy
    for r in range(replicates):
        data = sample_gaussian(pop, n, np.random.SeedSequence(entropy, spawn_key=(r,)))
        c = sample_covariances(data)
        mats = b_matrices(c.sx, c.sy, c.sxy, pop.sigma_xy, k)
        mats["DinvB"] = dinv[:, None] * mats["B"]
        for key in keys:
            m = mats[key]
            sq_op[key][r] = np.linalg.norm(m, 2) ** 2
            sq_fro[key][r] = np.sum(m * m)
    lj2 = lam[:k] ** 2
    li2 = lam[k:, None] ** 2
    entry = (1.0 - lj2) * (li2 + lj2 - 2.0 * li2 * lj2) / n
    analytic = {
        "B1": (p1 - k) * float(np.sum(1.0 - lj2)) / n,
        "B2": (p2 - k) * float(np.sum(1.0 - lj2)) / n,
        "B": float(np.sum(entry)),
        "DinvB": float(np.sum(entry * dinv[:, None] ** 2)),
    }
    lk, lk1 = lam[k - 1], lam[k]
    reference = {
        "b1b2_scaling": (1.0 - lk**2) * p1 / n,
        "dinvb_fro_bound": 2.0 * (1.0 - lk**2) * (1.0 - lk1**2) * (p1 - k) * k / (n * (lk - lk1) ** 2),
    }

    def se(v: NDArray[np.float64]) -> float:
        return float(np.std(v, ddof=1) / np.sqrt(v.size))

    return BMatrixReport(
        n=n,
        k=k,
        p1=p1,
        p2=p2,
        replicates=replicates,
        lambdas=lam.tolist(),
        mean_sq_op={key: float(np.mean(v)) for key, v in sq_op.items()},
        se_sq_op={key: se(v) for key, v in sq_op.items()},
        mean_sq_fro={key: float(np.mean(v)) for key, v in sq_fro.items()},
        se_sq_fro={key: se(v) for key, v in sq_fro.items()},
        analytic_sq_fro=analytic,
        reference=reference,
    )


def bmatrix_audit(
    replicates: int,
    seed: Any = None,
    lambdas: ArrayLike = (0.9, 0.8, 0.3, 0.1),
    p1: int = 10,
    p2: int = 10,
    n: int = 2000,
    k: int = 2,
) -> AuditReport:
    """B-matrix moments against their analytic values (3 SE) and the Frobenius bound."""
    rep = b_matrix_diagnostics(standard_form_covariance(lambdas, p1, p2), n, k, replicates, seed)
    zs = {
        key: abs(rep.mean_sq_fro[key] - rep.analytic_sq_fro[key]) / rep.se_sq_fro[key]
        for key in ("B1", "B2", "B", "DinvB")
    }
    bound = rep.reference["dinvb_fro_bound"]
    excess = (rep.mean_sq_fro["DinvB"] - bound) / rep.se_sq_fro["DinvB"]
    violations = sum(int(z > 3.0) for z in zs.values()) + int(excess > 3.0)
    ref = {
        "z_scores": zs,
        "dinvb_over_bound": rep.mean_sq_fro["DinvB"] / bound,
        "report": rep.to_dict(),
    }
    return AuditReport("bmatrix", replicates, max(max(zs.values()) / 3.0, rep.mean_sq_fro["DinvB"] / bound), violations, ref)
