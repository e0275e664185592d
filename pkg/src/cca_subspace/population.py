"""Joint Gaussian covariance models with prescribed canonical structure.

A model is described either directly by its blocks (:class:`JointCovariance`)
or by its canonical parametrization (:class:`CanonicalSpec`): marginal
covariances, canonical correlations and two orthonormal frames.  The cross
covariance is then

    Sigma_xy = Sigma_x^{1/2} U diag(lambda) V^T Sigma_y^{1/2},

so the loadings are ``Phi = Sigma_x^{-1/2} U`` and ``Psi = Sigma_y^{-1/2} V``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    CorrelationOutOfRange,
    DimensionMismatch,
    FrameNotOrthonormal,
    InvalidLambdas,
    InvalidModel,
    InvalidShape,
    NotPd,
    NotPsd,
    Singular,
)
from .linalg import (
    EPS_PD,
    TOL_PSD,
    as_matrix,
    check_symmetric,
    condition_number,
    sqrt_and_inv_sqrt,
    svd,
)

TOL_FRAME = 1e-10
TOL_UNIT = 1e-10

__all__ = [
    "JointCovariance",
    "CanonicalDecomposition",
    "CanonicalSpec",
    "build_joint",
    "population_cca",
    "apply_transform",
    "random_orthonormal_frame",
    "random_covariance",
    "random_spec",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "covariance_of",
    "whitened_frame",
]


@dataclass(frozen=True)
class JointCovariance:
    """Block covariance ``[[Sigma_x, Sigma_xy], [Sigma_xy^T, Sigma_y]]``.

    Construction checks shapes, finiteness and symmetry of the diagonal
    blocks; positive semi-definiteness of the whole matrix is checked by
    :meth:`check_psd` and by the operations that need it.
    """

    sigma_x: NDArray[np.float64]
    sigma_y: NDArray[np.float64]
    sigma_xy: NDArray[np.float64]

    def __post_init__(self) -> None:
        sx = check_symmetric(self.sigma_x, "sigma_x")
        sy = check_symmetric(self.sigma_y, "sigma_y")
        sxy = as_matrix(self.sigma_xy, "sigma_xy")
        if sxy.shape != (sx.shape[0], sy.shape[0]):
            raise DimensionMismatch(
                f"sigma_xy has shape {sxy.shape}, expected {(sx.shape[0], sy.shape[0])}"
            )
        object.__setattr__(self, "sigma_x", sx)
        object.__setattr__(self, "sigma_y", sy)
        object.__setattr__(self, "sigma_xy", sxy)

    @property
    def p1(self) -> int:
        return self.sigma_x.shape[0]

    @property
    def p2(self) -> int:
        return self.sigma_y.shape[0]

    @property
    def full(self) -> NDArray[np.float64]:
        return np.block([[self.sigma_x, self.sigma_xy], [self.sigma_xy.T, self.sigma_y]])

    def check_psd(self) -> float:
        """Return the smallest eigenvalue of the joint matrix, raising if negative."""
        w = np.linalg.eigvalsh(self.full)
        scale = max(abs(w[0]), abs(w[-1]))
        if w[0] < -TOL_PSD * scale:
            raise NotPsd(f"joint covariance has eigenvalue {w[0]:.3e}")
        return float(w[0])


@dataclass(frozen=True)
class CanonicalDecomposition:
    """Loadings and canonical correlations.

    ``phi`` and ``psi`` hold one column per canonical pair; ``lambdas`` is
    descending in [0, 1].  ``perfect`` marks correlations within 1e-10 of 1.
    ``info`` carries solver diagnostics such as tied singular values.
    """

    phi: NDArray[np.float64]
    psi: NDArray[np.float64]
    lambdas: NDArray[np.float64]
    perfect: NDArray[np.bool_] = field(default=None)  # type: ignore[assignment]
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.perfect is None:
            object.__setattr__(self, "perfect", self.lambdas >= 1.0 - TOL_UNIT)

    @property
    def k(self) -> int:
        return self.phi.shape[1]

    def top(self, k: int) -> "CanonicalDecomposition":
        """The first ``k`` canonical pairs."""
        return CanonicalDecomposition(
            self.phi[:, :k], self.psi[:, :k], self.lambdas[:k], self.perfect[:k], dict(self.info)
        )


def _check_pd(s: NDArray[np.float64], name: str) -> None:
    w = np.linalg.eigvalsh(s)
    scale = max(abs(w[0]), abs(w[-1]))
    if scale == 0.0 or w[0] < EPS_PD * scale:
        raise NotPd(f"{name} is not positive definite (smallest eigenvalue {w[0]:.3e})")


def _check_frame(frame: NDArray[np.float64], name: str) -> None:
    gram = frame.T @ frame
    if np.max(np.abs(gram - np.eye(frame.shape[1]))) > TOL_FRAME:
        raise FrameNotOrthonormal(f"{name} columns are not orthonormal")


@dataclass(frozen=True)
class CanonicalSpec:
    """Canonical parametrization of a joint covariance.

    Parameters
    ----------
    sigma_x, sigma_y : ndarray
        Positive definite marginal covariances (p1 x p1, p2 x p2).
    lambdas : ndarray, shape (p,)
        Canonical correlations, descending in [0, 1], with p <= min(p1, p2).
    frame_u, frame_v : ndarray
        Orthonormal frames of shape (p1, p) and (p2, p).  Columns beyond k
        play the role of the complementary frames W, Z.
    k : int or None
        Target rank.  When set, 1 <= k < p and lambda_k > lambda_{k+1}.
    """

    sigma_x: NDArray[np.float64]
    sigma_y: NDArray[np.float64]
    lambdas: NDArray[np.float64]
    frame_u: NDArray[np.float64]
    frame_v: NDArray[np.float64]
    k: int | None = None

    def __post_init__(self) -> None:
        sx = check_symmetric(self.sigma_x, "sigma_x")
        sy = check_symmetric(self.sigma_y, "sigma_y")
        lam = np.asarray(self.lambdas, dtype=float).ravel()
        fu = as_matrix(self.frame_u, "frame_u")
        fv = as_matrix(self.frame_v, "frame_v")
        p1, p2, p = sx.shape[0], sy.shape[0], lam.size
        if p < 1 or not np.all(np.isfinite(lam)):
            raise InvalidLambdas("lambdas must be a non-empty finite vector")
        if p > min(p1, p2):
            raise InvalidLambdas(f"{p} correlations exceed min(p1, p2) = {min(p1, p2)}")
        if np.any(lam < 0.0) or np.any(lam > 1.0) or np.any(np.diff(lam) > 0.0):
            raise InvalidLambdas("lambdas must be descending in [0, 1]")
        if fu.shape != (p1, p) or fv.shape != (p2, p):
            raise InvalidShape(
                f"frames must have shapes {(p1, p)} and {(p2, p)}, got {fu.shape} and {fv.shape}"
            )
        _check_frame(fu, "frame_u")
        _check_frame(fv, "frame_v")
        _check_pd(sx, "sigma_x")
        _check_pd(sy, "sigma_y")
        if self.k is not None:
            k = int(self.k)
            if not 1 <= k < p:
                raise InvalidLambdas(f"k = {k} must satisfy 1 <= k < p = {p}")
            if not lam[k - 1] > lam[k]:
                raise InvalidLambdas(
                    f"eigen-gap Delta = lambda_k - lambda_(k+1) = {lam[k - 1] - lam[k]:g} "
                    "must be positive (Delta = 0 is not allowed)"
                )
            object.__setattr__(self, "k", k)
        object.__setattr__(self, "sigma_x", sx)
        object.__setattr__(self, "sigma_y", sy)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "frame_u", fu)
        object.__setattr__(self, "frame_v", fv)

    @property
    def p1(self) -> int:
        return self.sigma_x.shape[0]

    @property
    def p2(self) -> int:
        return self.sigma_y.shape[0]

    @property
    def p(self) -> int:
        return self.lambdas.size

    def _require_k(self) -> int:
        if self.k is None:
            raise InvalidModel("target rank k is not set")
        return self.k

    @property
    def lambda_k(self) -> float:
        return float(self.lambdas[self._require_k() - 1])

    @property
    def lambda_k1(self) -> float:
        return float(self.lambdas[self._require_k()])

    @property
    def delta(self) -> float:
        return self.lambda_k - self.lambda_k1

    @property
    def kappa_x(self) -> float:
        return condition_number(self.sigma_x)

    @property
    def kappa_y(self) -> float:
        return condition_number(self.sigma_y)


def build_joint(spec: CanonicalSpec) -> JointCovariance:
    """Assemble the joint covariance whose canonical structure is ``spec``."""
    rx, _ = sqrt_and_inv_sqrt(spec.sigma_x, inverse=False)
    ry, _ = sqrt_and_inv_sqrt(spec.sigma_y, inverse=False)
    sxy = rx @ (spec.frame_u * spec.lambdas) @ spec.frame_v.T @ ry
    return JointCovariance(spec.sigma_x, spec.sigma_y, sxy)


def _complete_frame(q: NDArray[np.float64]) -> NDArray[np.float64]:
    """Extend orthonormal columns to a full orthonormal basis."""
    p, m = q.shape
    if m == p:
        return q
    full, _ = np.linalg.qr(q, mode="complete")
    rest = full[:, m:]
    rest = rest - q @ (q.T @ rest)
    rest, _ = np.linalg.qr(rest)
    return np.hstack([q, rest])


def population_cca(cov: JointCovariance, complete: bool = False) -> CanonicalDecomposition:
    """Population CCA via the SVD of ``Sigma_x^{-1/2} Sigma_xy Sigma_y^{-1/2}``.

    Parameters
    ----------
    cov : JointCovariance
        Model with positive definite marginal covariances.
    complete : bool, default False
        If True, extend ``phi`` to p1 columns and ``psi`` to p2 columns so
        that both are square and invertible.  The extra columns carry zero
        correlation and ``lambdas`` keeps length ``min(p1, p2)``.

    Returns
    -------
    CanonicalDecomposition

    Raises
    ------
    Singular
        If a marginal covariance is not positive definite.
    CorrelationOutOfRange
        If a computed correlation exceeds ``1 + 1e-10``.
    """
    _, ax = sqrt_and_inv_sqrt(cov.sigma_x)
    _, ay = sqrt_and_inv_sqrt(cov.sigma_y)
    dec = svd(ax @ cov.sigma_xy @ ay)
    lam = dec.singulars
    if lam.size and lam[0] > 1.0 + TOL_UNIT:
        raise CorrelationOutOfRange(f"canonical correlation {lam[0]:.12g} exceeds 1")
    lam = np.clip(lam, 0.0, 1.0)
    u, v = dec.left, dec.right
    if complete:
        u = _complete_frame(u)
        v = _complete_frame(v)
    return CanonicalDecomposition(phi=ax @ u, psi=ay @ v, lambdas=lam)


def apply_transform(cov: JointCovariance, t1: ArrayLike, t2: ArrayLike) -> JointCovariance:
    """Covariance of ``(T1^T x, T2^T y)``."""
    a = as_matrix(t1, "t1")
    b = as_matrix(t2, "t2")
    if a.shape != (cov.p1, cov.p1) or b.shape != (cov.p2, cov.p2):
        raise DimensionMismatch("transforms must be square and match p1, p2")
    for t, name in ((a, "t1"), (b, "t2")):
        s = np.linalg.svd(t, compute_uv=False)
        if s[-1] < EPS_PD * s[0]:
            raise Singular(f"{name} is not invertible")
    sx = a.T @ cov.sigma_x @ a
    sy = b.T @ cov.sigma_y @ b
    return JointCovariance(0.5 * (sx + sx.T), 0.5 * (sy + sy.T), a.T @ cov.sigma_xy @ b)


def random_orthonormal_frame(p: int, k: int, seed: Any = None) -> NDArray[np.float64]:
    """Haar-distributed ``p x k`` matrix with orthonormal columns.

    A standard Gaussian matrix is orthonormalized by QR with the diagonal of
    ``R`` made positive, which yields the exact Haar distribution.
    """
    if not 1 <= k <= p:
        raise InvalidShape(f"need 1 <= k <= p, got p={p}, k={k}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((p, k))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def random_covariance(p: int, kappa: float = 1.0, seed: Any = None) -> NDArray[np.float64]:
    """Random-rotation covariance with eigenvalues log-spaced in [1, kappa].

    The condition number is exactly ``kappa`` (up to rounding) when p >= 2.
    """
    if kappa < 1.0:
        raise InvalidModel(f"condition number must be >= 1, got {kappa}")
    if p == 1 or kappa == 1.0:
        return np.eye(p)
    q = random_orthonormal_frame(p, p, seed)
    w = np.geomspace(kappa, 1.0, p)
    s = (q * w) @ q.T
    return 0.5 * (s + s.T)


def random_spec(
    p1: int,
    p2: int,
    lambdas: ArrayLike,
    k: int | None = None,
    kappa_x: float = 1.0,
    kappa_y: float = 1.0,
    seed: Any = None,
) -> CanonicalSpec:
    """Spec with random frames and random covariances of given conditioning."""
    lam = np.asarray(lambdas, dtype=float).ravel()
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    s_u, s_v, s_x, s_y = ss.spawn(4)
    p = lam.size
    if p > min(p1, p2):
        raise InvalidLambdas(f"{p} correlations exceed min(p1, p2) = {min(p1, p2)}")
    return CanonicalSpec(
        sigma_x=random_covariance(p1, kappa_x, s_x),
        sigma_y=random_covariance(p2, kappa_y, s_y),
        lambdas=lam,
        frame_u=random_orthonormal_frame(p1, p, s_u),
        frame_v=random_orthonormal_frame(p2, p, s_v),
        k=k,
    )


_COV_FIELDS = {"p1", "p2", "sigma_x", "sigma_y", "sigma_xy"}
_SPEC_FIELDS = {"p1", "p2", "sigma_x", "sigma_y", "lambdas", "frame_u", "frame_v", "k"}


def model_to_dict(model: JointCovariance | CanonicalSpec) -> dict:
    """JSON-ready dictionary; matrices become row-major nested lists."""
    out: dict[str, Any] = {
        "p1": model.p1,
        "p2": model.p2,
        "sigma_x": model.sigma_x.tolist(),
        "sigma_y": model.sigma_y.tolist(),
    }
    if isinstance(model, JointCovariance):
        out["sigma_xy"] = model.sigma_xy.tolist()
    else:
        out["lambdas"] = model.lambdas.tolist()
        out["frame_u"] = model.frame_u.tolist()
        out["frame_v"] = model.frame_v.tolist()
        out["k"] = model.k
    return out


def model_from_dict(doc: dict) -> JointCovariance | CanonicalSpec:
    """Inverse of :func:`model_to_dict` with strict field checking."""
    if not isinstance(doc, dict):
        raise InvalidModel("model document must be a JSON object")
    keys = set(doc)
    if "sigma_xy" in keys:
        expected, required = _COV_FIELDS, _COV_FIELDS - {"p1", "p2"}
    else:
        expected, required = _SPEC_FIELDS, _SPEC_FIELDS - {"p1", "p2", "k"}
    unknown = keys - expected
    if unknown:
        raise InvalidModel(f"unknown model fields: {sorted(unknown)}")
    missing = required - keys
    if missing:
        raise InvalidModel(f"missing model fields: {sorted(missing)}")
    if "sigma_xy" in keys:
        model: JointCovariance | CanonicalSpec = JointCovariance(
            np.array(doc["sigma_x"], dtype=float),
            np.array(doc["sigma_y"], dtype=float),
            np.array(doc["sigma_xy"], dtype=float),
        )
    else:
        model = CanonicalSpec(
            sigma_x=np.array(doc["sigma_x"], dtype=float),
            sigma_y=np.array(doc["sigma_y"], dtype=float),
            lambdas=np.array(doc["lambdas"], dtype=float),
            frame_u=np.array(doc["frame_u"], dtype=float),
            frame_v=np.array(doc["frame_v"], dtype=float),
            k=doc.get("k"),
        )
    for name in ("p1", "p2"):
        if name in doc and doc[name] != getattr(model, name):
            raise DimensionMismatch(f"{name} = {doc[name]} disagrees with matrix shapes")
    return model


def save_model(model: JointCovariance | CanonicalSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path: str | Path) -> JointCovariance | CanonicalSpec:
    return model_from_dict(json.loads(Path(path).read_text()))


def covariance_of(model: JointCovariance | CanonicalSpec) -> JointCovariance:
    """Joint covariance for either model representation."""
    return model if isinstance(model, JointCovariance) else build_joint(model)


def whitened_frame(sigma_x: ArrayLike, u: ArrayLike) -> NDArray[np.float64]:
    """``Sigma_x^{1/2} U``: the coordinates in which variate subspaces are compared."""
    root, _ = sqrt_and_inv_sqrt(sigma_x, inverse=False)
    return root @ as_matrix(u)
