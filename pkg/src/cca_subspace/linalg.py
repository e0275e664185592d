"""Dense linear-algebra primitives with fixed ordering, sign and tolerance rules.

Every decomposition returned here sorts its spectrum in descending order and
flips each vector so that its largest-magnitude entry is non-negative.  For
singular value decompositions the right vector follows the sign of the left
one, which keeps ``M = L diag(s) R^T`` intact.  Tolerances are relative to the
norm of the input so that badly scaled covariances behave like well scaled
ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    InvalidShape,
    NotFinite,
    NotPd,
    NotPsd,
    NotSymmetric,
    RankDeficient,
    Singular,
)

TOL_SYM = 1e-10
TOL_PSD = 1e-10
EPS_PD = 1e-12
TOL_RECON = 1e-10

__all__ = [
    "TOL_SYM",
    "TOL_PSD",
    "EPS_PD",
    "TOL_RECON",
    "SymEig",
    "Svd",
    "as_matrix",
    "check_symmetric",
    "sym_eig",
    "svd",
    "sqrt_and_inv_sqrt",
    "cholesky",
    "orthonormal_basis",
    "projector",
    "norms",
    "condition_number",
]


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition ``S = V diag(values) V^T`` with descending values."""

    values: NDArray[np.float64]
    vectors: NDArray[np.float64]

    def reconstruct(self) -> NDArray[np.float64]:
        return (self.vectors * self.values) @ self.vectors.T


@dataclass(frozen=True)
class Svd:
    """Thin singular value decomposition ``M = L diag(s) R^T``."""

    left: NDArray[np.float64]
    singulars: NDArray[np.float64]
    right: NDArray[np.float64]

    def reconstruct(self) -> NDArray[np.float64]:
        return (self.left * self.singulars) @ self.right.T


def as_matrix(m: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    """Convert to a finite 2-D float array, raising on bad input."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidShape(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotFinite(f"{name} contains NaN or Inf")
    return a


def check_symmetric(s: ArrayLike, name: str = "matrix", tol: float = TOL_SYM) -> NDArray[np.float64]:
    """Return the symmetrized matrix after checking relative asymmetry."""
    a = as_matrix(s, name)
    if a.shape[0] != a.shape[1]:
        raise InvalidShape(f"{name} must be square, got shape {a.shape}")
    scale = np.max(np.abs(a))
    if np.max(np.abs(a - a.T)) > tol * max(scale, np.finfo(float).tiny):
        raise NotSymmetric(f"{name} is not symmetric within relative tolerance {tol:g}")
    return 0.5 * (a + a.T)


def _fix_signs(vectors: NDArray[np.float64]) -> NDArray[np.float64]:
    """Per-column sign flip: largest-magnitude entry becomes non-negative."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def sym_eig(s: ArrayLike) -> SymEig:
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    s : array_like, shape (p, p)
        Symmetric matrix (relative asymmetry at most ``TOL_SYM``).

    Returns
    -------
    SymEig
        Eigenvalues in descending order and orthonormal eigenvectors with
        the largest-magnitude entry of each column non-negative.

    Examples
    --------
    >>> sym_eig([[2.0, 1.0], [1.0, 2.0]]).values
    array([3., 1.])
    """
    a = check_symmetric(s)
    w, v = np.linalg.eigh(a)
    w = w[::-1].copy()
    v = v[:, ::-1]
    v = v * _fix_signs(v)
    return SymEig(values=w, vectors=np.ascontiguousarray(v))


def svd(m: ArrayLike) -> Svd:
    """Thin SVD with descending singular values and the module sign convention."""
    a = as_matrix(m)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    signs = _fix_signs(u)
    return Svd(left=u * signs, singulars=s, right=vt.T * signs)


def sqrt_and_inv_sqrt(
    s: ArrayLike, inverse: bool = True
) -> tuple[NDArray[np.float64], NDArray[np.float64] | None]:
    """Symmetric square root and inverse square root of a PSD matrix.

    Parameters
    ----------
    s : array_like, shape (p, p)
        Symmetric positive semi-definite matrix.
    inverse : bool, default True
        Whether to also form ``S^{-1/2}``.  When False the second element of
        the result is None and singular inputs are accepted.

    Returns
    -------
    root, inv_root : ndarray
        ``S^{1/2}`` and ``S^{-1/2}`` (or None).

    Raises
    ------
    NotPsd
        If an eigenvalue is below ``-TOL_PSD * ||S||``.
    Singular
        If the inverse is requested and the smallest eigenvalue is below
        ``EPS_PD * ||S||``.
    """
    eig = sym_eig(s)
    w, v = eig.values, eig.vectors
    scale = max(abs(w[0]), abs(w[-1]))
    if w[-1] < -TOL_PSD * scale:
        raise NotPsd(f"smallest eigenvalue {w[-1]:.3e} is negative beyond tolerance")
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    root = 0.5 * (root + root.T)
    if not inverse:
        return root, None
    if scale == 0.0 or w[-1] < EPS_PD * scale:
        raise Singular(f"smallest eigenvalue {w[-1]:.3e} too small for an inverse square root")
    inv_root = (v / np.sqrt(w)) @ v.T
    return root, 0.5 * (inv_root + inv_root.T)


def cholesky(s: ArrayLike) -> NDArray[np.float64]:
    """Lower-triangular ``L`` with ``L L^T = S`` for symmetric PD ``S``."""
    a = check_symmetric(s)
    w = np.linalg.eigvalsh(a)
    scale = max(abs(w[0]), abs(w[-1]))
    if scale == 0.0 or w[0] < EPS_PD * scale:
        raise NotPd(f"smallest eigenvalue {w[0]:.3e} is not positive enough for Cholesky")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by the eigen check
        raise NotPd(str(exc)) from exc


def orthonormal_basis(u: ArrayLike) -> NDArray[np.float64]:
    """Orthonormal basis of the column space of a full-column-rank matrix."""
    a = as_matrix(u)
    if a.shape[1] > a.shape[0]:
        raise RankDeficient(f"{a.shape[1]} columns cannot be independent in dimension {a.shape[0]}")
    q, s, _ = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0 or s[-1] < EPS_PD * s[0]:
        raise RankDeficient("matrix does not have full column rank")
    return q


def projector(u: ArrayLike) -> NDArray[np.float64]:
    """Orthogonal projector onto ``col(U)``.

    Examples
    --------
    >>> projector([[1.0], [0.0], [0.0]]).diagonal()
    array([1., 0., 0.])
    """
    q = orthonormal_basis(u)
    p = q @ q.T
    return 0.5 * (p + p.T)


def norms(m: ArrayLike) -> tuple[float, float]:
    """Return ``(operator norm, Frobenius norm)``."""
    a = as_matrix(m)
    return float(np.linalg.norm(a, 2)), float(np.linalg.norm(a, "fro"))


def condition_number(s: ArrayLike) -> float:
    """Ratio of extreme singular values (``inf`` for singular input)."""
    sv = np.linalg.svd(as_matrix(s), compute_uv=False)
    return float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
