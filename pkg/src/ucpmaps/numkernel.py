"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Matrices in
``M_d`` are vectorised by stacking columns (``vec``/``unvec``); the
Hilbert-Schmidt inner product is ``<A, B> = tr(A^H B)`` with the
unnormalised trace.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.csgraph import connected_components

from .errors import BoundaryAmbiguity, NonConvergence, NotHermitian, SylvesterSingular


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical thresholds shared by all analyses.

    Attributes
    ----------
    eq_tol : float
        Absolute entrywise tolerance for matrix equality.
    rank_tol_factor : float
        Singular values below ``rank_tol_factor * sigma_max`` count as zero.
    peripheral_tol : float
        Eigenvalues with ``| |z| - 1 | <= peripheral_tol`` are peripheral.
    cluster_tol : float
        Eigenvalues closer than this are merged into one cluster.
    """

    eq_tol: float = 1e-9
    rank_tol_factor: float = 1e-10
    peripheral_tol: float = 1e-8
    cluster_tol: float = 1e-7

    def __post_init__(self):
        for name in ("eq_tol", "rank_tol_factor", "peripheral_tol", "cluster_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.cluster_tol < self.rank_tol_factor:
            raise ValueError("cluster_tol must be >= rank_tol_factor")


DEFAULT_TOL = ToleranceConfig()


def as_cmatrix(A) -> np.ndarray:
    """Return ``A`` as a finite 2-D complex array."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, d: Optional[int] = None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    return v.reshape(d, d, order="F")


def hs_inner(A: np.ndarray, B: np.ndarray) -> complex:
    return complex(np.vdot(A, B))


def hs_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A))


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(A).T


def eig_general(A):
    """Eigenvalues (with algebraic multiplicity) and right eigenvectors.

    Returns
    -------
    eigenvalues : ndarray, shape (n,)
    vectors : ndarray, shape (n, n)
        Column ``k`` is a right eigenvector for ``eigenvalues[k]``.  For
        defective matrices the columns are linearly dependent.
    """
    A = as_cmatrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("eig_general needs a square matrix")
    try:
        w, V = sla.eig(A, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NonConvergence(f"eigenvalue iteration failed: {exc}") from exc
    return w, V


def cluster_eigenvalues(values, cluster_tol: float):
    """Merge eigenvalues closer than ``cluster_tol`` (single linkage).

    Returns a list of ``(mean, multiplicity)`` sorted by decreasing modulus,
    then by argument in ``[0, 2 pi)``.
    """
    values = np.asarray(values, dtype=complex).ravel()
    if values.size == 0:
        return []
    adj = np.abs(values[:, None] - values[None, :]) <= cluster_tol
    n_comp, labels = connected_components(adj, directed=False)
    clusters = []
    for c in range(n_comp):
        members = values[labels == c]
        clusters.append((complex(members.mean()), int(members.size)))
    return sorted(clusters, key=lambda vm: _spectral_sort_key(vm[0]))


def _spectral_sort_key(z: complex):
    ang = float(np.angle(z)) % (2 * np.pi)
    if ang > 2 * np.pi - 1e-9:
        ang = 0.0
    return (-round(abs(z), 9), round(ang, 9))


def spectral_projector(
    A,
    select: Callable[[complex], bool],
    ambiguous: Optional[Callable[[complex], bool]] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> np.ndarray:
    """Spectral (Riesz) projector onto the generalised eigenspaces selected.

    Uses an ordered complex Schur form ``A = Q S Q^H`` with the selected
    eigenvalues leading, then decouples the blocks through the Sylvester
    equation ``S11 R - R S22 = -S12``.  The result is ``Q [[I, -R], [0, 0]] Q^H``,
    which is idempotent, commutes with ``A`` and is in general not
    orthogonal.

    Parameters
    ----------
    select
        Predicate on a single eigenvalue.
    ambiguous
        Optional predicate flagging eigenvalues too close to the selection
        boundary; any hit raises :class:`BoundaryAmbiguity`.
    """
    A = as_cmatrix(A)
    n = A.shape[0]
    w = sla.eigvals(A, check_finite=False)
    if ambiguous is not None:
        bad = [complex(z) for z in w if ambiguous(complex(z))]
        if bad:
            raise BoundaryAmbiguity(f"eigenvalues near the selection boundary: {bad}")
    k = sum(bool(select(complex(z))) for z in w)
    if k == 0:
        return np.zeros((n, n), dtype=complex)
    if k == n:
        return np.eye(n, dtype=complex)

    S, Q, sdim = sla.schur(A, output="complex", sort=lambda z: bool(select(complex(z))))
    if sdim != k:
        raise BoundaryAmbiguity(
            f"Schur reordering selected {sdim} eigenvalues, eigvals selected {k}"
        )
    S11 = S[:k, :k]
    S12 = S[:k, k:]
    S22 = S[k:, k:]
    sep = np.min(np.abs(np.diag(S11)[:, None] - np.diag(S22)[None, :]))
    if sep <= tol.rank_tol_factor * max(1.0, np.abs(np.diag(S)).max()):
        raise SylvesterSingular("selected and remaining spectra overlap")
    # solve_sylvester solves a X + X b = q
    R = sla.solve_sylvester(S11, -S22, -S12)
    top = np.hstack([np.eye(k), -R])
    return Q[:, :k] @ top @ dagger(Q)


def null_space(A, tol: ToleranceConfig = DEFAULT_TOL, atol: float = 0.0) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical null space of ``A``.

    Singular values ``<= max(rank_tol_factor * sigma_max, atol)`` count as zero.
    """
    A = as_cmatrix(A)
    m, n = A.shape
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    if m == 0:
        return np.eye(n, dtype=complex)
    _, s, Vh = sla.svd(A, full_matrices=True, check_finite=False)
    smax = s[0] if s.size else 0.0
    thresh = max(tol.rank_tol_factor * smax, atol)
    rank = int(np.sum(s > thresh)) if smax > 0 else 0
    return dagger(Vh[rank:])


def range_basis(A, tol: ToleranceConfig = DEFAULT_TOL, atol: float = 0.0) -> np.ndarray:
    """Orthonormal basis (as columns) of the column space of ``A``."""
    A = as_cmatrix(A)
    if A.size == 0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    U, s, _ = sla.svd(A, full_matrices=False, check_finite=False)
    smax = s[0] if s.size else 0.0
    if smax == 0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    thresh = max(tol.rank_tol_factor * smax, atol)
    return U[:, s > thresh]


def numerical_rank(A, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    s = sla.svdvals(as_cmatrix(A), check_finite=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol.rank_tol_factor * s[0]))


def psd_gap(A, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Smallest eigenvalue of the Hermitian part of ``A``.

    The caller decides PSD-ness, typically ``psd_gap(A) >= -tol.eq_tol``.
    """
    A = as_cmatrix(A)
    skew = operator_norm(A - dagger(A))
    if skew > tol.eq_tol * max(operator_norm(A), 1.0):
        raise NotHermitian(f"matrix is not Hermitian (||A - A^H|| = {skew:.3e})")
    H = (A + dagger(A)) / 2
    return float(np.linalg.eigvalsh(H)[0])


def operator_norm(A) -> float:
    A = np.asarray(A, dtype=complex)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


@dataclass(frozen=True)
class HSBasis:
    """Hilbert-Schmidt orthonormal family of ``d x d`` matrices.

    ``vectors`` holds the vectorised elements as columns, shape ``(d*d, k)``.
    """

    dim: int
    vectors: np.ndarray

    @property
    def elements(self):
        return [unvec(self.vectors[:, j], self.dim) for j in range(self.vectors.shape[1])]

    def __len__(self):
        return self.vectors.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the span, acting on vectorised matrices."""
        return self.vectors @ dagger(self.vectors)

    def residual(self, X) -> float:
        """HS distance from ``X`` to the span."""
        v = vec(X)
        return float(np.linalg.norm(v - self.vectors @ (dagger(self.vectors) @ v)))


def orthonormalize_hs(
    vectors: Sequence[np.ndarray], tol: ToleranceConfig = DEFAULT_TOL, dim: Optional[int] = None
) -> HSBasis:
    """Gram-Schmidt (with reorthogonalisation) under ``tr(A^H B)``.

    Directions whose residual falls below ``rank_tol_factor`` times the
    largest input norm are discarded.  Input order is preserved, so an
    already orthonormal family comes back unchanged.
    """
    mats = [np.asarray(X, dtype=complex) for X in vectors]
    if dim is None:
        if not mats:
            raise ValueError("cannot infer dimension of an empty family")
        dim = mats[0].shape[0]
    for X in mats:
        if X.shape != (dim, dim):
            raise ValueError("all matrices must have the same square shape")
    cols = [vec(X) for X in mats]
    return _gram_schmidt(cols, dim, tol)


def _gram_schmidt(cols, dim, tol, basis=None) -> HSBasis:
    scale = max((np.linalg.norm(c) for c in cols), default=0.0)
    out = [] if basis is None else [basis.vectors[:, j] for j in range(len(basis))]
    if basis is not None and len(basis):
        scale = max(scale, 1.0)
    thresh = tol.rank_tol_factor * scale
    for c in cols:
        r = np.array(c, dtype=complex)
        for _ in range(2):
            for q in out:
                r = r - q * np.vdot(q, r)
        nr = np.linalg.norm(r)
        if nr > thresh and nr > 0:
            out.append(r / nr)
    V = np.array(out).T if out else np.zeros((dim * dim, 0), dtype=complex)
    return HSBasis(dim=dim, vectors=V)


def extend_basis(basis: HSBasis, vectors, tol: ToleranceConfig = DEFAULT_TOL) -> HSBasis:
    """Append the new directions of ``vectors`` to an orthonormal basis."""
    cols = [vec(np.asarray(X, dtype=complex)) for X in vectors]
    return _gram_schmidt(cols, basis.dim, tol, basis=basis)


def subspace_intersection(U: np.ndarray, V: np.ndarray, tol: ToleranceConfig = DEFAULT_TOL):
    """Orthonormal basis of ``range(U) & range(V)`` for orthonormal-column ``U, V``."""
    n = U.shape[0]
    if U.shape[1] == 0 or V.shape[1] == 0:
        return np.zeros((n, 0), dtype=complex)
    PU = np.eye(n) - U @ dagger(U)
    PV = np.eye(n) - V @ dagger(V)
    return null_space(np.vstack([PU, PV]), tol, atol=1e-7)


def subspace_contains(U: np.ndarray, V: np.ndarray) -> float:
    """Largest residual of the columns of ``V`` outside ``range(U)``.

    ``U`` must have orthonormal columns.  Zero means ``range(V) <= range(U)``.
    """
    if V.shape[1] == 0:
        return 0.0
    R = V - U @ (dagger(U) @ V)
    return float(np.max(np.linalg.norm(R, axis=0)))
