"""Spectrum of a UCP map and the persistent/transient splitting of ``M_d``.

The peripheral space ``P(tau)`` is spanned by eigenvectors whose eigenvalues
lie on the unit circle; the transient space ``N(tau)`` collects the
generalised eigenspaces of the remaining eigenvalues.  Both are read off a
single spectral projector of the superoperator.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .channel import Channel
from .errors import NoSpectralGap, NotAnEigenvalue
from .numkernel import (
    DEFAULT_TOL,
    HSBasis,
    ToleranceConfig,
    cluster_eigenvalues,
    dagger,
    hs_norm,
    null_space,
    spectral_projector,
    subspace_contains,
    unvec,
    vec,
)


def is_peripheral(z: complex, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    return abs(abs(z) - 1.0) <= tol.peripheral_tol


def is_ambiguous(z: complex, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """True for eigenvalues just inside the peripheral band.

    These are not snapped to the circle, but sit within ``cluster_tol`` of
    doing so, so their classification is not trustworthy.
    """
    gap = 1.0 - abs(z)
    return tol.peripheral_tol < gap <= tol.peripheral_tol + tol.cluster_tol


def snap(z: complex) -> complex:
    return complex(z / abs(z))


@dataclass(frozen=True)
class SpectralData:
    """Clustered spectrum of a superoperator.

    ``eigenvalues`` and ``peripheral`` are lists of ``(value, multiplicity)``;
    peripheral values are snapped onto the unit circle.
    """

    eigenvalues: List[Tuple[complex, int]]
    peripheral: List[Tuple[complex, int]]
    transient_radius: float
    ambiguous: List[complex] = field(default_factory=list)

    @property
    def peripheral_dim(self) -> int:
        return sum(m for _, m in self.peripheral)

    @property
    def spectral_gap(self) -> float:
        return 1.0 - self.transient_radius


def spectrum_of_superop(T: np.ndarray, tol: ToleranceConfig = DEFAULT_TOL) -> SpectralData:
    w = sla.eigvals(T, check_finite=False)
    per_mask = np.array([is_peripheral(z, tol) for z in w], dtype=bool)
    per = [(snap(z), m) for z, m in cluster_eigenvalues(w[per_mask], tol.cluster_tol)]
    transient = w[~per_mask]
    radius = float(np.abs(transient).max()) if transient.size else 0.0
    clusters = []
    for z, m in cluster_eigenvalues(w, tol.cluster_tol):
        clusters.append((snap(z) if is_peripheral(z, tol) else z, m))
    ambiguous = [complex(z) for z in w if is_ambiguous(z, tol)]
    return SpectralData(eigenvalues=clusters, peripheral=per, transient_radius=radius, ambiguous=ambiguous)


def spectrum(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> SpectralData:
    ch.require_unital()
    return spectrum_of_superop(ch.superop, tol)


def eigenspace(ch: Channel, lam: complex, tol: ToleranceConfig = DEFAULT_TOL) -> List[np.ndarray]:
    """HS-orthonormal basis of ``{X : tau(X) = lam X}``."""
    T = ch.superop
    w = sla.eigvals(T, check_finite=False)
    if np.min(np.abs(w - lam)) > tol.cluster_tol:
        raise NotAnEigenvalue(f"{lam} is not an eigenvalue (nearest distance {np.min(np.abs(w - lam)):.3e})")
    N = null_space(T - lam * np.eye(T.shape[0]), tol)
    return [unvec(N[:, j], ch.dim) for j in range(N.shape[1])]


def _peripheral_projector_schur(T, tol):
    return spectral_projector(
        T,
        select=lambda z: is_peripheral(z, tol),
        ambiguous=lambda z: is_ambiguous(z, tol),
        tol=tol,
    )


def contour_projector(T: np.ndarray, radius: float, nodes: int = 256) -> np.ndarray:
    """``I - (1/2 pi i) oint_{|z|=radius} (z - T)^{-1} dz`` by the trapezoid rule."""
    n = T.shape[0]
    eye = np.eye(n)
    Q = np.zeros((n, n), dtype=complex)
    for k in range(nodes):
        z = radius * np.exp(2j * np.pi * k / nodes)
        # dz = i z dtheta, and the 1/(2 pi i) cancels against i * 2 pi / nodes
        Q += z * np.linalg.solve(z * eye - T, eye)
    return eye - Q / nodes


def peripheral_projector(ch: Channel, method: str = "schur", nodes: int = 256,
                         tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Spectral projector of the superoperator onto ``vec(P(tau))``.

    ``method="contour"`` integrates the resolvent on the circle midway
    between the transient spectral radius and 1.
    """
    ch.require_unital()
    T = ch.superop
    if method == "schur":
        return _peripheral_projector_schur(T, tol)
    if method == "contour":
        radius = spectrum_of_superop(T, tol).transient_radius
        # inside the ambiguity band the contour would pass within cluster_tol of an eigenvalue
        if radius >= 1.0 - tol.peripheral_tol - tol.cluster_tol:
            raise NoSpectralGap(f"transient radius {radius} leaves no room for a contour")
        return contour_projector(T, (1.0 + radius) / 2.0, nodes)
    raise ValueError(f"unknown projector method {method!r}")


@dataclass(frozen=True)
class PeripheralDecomposition:
    """``M_d = P(tau) (+) N(tau)`` together with an eigenbasis of ``P(tau)``.

    Attributes
    ----------
    eigenvalues : ndarray
        Eigenvalue (on the unit circle) of each peripheral basis element.
    p_basis : list of ndarray
        Peripheral eigenvectors with unit HS norm; within each eigenspace
        the basis is in echelon form (see :func:`canonical_basis`).
    p_space : HSBasis
        Orthonormal basis of ``P(tau)``.
    n_basis : HSBasis
        Orthonormal basis of ``N(tau)``.
    projector : ndarray
        Spectral projector onto ``vec(P(tau))`` along ``vec(N(tau))``.
    """

    dim: int
    eigenvalues: np.ndarray
    p_basis: List[np.ndarray]
    p_space: HSBasis
    n_basis: HSBasis
    projector: np.ndarray
    spectral: SpectralData
    eigen_residual: float

    @property
    def p_dim(self) -> int:
        return len(self.p_basis)

    @property
    def n_dim(self) -> int:
        return len(self.n_basis)

    @property
    def p_vectors(self) -> np.ndarray:
        if not self.p_basis:
            return np.zeros((self.dim ** 2, 0), dtype=complex)
        return np.column_stack([vec(B) for B in self.p_basis])

    def peripheral_part(self, X) -> np.ndarray:
        return unvec(self.projector @ vec(X), self.dim)

    def eigenspaces(self):
        """Group the basis by eigenvalue: list of ``(lam, [B, ...])``."""
        groups = []
        for lam, B in zip(self.eigenvalues, self.p_basis):
            for g in groups:
                if abs(g[0] - lam) <= 1e-9:
                    g[1].append(B)
                    break
            else:
                groups.append((lam, [B]))
        return groups


def canonical_basis(Q: np.ndarray, pivot_ratio: float = 0.5) -> np.ndarray:
    """Echelon-form basis of ``range(Q)``, independent of how ``Q`` was rotated.

    Pivot coordinates are taken in index order among entries within
    ``pivot_ratio`` of the largest remaining magnitude; the basis is unit
    matrix on the pivots (before normalisation), so phases are fixed too.
    Columns come back with unit norm.
    """
    n, m = Q.shape
    if m == 0:
        return Q
    W = Q.copy()
    pivots = []
    for _ in range(m):
        mags = np.max(np.abs(W), axis=1)
        mags[pivots] = 0.0
        row = int(np.flatnonzero(mags >= pivot_ratio * mags.max())[0])
        pivots.append(row)
        # eliminate this coordinate from the remaining directions
        col = int(np.argmax(np.abs(W[row])))
        v = W[:, col] / W[row, col]
        W = W - np.outer(v, W[row])
        W[:, col] = 0.0
    B = Q @ np.linalg.solve(Q[pivots, :], np.eye(m))
    order = np.argsort(pivots)
    B = B[:, order]
    return B / np.linalg.norm(B, axis=0)


def _split_by_projector(P: np.ndarray, k: int):
    """Orthonormal bases of range(P) (k columns) and range(I - P)."""
    n = P.shape[0]
    U = sla.svd(P, full_matrices=False)[0][:, :k] if k else np.zeros((n, 0), dtype=complex)
    Qn = np.eye(n) - P
    V = sla.svd(Qn, full_matrices=False)[0][:, : n - k] if k < n else np.zeros((n, 0), dtype=complex)
    return U, V


def decompose_superop(T: np.ndarray, d: int, tol: ToleranceConfig = DEFAULT_TOL) -> PeripheralDecomposition:
    spec = spectrum_of_superop(T, tol)
    P = _peripheral_projector_schur(T, tol)
    k = spec.peripheral_dim
    U, V = _split_by_projector(P, k)
    # T restricted to the invariant subspace range(P); diagonalisable there
    Tr = dagger(U) @ T @ U
    values, mats = [], []
    resid = 0.0
    for lam, m in spec.peripheral:
        _, s, Vh = sla.svd(Tr - lam * np.eye(k))
        vecs = canonical_basis(U @ dagger(Vh[k - m:]))
        for j in range(m):
            x = vecs[:, j]
            resid = max(resid, float(np.linalg.norm(T @ x - lam * x)))
            values.append(lam)
            mats.append(unvec(x / np.linalg.norm(x), d))
    return PeripheralDecomposition(
        dim=d,
        eigenvalues=np.array(values, dtype=complex),
        p_basis=mats,
        p_space=HSBasis(d, U),
        n_basis=HSBasis(d, V),
        projector=P,
        spectral=spec,
        eigen_residual=resid,
    )


def peripheral_decomposition(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> PeripheralDecomposition:
    ch.require_unital()
    return decompose_superop(ch.superop, ch.dim, tol)


@dataclass(frozen=True)
class DiagonalizabilityReport:
    ok: bool
    multiplicities: List[Tuple[complex, int, int]]  # (lam, algebraic, geometric)


def check_peripheral_diagonalizable(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> DiagonalizabilityReport:
    """Compare algebraic and geometric multiplicity of every peripheral eigenvalue."""
    spec = spectrum(ch, tol)
    rows = []
    for lam, alg in spec.peripheral:
        geo = len(eigenspace(ch, lam, tol))
        rows.append((lam, alg, geo))
    return DiagonalizabilityReport(ok=all(a == g for _, a, g in rows), multiplicities=rows)


@dataclass(frozen=True)
class DecayResult:
    decays: Optional[bool]  # None when inconclusive
    first_n: Optional[int]
    residuals: List[float]
    status: str


DECAY_CAP = 10_000


def decay_verify(ch: Channel, X, n_max: Optional[int] = None, tol: float = 1e-10,
                 tolerances: ToleranceConfig = DEFAULT_TOL) -> DecayResult:
    """Iterate ``tau^n(X)`` until ``||tau^n(X)|| <= tol * ||X||``.

    The default horizon is twice the number of steps the transient spectral
    radius predicts, capped at 10^4.  When the cap stops the iteration
    before the predicted horizon, the verdict is ``inconclusive``.
    """
    spec = spectrum(ch, tolerances)
    r = spec.transient_radius
    d = ch.dim
    if r <= 0.0:
        needed = d * d + 1
    elif r >= 1.0 - tolerances.peripheral_tol:
        needed = math.inf
    else:
        needed = max(2 * math.ceil(math.log(tol) / math.log(r)), d * d + 1)
    if n_max is None:
        n_max = int(min(needed, DECAY_CAP))
    T = ch.superop
    x = vec(np.asarray(X, dtype=complex))
    scale = max(float(np.linalg.norm(x)), 1e-300)
    residuals = []
    for n in range(1, n_max + 1):
        x = T @ x
        res = float(np.linalg.norm(x)) / scale
        residuals.append(res)
        if res <= tol:
            return DecayResult(True, n, residuals, "decays")
    if needed > n_max:
        return DecayResult(None, None, residuals, "inconclusive")
    return DecayResult(False, None, residuals, "persists")


@dataclass(frozen=True)
class PowerSpaceReport:
    p_equal: bool
    n_equal: bool
    p_gap: float
    n_gap: float


def power_space_equality(ch: Channel, m: int, tol: ToleranceConfig = DEFAULT_TOL,
                         space_tol: float = 1e-7) -> PowerSpaceReport:
    """Check ``P(tau^m) = P(tau)`` and ``N(tau^m) = N(tau)`` by mutual containment."""
    if m < 1:
        raise ValueError("m must be >= 1")
    ch.require_unital()
    a = decompose_superop(ch.superop, ch.dim, tol)
    b = decompose_superop(np.linalg.matrix_power(ch.superop, m), ch.dim, tol)
    p_gap = _mutual_gap(a.p_space.vectors, b.p_space.vectors)
    n_gap = _mutual_gap(a.n_basis.vectors, b.n_basis.vectors)
    return PowerSpaceReport(p_gap <= space_tol, n_gap <= space_tol, p_gap, n_gap)


def _mutual_gap(U, V) -> float:
    if U.shape[1] != V.shape[1]:
        return math.inf
    return max(subspace_contains(U, V), subspace_contains(V, U))


def same_subspace(U, V, space_tol: float = 1e-7) -> bool:
    return _mutual_gap(U, V) <= space_tol


def restricted_peripheral_space(ch: Channel, block_dims, tol: ToleranceConfig = DEFAULT_TOL) -> HSBasis:
    """Peripheral space of ``tau`` viewed as a map on the block-diagonal algebra.

    ``tau`` must leave ``A = (+)_j M_{d_j}`` (coordinate blocks) invariant.
    The result is expressed as matrices in ``M_d``.
    """
    from .channel import block_projections

    projs = block_projections(block_dims, ch.dim)
    cols = []
    for P in projs:
        idx = np.flatnonzero(np.diag(P).real > 0.5)
        for j in idx:
            for i in idx:
                E = np.zeros((ch.dim, ch.dim), dtype=complex)
                E[i, j] = 1
                cols.append(vec(E))
    A = np.column_stack(cols)  # orthonormal basis of vec(A)
    T = ch.superop
    leak = float(np.linalg.norm(T @ A - A @ (dagger(A) @ T @ A)))
    if leak > 1e-8:
        raise ValueError(f"channel does not preserve the block algebra (leak {leak:.2e})")
    Tr = dagger(A) @ T @ A
    P = _peripheral_projector_schur(Tr, tol)
    k = spectrum_of_superop(Tr, tol).peripheral_dim
    U, _ = _split_by_projector(P, k)
    return HSBasis(ch.dim, A @ U)
