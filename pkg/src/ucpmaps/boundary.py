"""Choi-Effros product on the peripheral space and the boundary C*-algebra.

For peripheral eigenvectors ``X`` (eigenvalue ``lam``) and ``Y`` (``mu``) the
product ``X o Y`` is the limit of ``(lam mu)^-n tau^n(XY)``, taken along
times where every peripheral phase returns close to 1.  Along such times
the transient part of ``XY`` dies and each peripheral component survives
unchanged, so the limit equals the peripheral part of ``XY``.  This module
computes the closed form and, independently, the iterated estimate.
"""

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import Channel
from .errors import NotPeripheral, SubsequenceNotFound
from .numkernel import DEFAULT_TOL, ToleranceConfig, dagger, hs_norm, operator_norm, unvec, vec
from .spectral import PeripheralDecomposition, peripheral_decomposition, snap

MEMBERSHIP_TOL = 1e-7


def _decomp(ch, decomp, tol):
    return decomp if decomp is not None else peripheral_decomposition(ch, tol)


def _check_peripheral(dec: PeripheralDecomposition, X, label: str):
    x = vec(X)
    resid = float(np.linalg.norm(x - dec.projector @ x))
    if resid > MEMBERSHIP_TOL * max(float(np.linalg.norm(x)), 1.0):
        raise NotPeripheral(f"{label} is not in the peripheral space (residual {resid:.3e})")


def ce_product(ch: Channel, X, Y, decomp: Optional[PeripheralDecomposition] = None,
               tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Choi-Effros product ``X o Y`` of two elements of ``P(tau)``."""
    dec = _decomp(ch, decomp, tol)
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    _check_peripheral(dec, X, "X")
    _check_peripheral(dec, Y, "Y")
    return dec.peripheral_part(X @ Y)


def _eigenvalue_of(ch: Channel, X, label: str) -> complex:
    X = np.asarray(X, dtype=complex)
    tX = ch.apply(X)
    nx = hs_norm(X)
    if nx == 0:
        raise NotPeripheral(f"{label} is zero")
    lam = np.vdot(X, tX) / nx ** 2
    if abs(lam) == 0 or hs_norm(tX - lam * X) > MEMBERSHIP_TOL * nx or abs(abs(lam) - 1) > 1e-6:
        raise NotPeripheral(f"{label} is not a peripheral eigenvector")
    return snap(lam)


def return_time(phases, transient_radius: float, delta: float, k_max: int):
    """Smallest ``k`` with ``max_i |mu_i^k - 1| < delta`` and ``r^k < delta``.

    Returns ``(k, value)`` where ``value`` is the criterion at ``k``; ``k``
    is ``None`` when no time up to ``k_max`` qualifies (``value`` is then
    the best criterion seen).
    """
    angles = np.angle(np.asarray(phases, dtype=complex))
    best = (None, np.inf)
    chunk = 8192
    for start in range(1, k_max + 1, chunk):
        ks = np.arange(start, min(start + chunk, k_max + 1))
        if angles.size:
            crit = np.max(2 * np.abs(np.sin(np.outer(ks, angles) / 2)), axis=1)
        else:
            crit = np.zeros(ks.size)
        if transient_radius > 0:
            crit = np.maximum(crit, transient_radius ** ks.astype(float))
        hit = np.flatnonzero(crit < delta)
        if hit.size:
            return int(ks[hit[0]]), float(crit[hit[0]])
        j = int(np.argmin(crit))
        if crit[j] < best[1]:
            best = (int(ks[j]), float(crit[j]))
    return None, best


@dataclass(frozen=True)
class IterativeProduct:
    estimate: np.ndarray
    k_used: int
    criterion: float


def ce_product_iterative(ch: Channel, X, Y, k_max: int = 100_000, delta: float = 1e-3,
                         tol: ToleranceConfig = DEFAULT_TOL) -> IterativeProduct:
    """Estimate ``X o Y`` as ``(lam mu)^-k tau^k(XY)`` at a return time ``k``.

    ``X`` and ``Y`` must be peripheral eigenvectors.  The return time makes
    every peripheral phase ``delta``-close to 1 and shrinks the transient
    part below ``delta``.
    """
    lam = _eigenvalue_of(ch, X, "X")
    mu = _eigenvalue_of(ch, Y, "Y")
    dec = peripheral_decomposition(ch, tol)
    phases = [z for z, _ in dec.spectral.peripheral]
    k, crit = return_time(phases, dec.spectral.transient_radius, delta, k_max)
    if k is None:
        best_k, best_val = crit
        raise SubsequenceNotFound(
            f"no return time below {delta} up to k={k_max} (best k={best_k}, value {best_val:.3e})",
            best_k=best_k, best_value=best_val,
        )
    Tk = np.linalg.matrix_power(ch.superop, k)
    XY = np.asarray(X, dtype=complex) @ np.asarray(Y, dtype=complex)
    est = (lam * mu) ** (-k) * unvec(Tk @ vec(XY), ch.dim)
    return IterativeProduct(estimate=est, k_used=k, criterion=crit)


@dataclass(frozen=True)
class BoundaryAlgebra:
    """``(P(tau), o)`` in the peripheral eigenbasis.

    ``structure_constants[a, b, c]`` is the coefficient of ``basis[c]`` in
    ``basis[a] o basis[b]``.
    """

    decomposition: PeripheralDecomposition
    structure_constants: np.ndarray
    unit_coords: np.ndarray
    closure_residual: float

    @property
    def basis(self):
        return self.decomposition.p_basis

    @property
    def dim(self) -> int:
        return len(self.basis)

    def to_matrix(self, coords) -> np.ndarray:
        return unvec(self.decomposition.p_vectors @ np.asarray(coords), self.decomposition.dim)

    def coords(self, X) -> np.ndarray:
        M = self.decomposition.p_vectors
        return np.linalg.lstsq(M, vec(X), rcond=None)[0]

    def product_coords(self, x, y) -> np.ndarray:
        return np.einsum("a,b,abc->c", x, y, self.structure_constants)

    def product(self, X, Y) -> np.ndarray:
        return self.to_matrix(self.product_coords(self.coords(X), self.coords(Y)))


def boundary_algebra(ch: Channel, decomp: Optional[PeripheralDecomposition] = None,
                     tol: ToleranceConfig = DEFAULT_TOL) -> BoundaryAlgebra:
    dec = _decomp(ch, decomp, tol)
    k = dec.p_dim
    M = dec.p_vectors
    gamma = np.zeros((k, k, k), dtype=complex)
    resid = 0.0
    for a, b in itertools.product(range(k), repeat=2):
        z = dec.projector @ vec(dec.p_basis[a] @ dec.p_basis[b])
        c = np.linalg.lstsq(M, z, rcond=None)[0]
        gamma[a, b] = c
        resid = max(resid, float(np.linalg.norm(M @ c - z)))
    unit = np.linalg.lstsq(M, vec(np.eye(dec.dim)), rcond=None)[0]
    return BoundaryAlgebra(dec, gamma, unit, resid)


def structure_checksum(alg: BoundaryAlgebra) -> float:
    """Frobenius norm of the structure tensor in an HS-orthonormal basis.

    Unlike the raw constants this does not depend on the phases or the
    choice of eigenvectors, so it can be compared across runs and machines.
    """
    dec = alg.decomposition
    U = dec.p_space.vectors
    d = dec.dim
    mats = [unvec(U[:, j], d) for j in range(U.shape[1])]
    total = 0.0
    for A, B in itertools.product(mats, repeat=2):
        z = dagger(U) @ (dec.projector @ vec(A @ B))
        total += float(np.vdot(z, z).real)
    return float(np.sqrt(total))


@dataclass(frozen=True)
class CStarReport:
    associativity_gap: float
    involution_gap: float
    unit_gap: float
    cstar_identity_gap: float

    @property
    def max_gap(self) -> float:
        return max(self.associativity_gap, self.involution_gap, self.unit_gap, self.cstar_identity_gap)


MAX_BASIS_TRIPLES = 4096


def verify_cstar_axioms(alg: BoundaryAlgebra, sample_count: int = 8, seed: int = 0) -> CStarReport:
    """Largest violations of the C*-algebra axioms for ``(P(tau), o)``.

    Checks run over basis elements and ``sample_count`` random elements of
    the span.  Norms are operator norms of the matrices themselves.
    """
    rng = np.random.default_rng(seed)
    k = alg.dim
    elems = [np.eye(k, dtype=complex)[a] for a in range(k)]
    for _ in range(sample_count):
        x = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        X = alg.to_matrix(x)
        elems.append(x / max(hs_norm(X), 1e-300))

    def prod(x, y):
        return alg.product_coords(x, y)

    def star(x):
        return alg.coords(dagger(alg.to_matrix(x)))

    mats = [alg.to_matrix(x) for x in elems]
    stars = [star(x) for x in elems]
    unit = alg.unit_coords

    assoc = 0.0
    triples = list(itertools.product(range(len(elems)), repeat=3))
    if len(triples) > MAX_BASIS_TRIPLES:
        pick = rng.choice(len(triples), size=MAX_BASIS_TRIPLES, replace=False)
        triples = [triples[i] for i in sorted(pick)]
    for i, j, l in triples:
        left = prod(prod(elems[i], elems[j]), elems[l])
        right = prod(elems[i], prod(elems[j], elems[l]))
        assoc = max(assoc, hs_norm(alg.to_matrix(left - right)))

    invol = 0.0
    for i, j in itertools.product(range(len(elems)), repeat=2):
        lhs = dagger(alg.to_matrix(prod(elems[i], elems[j])))
        rhs = alg.to_matrix(prod(stars[j], stars[i]))
        invol = max(invol, hs_norm(lhs - rhs))

    unit_gap = 0.0
    cstar = 0.0
    for x, X, xs in zip(elems, mats, stars):
        unit_gap = max(unit_gap, hs_norm(alg.to_matrix(prod(unit, x)) - X),
                       hs_norm(alg.to_matrix(prod(x, unit)) - X))
        cstar = max(cstar, abs(operator_norm(alg.to_matrix(prod(xs, x))) - operator_norm(X) ** 2))
    return CStarReport(assoc, invol, unit_gap, cstar)


@dataclass(frozen=True)
class AutomorphismRestrictionReport:
    hom_gap: float
    adjoint_gap: float
    bijective: bool
    min_singular_value: float


def verify_restricted_automorphism(ch: Channel, decomp: Optional[PeripheralDecomposition] = None,
                                   tol: ToleranceConfig = DEFAULT_TOL) -> AutomorphismRestrictionReport:
    """Check that ``tau`` restricted to ``(P(tau), o)`` is a *-automorphism."""
    dec = _decomp(ch, decomp, tol)

    def circ(A, B):
        return dec.peripheral_part(A @ B)

    hom = 0.0
    adj = 0.0
    images = [ch.apply(B) for B in dec.p_basis]
    for B, tB in zip(dec.p_basis, images):
        adj = max(adj, hs_norm(ch.apply(dagger(B)) - dagger(tB)))
    for (A, tA), (B, tB) in itertools.product(zip(dec.p_basis, images), repeat=2):
        hom = max(hom, hs_norm(ch.apply(circ(A, B)) - circ(tA, tB)))
    U = dec.p_space.vectors
    if U.shape[1]:
        s = np.linalg.svd(dagger(U) @ ch.superop @ U, compute_uv=False)
        smin = float(s[-1])
        bij = smin > tol.rank_tol_factor * max(float(s[0]), 1.0)
    else:
        smin, bij = 0.0, False
    return AutomorphismRestrictionReport(hom, adj, bool(bij), smin)
