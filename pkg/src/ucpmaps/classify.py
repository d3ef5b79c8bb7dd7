"""Classification of UCP maps.

Peripheral automorphy is tested through five conditions that must agree;
stationarity through the invariant state of the dual map and, separately,
through the *-closure of the algebra the Kraus operators generate.  The
module also extracts multiplicative domains, irreducible block
decompositions and several derived checks.
"""

import itertools
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .boundary import ce_product
from .channel import Channel, adjoint, convex_combine
from .errors import DegenerateDraws, InternalInconsistency, NotAProjection, NotAState, NotStationary
from .numkernel import (
    DEFAULT_TOL,
    HSBasis,
    ToleranceConfig,
    cluster_eigenvalues,
    dagger,
    extend_basis,
    hs_norm,
    null_space,
    operator_norm,
    orthonormalize_hs,
    psd_gap,
    spectral_projector,
    subspace_contains,
    subspace_intersection,
    unvec,
    vec,
)
from .spectral import PeripheralDecomposition, eigenspace, peripheral_decomposition, spectrum

GAP_TOL = 1e-7


# -- multiplicative domains -------------------------------------------------

@dataclass(frozen=True)
class SubalgebraBasis:
    dim: int
    elements: HSBasis
    star_closed: bool

    def __len__(self):
        return len(self.elements)


def _star_closed(basis: HSBasis, tol: float = 1e-8) -> bool:
    return all(basis.residual(dagger(B)) <= tol for B in basis.elements)


def _defect_gram(Tk: np.ndarray, d: int) -> np.ndarray:
    """Gram matrix of ``(A, B) -> tr(tau(A^H B) - tau(A)^H tau(B))`` on matrix units.

    The form is positive semidefinite by the Kadison-Schwarz inequality, so
    ``{X : tau(X^H X) = tau(X)^H tau(X)}`` is exactly its null space.
    """
    W = unvec(dagger(Tk) @ vec(np.eye(d)), d)  # (tau^k)*(I)
    G = np.kron(W.T, np.eye(d)) - dagger(Tk) @ Tk
    return (G + dagger(G)) / 2


def _adjoint_vectors(V: np.ndarray, d: int) -> np.ndarray:
    return np.column_stack([vec(dagger(unvec(V[:, j], d))) for j in range(V.shape[1])]) if V.shape[1] else V


def _domain_of_superop(Tk, d, tol) -> np.ndarray:
    G = _defect_gram(Tk, d)
    # G vanishes identically for automorphisms, so a purely relative cutoff fails
    NL = null_space(G, tol, atol=tol.eq_tol * max(1.0, operator_norm(G)))
    return subspace_intersection(NL, _adjoint_vectors(NL, d), tol)


def multiplicative_domain(ch: Channel, k: int = 1, tol: ToleranceConfig = DEFAULT_TOL) -> SubalgebraBasis:
    """Basis of the multiplicative domain of ``tau^k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ch.require_unital()
    V = _domain_of_superop(np.linalg.matrix_power(ch.superop, k), ch.dim, tol)
    basis = HSBasis(ch.dim, V)
    return SubalgebraBasis(ch.dim, basis, _star_closed(basis))


@dataclass(frozen=True)
class StabilizedDomain:
    domain: SubalgebraBasis
    stabilized_at: int
    stabilized: bool
    dims: List[int]


def multiplicative_domain_inf(ch: Channel, k_max: Optional[int] = None,
                              tol: ToleranceConfig = DEFAULT_TOL) -> StabilizedDomain:
    """Intersect the domains of ``tau, tau^2, ...`` until the dimension settles.

    Stops once the dimension has not changed for ``d^2`` consecutive powers,
    or at ``k_max`` (default ``4 d^2``) with ``stabilized=False``.
    """
    ch.require_unital()
    d = ch.dim
    window = d * d
    k_max = 4 * d * d if k_max is None else k_max
    T = ch.superop
    Tk = np.eye(d * d, dtype=complex)
    current = None
    dims = []
    last_change = 1
    stabilized = False
    for k in range(1, k_max + 1):
        Tk = T @ Tk
        Mk = _domain_of_superop(Tk, d, tol)
        new = Mk if current is None else subspace_intersection(current, Mk, tol)
        if dims and new.shape[1] != dims[-1]:
            last_change = k
        current = new
        dims.append(new.shape[1])
        if k - last_change >= window:
            stabilized = True
            break
    basis = HSBasis(d, current)
    return StabilizedDomain(SubalgebraBasis(d, basis, _star_closed(basis)), last_change, stabilized, dims)


def kraus_algebra(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> SubalgebraBasis:
    """The (non-unital) algebra generated by the Kraus operators."""
    ch.require_unital()
    gens = list(ch.kraus)
    basis = orthonormalize_hs(gens, tol)
    while True:
        grown = extend_basis(basis, [L @ B for L in gens for B in basis.elements], tol)
        if len(grown) == len(basis):
            break
        basis = grown
    star = all(basis.residual(dagger(L)) <= 1e-8 * max(hs_norm(L), 1.0) for L in gens)
    return SubalgebraBasis(ch.dim, basis, star)


# -- peripheral automorphy --------------------------------------------------

@dataclass(frozen=True)
class Witness:
    """A pair of peripheral eigenvectors where the two products differ."""

    X: np.ndarray
    Y: np.ndarray
    ce_product: np.ndarray
    matrix_product: np.ndarray


@dataclass(frozen=True)
class PAReport:
    """Verdicts for the five equivalent characterisations.

    c1: ``P(tau)`` inside the multiplicative domain of ``tau``.
    c2: ``P(tau)`` inside the multiplicative domain of every power.
    c3: Choi-Effros product equals the matrix product.
    c4: ``tau(X^H Y) = X^H Y`` within every peripheral eigenspace.
    c5: ``X L_i = lam L_i X`` for every peripheral eigenvector.
    """

    verdicts: Tuple[bool, bool, bool, bool, bool]
    gaps: Tuple[float, float, float, float, float]
    agree: bool
    overall: bool
    witness: Optional[Witness] = None
    domain_stabilized: bool = True


def _c1_gap(ch, basis):
    gap = 0.0
    for B in basis:
        tB, tBs = ch.apply(B), ch.apply(dagger(B))
        gap = max(gap, hs_norm(ch.apply(dagger(B) @ B) - tBs @ tB), hs_norm(ch.apply(B @ dagger(B)) - tB @ tBs))
    return gap


def _c3_gap(ch, dec):
    pairs = list(itertools.product(dec.p_basis, repeat=2))
    gaps = [hs_norm(ce_product(ch, A, B, decomp=dec) - A @ B) for A, B in pairs]
    if not gaps:
        return 0.0, None
    gap = max(gaps)
    # first near-maximal pair, so rounding noise cannot change which pair is reported
    A, B = pairs[next(i for i, g in enumerate(gaps) if g >= gap - 1e-9)]
    return gap, Witness(A, B, ce_product(ch, A, B, decomp=dec), A @ B)


def _c4_gap(ch, dec):
    gap = 0.0
    for _, group in dec.eigenspaces():
        for A, B in itertools.product(group, repeat=2):
            Z = dagger(A) @ B
            gap = max(gap, hs_norm(ch.apply(Z) - Z))
    return gap


def _c5_gap(ch, dec):
    gap = 0.0
    for lam, B in zip(dec.eigenvalues, dec.p_basis):
        for L in ch.kraus:
            gap = max(gap, hs_norm(B @ L - lam * L @ B))
    return gap


def is_peripherally_automorphic(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL,
                                decomp: Optional[PeripheralDecomposition] = None,
                                k_max: Optional[int] = None, gap_tol: float = GAP_TOL) -> PAReport:
    ch.require_unital()
    dec = decomp if decomp is not None else peripheral_decomposition(ch, tol)
    g1 = _c1_gap(ch, dec.p_basis)
    inf = multiplicative_domain_inf(ch, k_max, tol)
    g2 = subspace_contains(inf.domain.elements.vectors, dec.p_vectors)
    g3, witness = _c3_gap(ch, dec)
    g4 = _c4_gap(ch, dec)
    g5 = _c5_gap(ch, dec)
    gaps = (g1, g2, g3, g4, g5)
    verdicts = tuple(bool(g <= gap_tol) for g in gaps)
    return PAReport(
        verdicts=verdicts,
        gaps=gaps,
        agree=len(set(verdicts)) == 1,
        overall=verdicts[4],
        witness=None if verdicts[2] else witness,
        domain_stabilized=inf.stabilized,
    )


def peripheral_closure_gap(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL,
                           decomp: Optional[PeripheralDecomposition] = None) -> float:
    """Largest HS distance from a product of peripheral basis elements to ``P(tau)``."""
    dec = decomp if decomp is not None else peripheral_decomposition(ch, tol)
    return max((dec.p_space.residual(A @ B) for A, B in itertools.product(dec.p_basis, repeat=2)), default=0.0)


# -- stationarity -----------------------------------------------------------

@dataclass(frozen=True)
class StateDensity:
    dim: int
    rho: np.ndarray


def make_state(rho, tol: ToleranceConfig = DEFAULT_TOL) -> StateDensity:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotAState("density must be a square matrix")
    if operator_norm(rho - dagger(rho)) > tol.eq_tol:
        raise NotAState("density is not Hermitian")
    if psd_gap(rho, tol) < -tol.eq_tol:
        raise NotAState("density is not positive semidefinite")
    if abs(np.trace(rho) - 1) > tol.eq_tol:
        raise NotAState("density does not have unit trace")
    return StateDensity(rho.shape[0], (rho + dagger(rho)) / 2)


@dataclass(frozen=True)
class InvariantStates:
    fixed_basis: List[np.ndarray]
    rho0: StateDensity
    faithful_gap: float


def _hermitian_basis(mats, tol):
    parts = []
    for Y in mats:
        parts.append((Y + dagger(Y)) / 2)
        parts.append((Y - dagger(Y)) / 2j)
    if not parts:
        return []
    return orthonormalize_hs(parts, tol).elements


def invariant_states(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> InvariantStates:
    """Fixed points of the dual map and the canonical invariant state.

    ``rho0`` is the eigenvalue-1 spectral projector of the dual applied to
    ``I/d``; it dominates every invariant state up to a factor, so it is
    faithful exactly when some invariant state is.
    """
    ch.require_unital()
    d = ch.dim
    Ts = dagger(ch.superop)
    N = null_space(Ts - np.eye(d * d), tol)
    fixed = _hermitian_basis([unvec(N[:, j], d) for j in range(N.shape[1])], tol)
    E = spectral_projector(
        Ts,
        select=lambda z: abs(z - 1) <= tol.peripheral_tol,
        ambiguous=lambda z: tol.peripheral_tol < abs(z - 1) <= tol.peripheral_tol + tol.cluster_tol,
        tol=tol,
    )
    rho = unvec(E @ vec(np.eye(d) / d), d)
    rho = (rho + dagger(rho)) / 2
    rho = rho / np.trace(rho).real
    gap = float(np.linalg.eigvalsh(rho)[0])
    return InvariantStates(fixed, StateDensity(d, rho), gap)


@dataclass(frozen=True)
class StationarityReport:
    star_closed: bool
    algebra_dim: int
    rho0: StateDensity
    faithful_gap: float
    rho0_rank: int
    stationary: bool
    witness: Optional[np.ndarray]


def is_stationary(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> StationarityReport:
    """Decide whether ``tau`` has a faithful invariant state.

    When it does not, the witness is the projection onto ``ker(rho0)``,
    which satisfies ``tau(P) <= P`` and ``tau(P) != P``.
    """
    inv = invariant_states(ch, tol)
    alg = kraus_algebra(ch, tol)
    w, V = np.linalg.eigh(inv.rho0.rho)
    kernel = V[:, w <= tol.eq_tol]
    rank = ch.dim - kernel.shape[1]
    stationary = inv.faithful_gap > tol.eq_tol and rank == ch.dim
    witness = None if stationary else kernel @ dagger(kernel)
    if stationary != alg.star_closed:
        raise InternalInconsistency(
            f"stationarity criteria disagree: faithful_gap={inv.faithful_gap:.3e}, "
            f"rank(rho0)={rank}, kraus algebra *-closed={alg.star_closed} (dim {len(alg)})"
        )
    return StationarityReport(alg.star_closed, len(alg), inv.rho0, inv.faithful_gap, rank, stationary, witness)


# -- irreducible blocks -----------------------------------------------------

@dataclass(frozen=True)
class BlockDecomposition:
    projections: List[np.ndarray]
    irreducible_flags: List[bool]


def _compressed_fixed(hbasis, Q, tol):
    mats = [Q @ H @ Q for H in hbasis]
    mats = [M for M in mats if hs_norm(M) > 1e-12]
    return orthonormalize_hs(mats, tol).elements if mats else []


def irreducible_blocks(ch: Channel, seed: int = 0, tol: ToleranceConfig = DEFAULT_TOL,
                       max_draws: int = 8) -> BlockDecomposition:
    """Split ``I`` into fixed projections on which ``tau`` is irreducible.

    Needs a stationary map, whose fixed points form a *-algebra.  Spectral
    projections of random Hermitian fixed points are fixed as well; blocks
    are split until each compressed fixed-point space is one-dimensional.
    """
    st = is_stationary(ch, tol)
    if not st.stationary:
        raise NotStationary("irreducible block decomposition needs a stationary map")
    d = ch.dim
    rng = np.random.default_rng(seed)
    hbasis = _hermitian_basis(eigenspace(ch, 1.0, tol), tol)

    def split(Q):
        sub = _compressed_fixed(hbasis, Q, tol)
        if len(sub) <= 1:
            return [Q]
        w, V = np.linalg.eigh(Q)
        R = V[:, w > 0.5]
        for _ in range(max_draws):
            H = sum(c * S for c, S in zip(rng.standard_normal(len(sub)), sub))
            hw, hv = np.linalg.eigh(dagger(R) @ H @ R)
            scale = max(np.abs(hw).max(), 1.0)
            groups = cluster_eigenvalues(hw, 1e-6 * scale)
            if len(groups) < 2:
                continue
            out = []
            for z, _ in groups:
                cols = R @ hv[:, np.abs(hw - z.real) <= 1e-6 * scale]
                out.extend(split(cols @ dagger(cols)))
            return out
        raise DegenerateDraws(f"{max_draws} random fixed points failed to split a block")

    blocks = split(np.eye(d, dtype=complex))
    flags = [len(_compressed_fixed(hbasis, Q, tol)) == 1 for Q in blocks]
    return BlockDecomposition(blocks, flags)


# -- state reduction and invariant subspaces --------------------------------

@dataclass(frozen=True)
class StateReducingReport:
    gap: float
    reducing: bool
    preserving: bool


def state_reducing_gap(ch: Channel, psi, tol: ToleranceConfig = DEFAULT_TOL) -> StateReducingReport:
    """Compare ``psi(tau(X)) <= psi(X)`` on positives with ``psi o tau = psi``.

    Both reduce to statements about ``sigma - tau*(sigma)`` for the density
    ``sigma`` of ``psi``: PSD for reducing, zero for preserving.
    """
    ch.require_unital()
    state = psi if isinstance(psi, StateDensity) else make_state(psi, tol)
    sigma = state.rho
    diff = sigma - adjoint(ch, tol).apply(sigma)
    gap = psd_gap(diff, tol)
    norm = operator_norm(diff)
    reducing = gap >= -tol.eq_tol
    preserving = norm <= tol.eq_tol
    # PSD and traceless forces zero; allow the tolerance to spread over d eigenvalues
    if reducing and norm > ch.dim * tol.eq_tol:
        raise InternalInconsistency(f"state reducing but not preserving (||diff|| = {norm:.3e})")
    return StateReducingReport(gap, reducing, preserving or reducing)


@dataclass(frozen=True)
class KribsReport:
    sub: bool
    super: bool
    range_invariant: bool
    corange_invariant: bool
    consistent: bool


def kribs_check(ch: Channel, P, tol: ToleranceConfig = DEFAULT_TOL) -> KribsReport:
    """Relate ``tau(P) <= P`` / ``P <= tau(P)`` to invariance of ``range(P)``."""
    P = np.asarray(P, dtype=complex)
    if operator_norm(P @ P - P) > tol.eq_tol or operator_norm(P - dagger(P)) > tol.eq_tol:
        raise NotAProjection("P must be an orthogonal projection")
    tP = ch.apply(P)
    sub = psd_gap(P - tP, tol) >= -tol.eq_tol
    sup = psd_gap(tP - P, tol) >= -tol.eq_tol
    Pc = np.eye(ch.dim) - P
    rng_inv = all(operator_norm(Pc @ L @ P) <= tol.eq_tol for L in ch.kraus)
    corng_inv = all(operator_norm(Pc @ dagger(L) @ P) <= tol.eq_tol for L in ch.kraus)
    consistent = (sup == rng_inv) and (sub == corng_inv)
    return KribsReport(sub, sup, rng_inv, corng_inv, consistent)


# -- automorphisms, convexity, GNS ------------------------------------------

@dataclass(frozen=True)
class AutomorphismReport:
    unimodular: bool
    multiplicative_gap: float
    bijective: bool
    is_automorphism: bool


def automorphism_check(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL, gap_tol: float = 1e-8) -> AutomorphismReport:
    d = ch.dim
    spec = spectrum(ch, tol)
    unimodular = spec.peripheral_dim == d * d
    T = ch.superop
    # img[i, j] = tau(E_ij); column index of E_ij under column stacking is i + j d
    img = np.array([[unvec(T[:, i + j * d], d) for j in range(d)] for i in range(d)])
    # tau(E_ij) tau(E_kl) must equal delta_jk tau(E_il)
    lhs = np.einsum("jk,ilab->ijklab", np.eye(d), img)
    rhs = np.einsum("ijab,klbc->ijklac", img, img)
    gap = float(np.max(np.abs(lhs - rhs)))
    s = np.linalg.svd(T, compute_uv=False)
    bijective = bool(s[-1] > tol.rank_tol_factor * s[0])
    return AutomorphismReport(unimodular, gap, bijective, bool(unimodular and gap <= gap_tol and bijective))


@dataclass(frozen=True)
class ConvexityReport:
    applicable: bool
    spectrum_contained: Optional[bool] = None
    space_contained: Optional[bool] = None
    action_agrees: Optional[bool] = None


def convexity_check(weights, channels, tol: ToleranceConfig = DEFAULT_TOL) -> ConvexityReport:
    """Check the consequences of peripheral automorphy for a convex combination.

    When the average is peripherally automorphic, its peripheral spectrum and
    space must sit inside those of every summand, on which all summands
    act identically.  Otherwise nothing is claimed.
    """
    avg = convex_combine(weights, channels, tol)
    dec = peripheral_decomposition(avg, tol)
    if not is_peripherally_automorphic(avg, tol, decomp=dec).overall:
        return ConvexityReport(applicable=False)
    spec_ok = space_ok = True
    action = 0.0
    for ch in channels:
        dj = peripheral_decomposition(ch, tol)
        vals = [z for z, _ in dj.spectral.peripheral]
        for z, _ in dec.spectral.peripheral:
            if not vals or min(abs(z - v) for v in vals) > tol.cluster_tol:
                spec_ok = False
        if subspace_contains(dj.p_space.vectors, dec.p_space.vectors) > GAP_TOL:
            space_ok = False
        for B in dec.p_basis:
            action = max(action, hs_norm(avg.apply(B) - ch.apply(B)))
    return ConvexityReport(True, spec_ok, space_ok, action <= GAP_TOL)


def gns_orthogonality_gap(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Largest ``|tr(rho0 X^H Y)|`` for ``X`` peripheral and ``Y`` transient."""
    st = is_stationary(ch, tol)
    if not st.stationary:
        raise NotStationary("the GNS inner product needs a faithful invariant state")
    dec = peripheral_decomposition(ch, tol)
    rho = st.rho0.rho
    gap = 0.0
    for X in dec.p_basis:
        for Y in dec.n_basis.elements:
            gap = max(gap, abs(np.trace(rho @ dagger(X) @ Y)))
    return float(gap)


def restriction_trace_gap(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Largest ``|tr tau(X) - tr X|`` over the peripheral basis.

    A restriction implemented by unitary conjugation would make this zero.
    """
    dec = peripheral_decomposition(ch, tol)
    return max((abs(np.trace(ch.apply(B)) - np.trace(B)) for B in dec.p_basis), default=0.0)
