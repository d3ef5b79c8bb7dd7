"""Completely positive maps on ``M_d`` in Kraus, Choi and superoperator form.

A channel acts as ``tau(X) = sum_i L_i^H X L_i``.  With column-stacking
``vec``, its superoperator is ``sum_i kron(L_i^T, L_i^H)`` and its Choi
matrix is ``sum_jk kron(E_jk, tau(E_jk))``.
"""

import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import BadParams, BadPartition, BadWeights, DimensionMismatch, NotUnital, UnknownFixture
from .numkernel import (
    DEFAULT_TOL,
    ToleranceConfig,
    as_cmatrix,
    dagger,
    numerical_rank,
    operator_norm,
    psd_gap,
    unvec,
    vec,
)


def _frozen(A):
    A = np.array(A, dtype=complex)
    A.setflags(write=False)
    return A


@dataclass(frozen=True, eq=False)
class Channel:
    """A CP map held as its Kraus list with eagerly built caches.

    Build instances with :func:`from_kraus` (or :func:`from_choi`); the
    constructor does no validation.  ``unital`` records whether
    ``sum_i L_i^H L_i = I`` held at construction, and analyses that assume
    a UCP map refuse channels where it is false.
    """

    dim: int
    kraus: tuple
    superop: np.ndarray = field(repr=False)
    choi: np.ndarray = field(repr=False)
    unital: bool = True
    name: Optional[str] = None

    @property
    def rank(self) -> int:
        return len(self.kraus)

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        if X.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"expected a {self.dim}x{self.dim} matrix, got {X.shape}")
        out = np.zeros_like(X)
        for L in self.kraus:
            out += dagger(L) @ X @ L
        return out

    def __call__(self, X):
        return self.apply(X)

    def power(self, n: int) -> np.ndarray:
        """Superoperator of the ``n``-fold composition."""
        return np.linalg.matrix_power(self.superop, n)

    def require_unital(self):
        if not self.unital:
            raise NotUnital(f"channel {self.name or ''} is not unital".replace("  ", " "))
        return self


def superop_from_kraus(kraus) -> np.ndarray:
    d = kraus[0].shape[0]
    T = np.zeros((d * d, d * d), dtype=complex)
    for L in kraus:
        T += np.kron(L.T, dagger(L))
    return T


def choi_from_superop(T: np.ndarray, d: int) -> np.ndarray:
    # C[j*d+a, k*d+b] = tau(E_jk)[a, b] = T[a + b*d, j + k*d]
    T4 = np.asarray(T).reshape(d, d, d, d)  # axes (b, a, k, j)
    return np.ascontiguousarray(T4.transpose(3, 1, 2, 0)).reshape(d * d, d * d)


def from_kraus(kraus, tol: ToleranceConfig = DEFAULT_TOL, name: Optional[str] = None) -> Channel:
    """Build a :class:`Channel` from a non-empty list of square matrices."""
    kraus = [as_cmatrix(L) for L in kraus]
    if not kraus:
        raise DimensionMismatch("Kraus list is empty")
    d = kraus[0].shape[0]
    for L in kraus:
        if L.shape != (d, d):
            raise DimensionMismatch(f"Kraus operators must all be {d}x{d}, got {L.shape}")
    T = superop_from_kraus(kraus)
    C = choi_from_superop(T, d)
    unit_gap = operator_norm(sum(dagger(L) @ L for L in kraus) - np.eye(d))
    return Channel(
        dim=d,
        kraus=tuple(_frozen(L) for L in kraus),
        superop=_frozen(T),
        choi=_frozen(C),
        unital=bool(unit_gap <= tol.eq_tol),
        name=name,
    )


def kraus_from_choi(choi, d: int, tol: ToleranceConfig = DEFAULT_TOL) -> List[np.ndarray]:
    """Minimal Kraus list from the Hermitian eigendecomposition of a Choi matrix."""
    C = as_cmatrix(choi)
    C = (C + dagger(C)) / 2
    w, V = np.linalg.eigh(C)
    cutoff = tol.rank_tol_factor * max(abs(w).max(), 1e-300)
    kraus = []
    for s, v in zip(w[::-1], V[:, ::-1].T):
        if s > cutoff:
            # column j*d+m of the Choi eigenvector is conj(L[j, m])
            kraus.append(np.sqrt(s) * np.conj(v).reshape(d, d))
    return kraus


def from_choi(choi, tol: ToleranceConfig = DEFAULT_TOL, name: Optional[str] = None) -> Channel:
    C = as_cmatrix(choi)
    n = C.shape[0]
    d = int(round(np.sqrt(n)))
    if d * d != n or C.shape[1] != n:
        raise DimensionMismatch(f"Choi matrix must be d^2 x d^2, got {C.shape}")
    kraus = kraus_from_choi(C, d, tol)
    if not kraus:
        kraus = [np.zeros((d, d), dtype=complex)]
    return from_kraus(kraus, tol, name=name)


@dataclass(frozen=True)
class ValidationReport:
    is_cp: bool
    choi_gap: float
    is_unital: bool
    unitality_gap: float
    is_trace_preserving: bool
    tp_gap: float
    is_faithful: bool
    joint_rank: int


def validate(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> ValidationReport:
    d = ch.dim
    choi_gap = psd_gap(ch.choi, tol)
    unit_gap = operator_norm(sum(dagger(L) @ L for L in ch.kraus) - np.eye(d))
    tp_gap = operator_norm(sum(L @ dagger(L) for L in ch.kraus) - np.eye(d))
    # tau(X^H X) = 0  iff  X L_i = 0 for all i  iff  X kills the joint column space
    joint = numerical_rank(np.hstack(ch.kraus), tol)
    return ValidationReport(
        is_cp=choi_gap >= -tol.eq_tol,
        choi_gap=choi_gap,
        is_unital=unit_gap <= tol.eq_tol,
        unitality_gap=unit_gap,
        is_trace_preserving=tp_gap <= tol.eq_tol,
        tp_gap=tp_gap,
        is_faithful=joint == d,
        joint_rank=joint,
    )


def adjoint(ch: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> Channel:
    """The trace dual ``tau*(X) = sum_i L_i X L_i^H``; may be non-unital."""
    name = f"{ch.name}*" if ch.name else None
    return from_kraus([dagger(L) for L in ch.kraus], tol, name=name)


def apply(ch: Channel, X) -> np.ndarray:
    return ch.apply(X)


def compose(outer: Channel, inner: Channel, tol: ToleranceConfig = DEFAULT_TOL) -> Channel:
    """The map ``X -> outer(inner(X))``.

    Kraus operators are ``L_i M_j`` for ``L`` from ``inner`` and ``M`` from
    ``outer``, with ``i`` the outer loop.
    """
    if outer.dim != inner.dim:
        raise DimensionMismatch("cannot compose channels of different dimension")
    kraus = [L @ M for L in inner.kraus for M in outer.kraus]
    return from_kraus(kraus, tol)


def convex_combine(weights, channels: Sequence[Channel], tol: ToleranceConfig = DEFAULT_TOL) -> Channel:
    weights = [float(p) for p in weights]
    if len(weights) != len(channels) or not channels:
        raise BadWeights("need one positive weight per channel")
    if any(p <= 0 for p in weights) or abs(sum(weights) - 1.0) > tol.eq_tol:
        raise BadWeights(f"weights must be positive and sum to 1, got {weights}")
    d = channels[0].dim
    if any(c.dim != d for c in channels):
        raise DimensionMismatch("cannot combine channels of different dimension")
    kraus = [np.sqrt(p) * L for p, c in zip(weights, channels) for L in c.kraus]
    return from_kraus(kraus, tol)


def block_projections(block_dims, d: Optional[int] = None) -> List[np.ndarray]:
    block_dims = [int(b) for b in block_dims]
    if not block_dims or any(b < 1 for b in block_dims):
        raise BadPartition(f"block sizes must be positive, got {block_dims}")
    total = sum(block_dims)
    if d is not None and total != d:
        raise BadPartition(f"block sizes {block_dims} do not partition {d}")
    projs = []
    start = 0
    for b in block_dims:
        P = np.zeros((total, total), dtype=complex)
        P[start:start + b, start:start + b] = np.eye(b)
        projs.append(P)
        start += b
    return projs


def pinch_compress(ch: Channel, block_dims, tol: ToleranceConfig = DEFAULT_TOL) -> Channel:
    """``X -> tau(sum_j P_j X P_j)`` for the coordinate block projections ``P_j``."""
    projs = block_projections(block_dims, ch.dim)
    kraus = [P @ L for L in ch.kraus for P in projs]
    return from_kraus(kraus, tol, name=f"{ch.name}~" if ch.name else None)


# -- fixtures ---------------------------------------------------------------

def diagonal_functional_channel(coeffs, tol: ToleranceConfig = DEFAULT_TOL, name=None) -> Channel:
    """The map ``X -> diag(sum_j c_ij x_jj)`` for a non-negative coefficient matrix.

    Each nonzero ``c_ij`` contributes the Kraus operator ``sqrt(c_ij) E_ji``.
    Rows summing to one make the map unital.
    """
    C = np.asarray(coeffs, dtype=float)
    d = C.shape[0]
    kraus = []
    for i in range(d):
        for j in range(d):
            if C[i, j] != 0:
                L = np.zeros((d, d), dtype=complex)
                L[j, i] = np.sqrt(C[i, j])
                kraus.append(L)
    return from_kraus(kraus, tol, name=name)


_DIAGONAL_FIXTURES = {
    "tau1_avg": [[1, 0, 0], [0, 1, 0], [1, 0, 0]],
    "tau2_avg": [[1, 0, 0], [0, 1, 0], [0, 1, 0]],
    "avg3": [[1, 0, 0], [0, 1, 0], [0.5, 0.5, 0]],
    "tau1_comp": [[1, 0, 0], [0, 1, 0], [0.5, 0, 0.5]],
    "tau2_comp": [[1, 0, 0], [0, 1, 0], [0, 0.5, 0.5]],
    "comp3": [[1, 0, 0], [0, 1, 0], [0.25, 0.5, 0.25]],
    "station3": [[0, 0, 1], [0, 0, 1], [0.5, 0.5, 0]],
    "faithful3": [[1, 0, 0], [0, 1, 0], [1 / 3, 1 / 3, 1 / 3]],
}

EXAMPLE_FIXTURES = (
    "shemesh2",
    "tau1_avg",
    "tau2_avg",
    "avg3",
    "tau1_comp",
    "tau2_comp",
    "comp3",
    "station3",
    "faithful3",
)

FIXTURE_NAMES = EXAMPLE_FIXTURES + ("identity", "unitary", "pinch_diag")


def _shemesh2():
    s = 1 / np.sqrt(2)
    return [
        np.array([[s, 0], [0, 0]], dtype=complex),
        np.array([[0, 0], [s, 0]], dtype=complex),
        np.array([[0, 0], [0, 1]], dtype=complex),
    ]


def fixtures(name: str, d: Optional[int] = None, U=None, tol: ToleranceConfig = DEFAULT_TOL) -> Channel:
    """Named example channels.

    ``name`` is one of :data:`FIXTURE_NAMES`.  ``identity`` and
    ``pinch_diag`` take ``d`` (also accepted inline as ``"identity(3)"``);
    ``unitary`` takes the matrix ``U`` and acts as ``X -> U^H X U``.
    """
    m = re.fullmatch(r"\s*(\w+)\s*\(\s*(\d+)\s*\)\s*", name)
    if m:
        name, d = m.group(1), int(m.group(2))
    if name == "shemesh2":
        return from_kraus(_shemesh2(), tol, name=name)
    if name in _DIAGONAL_FIXTURES:
        return diagonal_functional_channel(_DIAGONAL_FIXTURES[name], tol, name=name)
    if name == "identity":
        d = 2 if d is None else int(d)
        return from_kraus([np.eye(d)], tol, name=f"identity({d})")
    if name == "pinch_diag":
        d = 2 if d is None else int(d)
        kraus = []
        for i in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[i, i] = 1
            kraus.append(E)
        return from_kraus(kraus, tol, name=f"pinch_diag({d})")
    if name == "unitary":
        if U is None:
            raise BadParams("fixture 'unitary' needs a matrix U")
        U = as_cmatrix(U)
        if operator_norm(dagger(U) @ U - np.eye(U.shape[0])) > 1e3 * tol.eq_tol:
            raise BadParams("U is not unitary")
        return from_kraus([U], tol, name="unitary")
    raise UnknownFixture(f"unknown fixture {name!r}")


# -- random generators ------------------------------------------------------

RANDOM_KINDS = ("haar_stinespring", "unitary", "mixed_unitary", "pinching", "block_permutation")


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(d, random_state=rng) if d > 1 else np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))


def haar_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph[None, :]


def _divisor_blocks(d: int, n_blocks: Optional[int]) -> int:
    if n_blocks is None:
        n_blocks = next((k for k in range(2, d + 1) if d % k == 0), 1)
    if n_blocks < 1 or d % n_blocks:
        raise BadParams(f"block_permutation needs a block count dividing d={d}, got {n_blocks}")
    return n_blocks


def random_channel(kind: str, d: int, env_rank: Optional[int] = None, seed: int = 0,
                   tol: ToleranceConfig = DEFAULT_TOL) -> Channel:
    """Seeded random UCP channels.

    kind
        ``haar_stinespring``: Kraus blocks of a Haar isometry ``C^d -> C^(d r)``.
        ``unitary``: conjugation by a Haar unitary.
        ``mixed_unitary``: ``r`` Haar unitaries with Dirichlet weights.
        ``pinching``: block pinching in a Haar-random basis, ``r`` blocks.
        ``block_permutation``: conjugation by ``G (S kron W) G^H`` where ``S``
        cyclically permutes ``r`` equal blocks, ``W`` is a block unitary of
        finite order and ``G`` is Haar; the result is an automorphism whose
        spectrum consists of roots of unity.
    env_rank
        ``r`` above; defaults depend on the kind.
    """
    if d < 1:
        raise BadParams("d must be >= 1")
    if env_rank is not None and env_rank < 1:
        raise BadParams("env_rank must be >= 1")
    rng = np.random.default_rng(seed)
    label = f"{kind}(d={d},r={env_rank},seed={seed})"
    if kind == "haar_stinespring":
        r = 2 if env_rank is None else env_rank
        V = haar_isometry(d * r, d, rng)
        kraus = [V[i * d:(i + 1) * d, :] for i in range(r)]
    elif kind == "unitary":
        kraus = [haar_unitary(d, rng)]
    elif kind == "mixed_unitary":
        r = 2 if env_rank is None else env_rank
        p = rng.dirichlet(np.ones(r))
        kraus = [np.sqrt(pi) * haar_unitary(d, rng) for pi in p]
    elif kind == "pinching":
        r = min(2, d) if env_rank is None else env_rank
        if r > d:
            raise BadParams("pinching needs env_rank <= d")
        cuts = np.sort(rng.choice(np.arange(1, d), size=r - 1, replace=False)) if r > 1 else []
        sizes = np.diff(np.concatenate([[0], cuts, [d]])).astype(int)
        G = haar_unitary(d, rng)
        kraus = [G @ P @ dagger(G) for P in block_projections(sizes)]
    elif kind == "block_permutation":
        m = _divisor_blocks(d, env_rank)
        b = d // m
        S = np.roll(np.eye(m), 1, axis=0)
        order = int(rng.integers(1, 5))
        phases = np.exp(2j * np.pi * rng.integers(0, order, size=b) / order)
        V = haar_unitary(b, rng)
        W = V @ np.diag(phases) @ dagger(V)
        G = haar_unitary(d, rng)
        kraus = [G @ np.kron(S, W) @ dagger(G)]
    else:
        raise BadParams(f"unknown random channel kind {kind!r}")
    return from_kraus(kraus, tol, name=label)
