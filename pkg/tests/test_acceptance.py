"""Acceptance suite: one PASS/FAIL line per criterion.

Lines are printed as the tests run (visible with ``-s``) and repeated in the
terminal summary.  Running this file directly prints them without pytest.
"""

import itertools
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from ucpmaps.boundary import boundary_algebra, ce_product, ce_product_iterative, verify_cstar_axioms
from ucpmaps.channel import (
    EXAMPLE_FIXTURES,
    RANDOM_KINDS,
    adjoint,
    compose,
    fixtures,
    from_kraus,
    haar_isometry,
    haar_unitary,
    pinch_compress,
    random_channel,
)
from ucpmaps.classify import (
    automorphism_check,
    gns_orthogonality_gap,
    is_peripherally_automorphic,
    is_stationary,
    kraus_algebra,
)
from ucpmaps.numkernel import operator_norm
from ucpmaps.spectral import (
    check_peripheral_diagonalizable,
    eigenspace,
    peripheral_decomposition,
    peripheral_projector,
    power_space_equality,
    restricted_peripheral_space,
    same_subspace,
    spectrum,
)

GOLDEN = Path(__file__).parent / "golden"
RESULTS = {}


def record(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def diag(*xs):
    return np.diag(np.asarray(xs, dtype=complex))


def random_population(per_kind=50, kinds=RANDOM_KINDS):
    """``per_kind`` seeded channels of every kind, cycling d over 2, 3, 4."""
    for kind in kinds:
        for seed in range(per_kind):
            yield random_channel(kind, 2 + seed % 3, seed=seed)


def narrow_gap_channel(gap, d=3):
    """``X -> (1 - gap) X + gap tr(X) I / d``; transient eigenvalue ``1 - gap``."""
    units = []
    for i, j in itertools.product(range(d), repeat=2):
        E = np.zeros((d, d), dtype=complex)
        E[i, j] = np.sqrt(gap / d)
        units.append(E)
    return from_kraus([np.sqrt(1 - gap) * np.eye(d)] + units, name=f"narrow({gap})")


def block_structured_channel(seed):
    """Random UCP map leaving a coordinate block-diagonal algebra invariant.

    Each block gets either a Haar unitary or a rank-2 Haar Stinespring map;
    equal-sized blocks are then shuffled by a permutation unitary, which
    gives a nontrivial peripheral spectrum.
    """
    rng = np.random.default_rng(1000 + seed)
    dims = [[1, 1], [2, 1], [2, 2], [1, 2, 1], [2, 2, 1], [1, 1, 1]][seed % 6]
    d = sum(dims)
    offsets = np.cumsum([0] + dims[:-1])
    kraus = [np.zeros((d, d), dtype=complex) for _ in range(2)]
    for b, o in zip(dims, offsets):
        if rng.random() < 0.5:
            kraus[0][o:o + b, o:o + b] = haar_unitary(b, rng)
        else:
            V = haar_isometry(2 * b, b, rng)
            kraus[0][o:o + b, o:o + b] = V[:b]
            kraus[1][o:o + b, o:o + b] = V[b:]
    inner = from_kraus([K for K in kraus if np.any(K)])
    # permute blocks of equal size
    order = list(range(len(dims)))
    for size in set(dims):
        idx = [i for i, b in enumerate(dims) if b == size]
        shuffled = list(rng.permutation(idx))
        for i, j in zip(idx, shuffled):
            order[i] = j
    W = np.zeros((d, d), dtype=complex)
    for i, j in enumerate(order):
        W[offsets[j]:offsets[j] + dims[j], offsets[i]:offsets[i] + dims[i]] = np.eye(dims[i])
    return compose(from_kraus([W]), inner), dims


def test_c01_fixture_arithmetic():
    cases = [
        ("avg3", diag(1, 9, 4), diag(1, 9, 5)),
        ("comp3", diag(9, 0, 1), diag(9, 0, 5 / 2)),
        ("faithful3", diag(0, 4, 1), diag(0, 4, 5 / 3)),
    ]
    err = max(np.abs(fixtures(n).apply(X) - Y).max() for n, X, Y in cases)
    assert record(1, err <= 1e-12, f"max entry error {err:.1e} (tol 1e-12)")


def test_c02_shemesh_counterexample():
    ch = fixtures("shemesh2")
    e1 = len(eigenspace(ch, 1))
    p = peripheral_decomposition(ch).p_dim
    st = is_stationary(ch).stationary
    alg = kraus_algebra(ch)
    rng = np.random.default_rng(0)
    adj = adjoint(ch)
    adj_err = 0.0
    for _ in range(10):
        X = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        expected = diag(X[0, 0] / 2, X[1, 1] + X[0, 0] / 2)
        adj_err = max(adj_err, np.abs(adj.apply(X) - expected).max())
    ok = e1 == 1 and p == 1 and not st and len(alg) == 3 and not alg.star_closed and adj_err <= 1e-12
    assert record(2, ok, f"dim E1 {e1}, dim P {p}, stationary {st}, kraus algebra dim {len(alg)} "
                         f"star-closed {alg.star_closed}, adjoint error {adj_err:.1e}")


def test_c03_five_condition_equivalence():
    population = [fixtures(n) for n in EXAMPLE_FIXTURES] + list(random_population())
    bad = [ch.name for ch in population if not is_peripherally_automorphic(ch).agree]
    assert record(3, not bad, f"{len(bad)} disagreements over {len(population)} channels"
                              + (f" ({bad[:3]})" if bad else ""))


def test_c04_stationary_implies_pa():
    chans = [random_channel("mixed_unitary", 2 + s % 3, seed=100 + s) for s in range(100)]
    fails = [ch.name for ch in chans if not is_peripherally_automorphic(ch).overall]
    assert record(4, not fails, f"{100 - len(fails)}/100 mixed_unitary channels peripherally automorphic")


def test_c05_stationarity_agreement():
    population = [fixtures(n) for n in EXAMPLE_FIXTURES] + list(random_population(per_kind=40))
    bad = []
    for ch in population:
        rep = is_stationary(ch)  # raises on a star_closed / rho0 mismatch
        full_rank = rep.rho0_rank == ch.dim
        zero_witness = rep.witness is None or operator_norm(rep.witness) == 0
        if not (rep.star_closed == full_rank == zero_witness == rep.stationary):
            bad.append(ch.name)
    rho = is_stationary(fixtures("station3")).rho0.rho
    rho_err = np.abs(rho - diag(0.25, 0.25, 0.5)).max()
    ok = not bad and rho_err <= 1e-10
    assert record(5, ok, f"{len(bad)} disagreements over {len(population)} channels; "
                         f"station3 rho0 error {rho_err:.1e}")


def test_c06_decomposition():
    population = [fixtures(n) for n in EXAMPLE_FIXTURES] + list(random_population(per_kind=10))
    dim_bad, power_bad, jordan_bad = [], [], []
    for ch in population:
        dec = peripheral_decomposition(ch)
        if dec.p_dim + dec.n_dim != ch.dim ** 2:
            dim_bad.append(ch.name)
        for m in (2, 3):
            rep = power_space_equality(ch, m)
            if not (rep.p_equal and rep.n_equal):
                power_bad.append((ch.name, m))
        if not check_peripheral_diagonalizable(ch).ok:
            jordan_bad.append(ch.name)
    ok = not (dim_bad or power_bad or jordan_bad)
    assert record(6, ok, f"{len(population)} channels: dim failures {len(dim_bad)}, "
                         f"power-space failures {len(power_bad)}, Jordan failures {len(jordan_bad)}")


def test_c07_projector_cross_validation():
    population = [fixtures(n) for n in EXAMPLE_FIXTURES] + list(random_population(per_kind=10))
    population += [narrow_gap_channel(g) for g in (0.051, 0.08, 0.1, 0.15, 0.2, 0.5)]
    checked, fails, worst = 0, [], 0.0
    for ch in population:
        if spectrum(ch).spectral_gap < 0.05:
            continue
        checked += 1
        diff = np.abs(peripheral_projector(ch, "schur") - peripheral_projector(ch, "contour", nodes=256)).max()
        worst = max(worst, diff)
        if diff > 1e-8:
            fails.append(f"{ch.name}: {diff:.1e}")
    assert record(7, not fails, f"{checked} channels with gap >= 0.05, worst difference {worst:.1e}"
                                + (f"; over 1e-8: {fails}" if fails else ""))


def test_c08_choi_effros_cross_validation():
    worst_rel, worst_axiom = 0.0, 0.0
    for name in EXAMPLE_FIXTURES:
        ch = fixtures(name)
        dec = peripheral_decomposition(ch)
        for X, Y in itertools.product(dec.p_basis, repeat=2):
            exact = ce_product(ch, X, Y, decomp=dec)
            est = ce_product_iterative(ch, X, Y, delta=1e-3).estimate
            scale = operator_norm(X) * operator_norm(Y)
            worst_rel = max(worst_rel, operator_norm(exact - est) / scale)
        worst_axiom = max(worst_axiom, verify_cstar_axioms(boundary_algebra(ch, dec)).max_gap)
    ok = worst_rel <= 1e-2 and worst_axiom <= 1e-7
    assert record(8, ok, f"worst |spectral - iterative| / (|X||Y|) {worst_rel:.1e} (tol 1e-2), "
                         f"worst C* gap {worst_axiom:.1e} (tol 1e-7)")


def test_c09_unimodular_implies_automorphism():
    chans = [random_channel(k, 2 + s % 3, seed=s) for k in ("unitary", "block_permutation") for s in range(50)]
    reps = [automorphism_check(ch) for ch in chans]
    n_auto = sum(r.is_automorphism for r in reps)
    gap = max(r.multiplicative_gap for r in reps)
    sh = automorphism_check(fixtures("shemesh2")).is_automorphism
    ok = n_auto == len(chans) and gap <= 1e-8 and not sh
    assert record(9, ok, f"{n_auto}/{len(chans)} automorphisms, max multiplicativity gap {gap:.1e}, "
                         f"shemesh2 automorphism {sh}")


def test_c10_gns_orthogonality():
    chans = [fixtures("station3")] + [random_channel("mixed_unitary", 2 + s % 3, seed=200 + s) for s in range(50)]
    worst = max(gns_orthogonality_gap(ch) for ch in chans)
    assert record(10, worst <= 1e-7, f"worst gap {worst:.1e} over {len(chans)} channels (tol 1e-7)")


def test_c11_pinching_remark():
    worst, fails = 0.0, 0
    for seed in range(20):
        ch, dims = block_structured_channel(seed)
        restricted = restricted_peripheral_space(ch, dims)
        pinched = peripheral_decomposition(pinch_compress(ch, dims)).p_space
        same = same_subspace(restricted.vectors, pinched.vectors, 1e-7)
        if same:
            U, V = restricted.vectors, pinched.vectors
            worst = max(worst, np.linalg.norm(V - U @ (U.conj().T @ V), axis=0).max(),
                        np.linalg.norm(U - V @ (V.conj().T @ U), axis=0).max())
        else:
            fails += 1
    assert record(11, fails == 0, f"{20 - fails}/20 block-structured channels match, "
                                  f"worst containment residual {worst:.1e}")


def test_c12_non_unitary_restriction():
    ch = fixtures("station3")
    X = diag(1, 1, 0)
    Y = ch.apply(X)
    dec = peripheral_decomposition(ch)
    in_p = dec.p_space.residual(X) < 1e-10
    err = np.abs(Y - diag(0, 0, 1)).max()
    tr_in, tr_out = np.trace(X).real, np.trace(Y).real
    ok = in_p and err <= 1e-12 and abs(tr_in - 2) < 1e-12 and abs(tr_out - 1) < 1e-12
    assert record(12, ok, f"diag(1,1,0) in P {in_p}, maps to diag(0,0,1) within {err:.1e}, "
                          f"trace {tr_in:g} -> {tr_out:g}")


def test_c13_cli_determinism():
    cmd = [sys.executable, "-m", "ucpmaps", "--input", str(GOLDEN / "fixtures_request.json")]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    golden = (GOLDEN / "fixtures_report.json").read_bytes()
    n = len(json.loads(first)["channels"])
    ok = first == second == golden
    assert record(13, ok, f"{n} fixture reports; repeat identical {first == second}, golden identical {first == golden}")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except AssertionError:
                pass
