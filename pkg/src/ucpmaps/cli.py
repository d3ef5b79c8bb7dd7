"""Batch command-line front end.

Reads a JSON request naming channels and analyses, runs them, and writes a
deterministic JSON report (or a short text summary).  Exit status is 0 when
every channel succeeded, 1 when some channel raised, 2 on usage or parse
errors.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from . import boundary, channel, classify, spectral
from .errors import BadParams, BoundaryAmbiguity, ParseError, UCPError, UnknownFixture
from .numkernel import DEFAULT_TOL, ToleranceConfig

COMMANDS = ("validate", "spectrum", "decompose", "boundary", "classify")
ALL = "all"
# values this small are rounding noise; zeroing them keeps reports stable across BLAS builds
NOISE_FLOOR = 1e-11


@dataclass(frozen=True)
class ChannelSpec:
    label: str
    channel: channel.Channel


@dataclass(frozen=True)
class AnalysisRequest:
    channels: List[ChannelSpec]
    commands: List[str]
    tolerances: ToleranceConfig
    seed: int


# -- parsing ----------------------------------------------------------------

def _complex_matrix(raw, what):
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise BadParams(f"{what}: entries must be [re, im] pairs of numbers") from exc
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise BadParams(f"{what}: expected a square matrix of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _check_dim(desc, M, expected, what):
    if expected is not None and M.shape[0] != int(expected):
        raise BadParams(f"{what}: size {M.shape[0]} does not match dim {desc['dim']}")


def resolve_channel(desc, tol: ToleranceConfig = DEFAULT_TOL, seed: int = 0) -> ChannelSpec:
    """Turn one channel descriptor into a :class:`~ucpmaps.channel.Channel`."""
    if not isinstance(desc, dict):
        raise BadParams("channel descriptor must be a JSON object")
    if "fixture" in desc:
        name = desc["fixture"]
        if not isinstance(name, str):
            raise BadParams("fixture name must be a string")
        U = _complex_matrix(desc["U"], "U") if "U" in desc else None
        ch = channel.fixtures(name, d=desc.get("d"), U=U, tol=tol)
        return ChannelSpec(ch.name or name, ch)
    if "random" in desc:
        params = desc["random"]
        if not isinstance(params, dict) or "kind" not in params or "d" not in params:
            raise BadParams("random descriptor needs at least 'kind' and 'd'")
        unknown = set(params) - {"kind", "d", "env_rank", "seed"}
        if unknown:
            raise BadParams(f"unknown random parameters: {sorted(unknown)}")
        s = int(params.get("seed", seed))
        ch = channel.random_channel(params["kind"], int(params["d"]), params.get("env_rank"), seed=s, tol=tol)
        return ChannelSpec(f"random:{params['kind']}(d={int(params['d'])},seed={s})", ch)
    if "kraus" in desc:
        ops = desc["kraus"]
        if not isinstance(ops, list) or not ops:
            raise BadParams("kraus must be a non-empty list of matrices")
        mats = [_complex_matrix(op, f"kraus[{i}]") for i, op in enumerate(ops)]
        for i, M in enumerate(mats):
            _check_dim(desc, M, desc.get("dim"), f"kraus[{i}]")
        return ChannelSpec(desc.get("name", "kraus"), channel.from_kraus(mats, tol, name=desc.get("name")))
    if "choi" in desc:
        C = _complex_matrix(desc["choi"], "choi")
        if "dim" in desc and C.shape[0] != int(desc["dim"]) ** 2:
            raise BadParams(f"choi: size {C.shape[0]} is not dim^2 for dim {desc['dim']}")
        return ChannelSpec(desc.get("name", "choi"), channel.from_choi(C, tol, name=desc.get("name")))
    raise BadParams("channel descriptor needs one of 'fixture', 'random', 'kraus', 'choi'")


def _tolerances(raw, base: ToleranceConfig) -> ToleranceConfig:
    if raw is None:
        return base
    if not isinstance(raw, dict):
        raise BadParams("tolerances must be an object")
    allowed = {"eq_tol", "rank_tol_factor", "peripheral_tol", "cluster_tol"}
    unknown = set(raw) - allowed
    if unknown:
        raise BadParams(f"unknown tolerance keys: {sorted(unknown)}")
    try:
        return replace(base, **{k: float(v) for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise BadParams(f"bad tolerances: {exc}") from exc


def _expand_commands(cmds) -> List[str]:
    if not isinstance(cmds, list) or not cmds:
        raise BadParams("at least one command is required")
    out = []
    for c in cmds:
        if c == ALL:
            out.extend(COMMANDS)
        elif c in COMMANDS:
            out.append(c)
        else:
            raise BadParams(f"unknown command {c!r}")
    return [c for c in COMMANDS if c in out]


def parse_request(text, commands: Optional[List[str]] = None, tol_eq: Optional[float] = None,
                  tol_peripheral: Optional[float] = None, seed: Optional[int] = None) -> AnalysisRequest:
    """Parse and resolve a JSON request.

    Keyword arguments override the corresponding request fields.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}", None, exc.start) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    if not isinstance(raw, dict):
        raise ParseError("request must be a JSON object", 1, 1)
    unknown = set(raw) - {"channels", "commands", "tolerances", "seed"}
    if unknown:
        raise BadParams(f"unknown request keys: {sorted(unknown)}")

    tol = _tolerances(raw.get("tolerances"), DEFAULT_TOL)
    overrides = {}
    if tol_eq is not None:
        overrides["eq_tol"] = tol_eq
    if tol_peripheral is not None:
        overrides["peripheral_tol"] = tol_peripheral
    tol = _tolerances(overrides, tol) if overrides else tol

    seed = int(raw.get("seed", 0)) if seed is None else int(seed)
    cmds = _expand_commands(commands if commands else raw.get("commands"))
    descs = raw.get("channels")
    if not isinstance(descs, list) or not descs:
        raise BadParams("at least one channel is required")
    specs = [resolve_channel(d, tol, seed) for d in descs]
    return AnalysisRequest(specs, cmds, tol, seed)


# -- running ----------------------------------------------------------------

def _validate(ch, tol, seed, warnings):
    r = channel.validate(ch, tol)
    return {
        "dim": ch.dim,
        "kraus_count": ch.rank,
        "is_cp": r.is_cp,
        "choi_gap": r.choi_gap,
        "is_unital": r.is_unital,
        "unitality_gap": r.unitality_gap,
        "is_trace_preserving": r.is_trace_preserving,
        "tp_gap": r.tp_gap,
        "is_faithful": r.is_faithful,
        "joint_rank": r.joint_rank,
    }


def _spectrum(ch, tol, seed, warnings):
    s = spectral.spectrum(ch, tol)
    if s.ambiguous:
        warnings.append({"type": "BoundaryAmbiguity",
                         "message": f"{len(s.ambiguous)} eigenvalue(s) within cluster_tol of the peripheral band"})
    return {
        "eigenvalues": [{"value": z, "multiplicity": m} for z, m in s.eigenvalues],
        "peripheral": [{"value": z, "multiplicity": m} for z, m in s.peripheral],
        "peripheral_dim": s.peripheral_dim,
        "transient_radius": s.transient_radius,
        "spectral_gap": s.spectral_gap,
    }


def _decompose(ch, tol, seed, warnings):
    dec = spectral.peripheral_decomposition(ch, tol)
    diag = spectral.check_peripheral_diagonalizable(ch, tol)
    out = {
        "p_dim": dec.p_dim,
        "n_dim": dec.n_dim,
        "eigen_residual": dec.eigen_residual,
        "jordan_trivial": diag.ok,
        "multiplicities": [{"value": z, "algebraic": a, "geometric": g} for z, a, g in diag.multiplicities],
    }
    if dec.n_dim:
        res = spectral.decay_verify(ch, dec.n_basis.elements[0], tolerances=tol)
        out["decay_probe"] = {"status": res.status, "first_n": res.first_n}
        if res.status == "inconclusive":
            warnings.append({"type": "InconclusiveDecay",
                             "message": "transient probe did not decay within the iteration cap"})
    return out


def _boundary(ch, tol, seed, warnings):
    dec = spectral.peripheral_decomposition(ch, tol)
    alg = boundary.boundary_algebra(ch, dec, tol)
    gaps = boundary.verify_cstar_axioms(alg, seed=seed)
    return {
        "algebra_dim": alg.dim,
        "structure_checksum": boundary.structure_checksum(alg),
        "closure_residual": alg.closure_residual,
        "cstar_gaps": {
            "associativity": gaps.associativity_gap,
            "involution": gaps.involution_gap,
            "unit": gaps.unit_gap,
            "cstar_identity": gaps.cstar_identity_gap,
        },
    }


def _classify(ch, tol, seed, warnings):
    pa = classify.is_peripherally_automorphic(ch, tol)
    if not pa.domain_stabilized:
        warnings.append({"type": "NotStabilized",
                         "message": "multiplicative domain of the powers did not stabilise"})
    pa_out = {
        "peripherally_automorphic": pa.overall,
        "agree": pa.agree,
        "conditions": [{"verdict": v, "gap": g} for v, g in zip(pa.verdicts, pa.gaps)],
    }
    if pa.witness is not None:
        w = pa.witness
        pa_out["witness"] = {"X": w.X, "Y": w.Y, "ce_product": w.ce_product, "matrix_product": w.matrix_product}
    st = classify.is_stationary(ch, tol)
    st_out = {
        "stationary": st.stationary,
        "kraus_algebra_dim": st.algebra_dim,
        "star_closed": st.star_closed,
        "rho0": st.rho0.rho,
        "rho0_rank": st.rho0_rank,
        "faithful_gap": st.faithful_gap,
    }
    if st.witness is not None:
        st_out["witness_projection"] = st.witness
    out = {"pa": pa_out, "stationarity": st_out}
    if st.stationary:
        blocks = classify.irreducible_blocks(ch, seed=seed, tol=tol)
        out["blocks"] = {
            "count": len(blocks.projections),
            "ranks": [int(round(np.trace(P).real)) for P in blocks.projections],
            "irreducible": len(blocks.projections) == 1,
        }
    auto = classify.automorphism_check(ch, tol)
    out["automorphism"] = {
        "is_automorphism": auto.is_automorphism,
        "unimodular": auto.unimodular,
        "multiplicative_gap": auto.multiplicative_gap,
    }
    return out


_RUNNERS = {
    "validate": _validate,
    "spectrum": _spectrum,
    "decompose": _decompose,
    "boundary": _boundary,
    "classify": _classify,
}


def run(request: AnalysisRequest) -> dict:
    """Run every command on every channel; errors are recorded per channel."""
    results = []
    for i, spec in enumerate(request.channels):
        entry = {"index": i, "name": spec.label}
        warnings = []
        errors = []
        for cmd in request.commands:
            try:
                entry[cmd] = _RUNNERS[cmd](spec.channel, request.tolerances, request.seed, warnings)
            except BoundaryAmbiguity as exc:
                entry[cmd] = None
                warnings.append({"type": "BoundaryAmbiguity", "message": str(exc)})
                errors.append({"command": cmd, "type": "BoundaryAmbiguity", "message": str(exc)})
            except UCPError as exc:
                entry[cmd] = None
                errors.append({"command": cmd, "type": type(exc).__name__, "message": str(exc)})
        entry["warnings"] = warnings
        entry["errors"] = errors
        results.append(entry)
    tol = request.tolerances
    return {
        "commands": list(request.commands),
        "seed": request.seed,
        "tolerances": {
            "eq_tol": tol.eq_tol,
            "rank_tol_factor": tol.rank_tol_factor,
            "peripheral_tol": tol.peripheral_tol,
            "cluster_tol": tol.cluster_tol,
        },
        "channels": results,
    }


def has_errors(report: dict) -> bool:
    return any(c["errors"] for c in report["channels"])


# -- output -----------------------------------------------------------------

def _fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if abs(x) < NOISE_FLOOR:
        x = 0.0
    s = "%.12e" % x
    return s[1:] if s.startswith("-") and float(s) == 0 else s


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return f"[{_fmt_float(obj.real)}, {_fmt_float(obj.imag)}]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [_encode(v, indent, level + 1) for v in obj]
        if all("\n" not in p for p in parts) and sum(len(p) for p in parts) < 100:
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def to_json(report: dict) -> str:
    return _encode(report, 2, 0) + "\n"


def _c(z) -> str:
    z = complex(z)
    re_, im = (0.0 if abs(v) < NOISE_FLOOR else v for v in (z.real, z.imag))
    return f"{re_:.6g}" if im == 0 else f"{re_:.6g}{im:+.6g}i"


def to_text(report: dict) -> str:
    lines = []
    for ch in report["channels"]:
        lines.append(f"[{ch['index']}] {ch['name']}")
        v = ch.get("validate")
        if v:
            lines.append(f"  dim {v['dim']}  kraus {v['kraus_count']}  cp {v['is_cp']}  unital {v['is_unital']}"
                         f"  tp {v['is_trace_preserving']}  faithful {v['is_faithful']}")
        s = ch.get("spectrum")
        if s:
            per = ", ".join(f"{_c(p['value'])}^{p['multiplicity']}" if p["multiplicity"] > 1 else _c(p["value"])
                            for p in s["peripheral"])
            lines.append(f"  peripheral {{{per}}}  dim {s['peripheral_dim']}  gap {s['spectral_gap']:.4g}")
        dcp = ch.get("decompose")
        if dcp:
            lines.append(f"  dim P {dcp['p_dim']}  dim N {dcp['n_dim']}  jordan-trivial {dcp['jordan_trivial']}")
        b = ch.get("boundary")
        if b:
            worst = max(b["cstar_gaps"].values())
            lines.append(f"  boundary algebra dim {b['algebra_dim']}  checksum {b['structure_checksum']:.6f}"
                         f"  max C* gap {worst:.1e}")
        c = ch.get("classify")
        if c:
            pa, st = c["pa"], c["stationarity"]
            verdicts = "".join("Y" if x["verdict"] else "n" for x in pa["conditions"])
            lines.append(f"  PA {pa['peripherally_automorphic']} ({verdicts})  stationary {st['stationary']}"
                         f"  kraus algebra dim {st['kraus_algebra_dim']} star-closed {st['star_closed']}")
            if "blocks" in c:
                lines.append(f"  blocks {c['blocks']['ranks']}  irreducible {c['blocks']['irreducible']}")
            lines.append(f"  automorphism {c['automorphism']['is_automorphism']}")
        for w in ch["warnings"]:
            lines.append(f"  warning {w['type']}: {w['message']}")
        for e in ch["errors"]:
            lines.append(f"  error in {e['command']} {e['type']}: {e['message']}")
    return "\n".join(lines) + "\n"


def emit(report: dict, fmt: str = "json") -> bytes:
    if fmt == "json":
        return to_json(report).encode("utf-8")
    if fmt == "text":
        return to_text(report).encode("utf-8")
    raise BadParams(f"unknown format {fmt!r}")


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ucpmaps", description="Analyse unital completely positive maps.")
    p.add_argument("--input", metavar="FILE", help="JSON request (default: stdin)")
    p.add_argument("--command", action="append", choices=COMMANDS + (ALL,),
                   help="analysis to run; repeatable; overrides the request's list")
    p.add_argument("--tol-eq", type=float, help="equality tolerance")
    p.add_argument("--tol-peripheral", type=float, help="peripheral band half-width")
    p.add_argument("--seed", type=int, help="seed for randomised checks")
    p.add_argument("--format", choices=("json", "text"), default="json")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.input:
            with open(args.input, "rb") as fh:
                text = fh.read()
        else:
            text = sys.stdin.buffer.read()
        request = parse_request(text, commands=args.command, tol_eq=args.tol_eq,
                                tol_peripheral=args.tol_peripheral, seed=args.seed)
    except ParseError as exc:
        where = f" (line {exc.line}, column {exc.offset})" if exc.line is not None else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return 2
    except (BadParams, UnknownFixture, UCPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run(request)
    sys.stdout.buffer.write(emit(report, args.format))
    sys.stdout.flush()
    return 1 if has_errors(report) else 0
