import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ucpmaps.cli import emit, main, parse_request, run, to_json
from ucpmaps.errors import BadParams, ParseError, UnknownFixture

GOLDEN = Path(__file__).parent / "golden"


def _report(text, **kw):
    return json.loads(emit(run(parse_request(text, **kw))))


def test_parse_fixture_request():
    req = parse_request('{"channels":[{"fixture":"station3"}],"commands":["classify"]}')
    assert len(req.channels) == 1 and req.commands == ["classify"]


def test_all_expands_in_fixed_order():
    req = parse_request('{"channels":[{"fixture":"avg3"}],"commands":["classify","all"]}')
    assert req.commands == ["validate", "spectrum", "decompose", "boundary", "classify"]


def test_malformed_json_has_position():
    with pytest.raises(ParseError) as info:
        parse_request('{"channels": [\n  {"fixture": }]}')
    assert info.value.line == 2 and info.value.offset is not None


def test_request_errors():
    with pytest.raises(UnknownFixture):
        parse_request('{"channels":[{"fixture":"nope"}],"commands":["validate"]}')
    with pytest.raises(BadParams):
        parse_request('{"channels":[],"commands":["validate"]}')
    with pytest.raises(BadParams):
        parse_request('{"channels":[{"fixture":"avg3"}],"commands":[]}')
    with pytest.raises(BadParams):
        parse_request('{"channels":[{"fixture":"avg3"}],"commands":["plot"]}')
    with pytest.raises(BadParams):
        parse_request('{"channels":[{"dim":3,"kraus":[[[[1,0],[0,0]],[[0,0],[1,0]]]]}],"commands":["validate"]}')


def test_kraus_descriptor_non_unital():
    text = '{"channels":[{"dim":2,"kraus":[[[[1,0],[0,0]],[[0,0],[0,0]]]]}],"commands":["validate"]}'
    rep = _report(text)
    assert rep["channels"][0]["validate"]["is_unital"] is False
    assert rep["channels"][0]["errors"] == []


def test_choi_descriptor_roundtrip():
    from ucpmaps.channel import fixtures
    C = fixtures("shemesh2").choi
    entries = [[[float(z.real), float(z.imag)] for z in row] for row in C]
    text = json.dumps({"channels": [{"dim": 2, "choi": entries}], "commands": ["spectrum"]})
    rep = _report(text)
    assert rep["channels"][0]["spectrum"]["peripheral_dim"] == 1


def test_random_descriptor_uses_given_seed():
    text = '{"channels":[{"random":{"kind":"mixed_unitary","d":3,"env_rank":2,"seed":4}}],"commands":["classify"]}'
    rep = _report(text)
    assert rep["channels"][0]["classify"]["stationarity"]["stationary"] is True
    assert rep["channels"][0]["classify"]["pa"]["peripherally_automorphic"] is True


def test_station3_all():
    rep = _report('{"channels":[{"fixture":"station3"}],"commands":["all"]}')["channels"][0]
    per = sorted(p["value"][0] for p in rep["spectrum"]["peripheral"])
    assert per == [-1.0, 1.0]
    cls = rep["classify"]
    assert cls["stationarity"]["stationary"] and cls["pa"]["peripherally_automorphic"]
    assert cls["blocks"]["irreducible"]


def test_avg3_witness_in_report():
    cls = _report('{"channels":[{"fixture":"avg3"}],"commands":["classify"]}')["channels"][0]["classify"]
    assert cls["pa"]["peripherally_automorphic"] is False
    w = cls["pa"]["witness"]
    ce = np.array(w["ce_product"])[..., 0]
    mp = np.array(w["matrix_product"])[..., 0]
    assert np.abs(ce - mp).max() > 1e-3


def test_shemesh_classify():
    cls = _report('{"channels":[{"fixture":"shemesh2"}],"commands":["classify"]}')["channels"][0]["classify"]
    assert cls["stationarity"]["stationary"] is False
    assert cls["stationarity"]["star_closed"] is False
    assert cls["pa"]["peripherally_automorphic"] is True


def test_float_formatting_is_fixed():
    out = to_json({"a": -0.0, "b": 1e-15, "c": 0.1, "d": complex(1, -2)})
    assert '"a": 0.000000000000e+00' in out
    assert '"b": 0.000000000000e+00' in out
    assert '"c": 1.000000000000e-01' in out
    assert '"d": [1.000000000000e+00, -2.000000000000e+00]' in out


def test_text_format():
    text = emit(run(parse_request('{"channels":[{"fixture":"station3"}],"commands":["all"]}')), "text").decode()
    assert "station3" in text and "PA True" in text


def test_exit_codes(tmp_path, capsysbinary):
    good = tmp_path / "good.json"
    good.write_text('{"channels":[{"fixture":"avg3"}],"commands":["spectrum"]}')
    assert main(["--input", str(good)]) == 0
    bad_channel = tmp_path / "bad.json"
    bad_channel.write_text('{"channels":[{"dim":2,"kraus":[[[[1,0],[0,0]],[[0,0],[0,0]]]]}],"commands":["spectrum"]}')
    assert main(["--input", str(bad_channel)]) == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["--input", str(broken)]) == 2


def test_flags_override_request(tmp_path, capsysbinary):
    f = tmp_path / "req.json"
    f.write_text('{"channels":[{"fixture":"avg3"}],"commands":["spectrum"]}')
    assert main(["--input", str(f), "--command", "validate", "--tol-eq", "1e-8", "--seed", "3"]) == 0
    out = json.loads(capsysbinary.readouterr().out)
    assert out["commands"] == ["validate"]
    assert out["seed"] == 3
    assert out["tolerances"]["eq_tol"] == pytest.approx(1e-8)


def test_golden_fixture_report_via_subprocess():
    cmd = [sys.executable, "-m", "ucpmaps", "--input", str(GOLDEN / "fixtures_request.json")]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second
    assert first == (GOLDEN / "fixtures_report.json").read_bytes()
