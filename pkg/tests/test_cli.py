import json

import numpy as np
import pytest

from minmetric.cli import main
from minmetric.serialize import (config_hash, disc_from_dict, disc_to_dict, domain_from_dict,
                                 domain_to_dict, dumps, load_domain)
from minmetric.core import Ball, HalfSpace, Polyhedral, Sublevel
from minmetric.discs import NullDisc
from minmetric.errors import InvalidDomain
from minmetric.expr import parse

SPECS = {
    "ball": {"kind": "ball", "center": [0, 0, 0], "radius": 1},
    "halfspace": {"kind": "halfspace", "normal": [1, 0, 0], "offset": 0},
    "slab": {"kind": "polyhedral", "halfspaces": [{"normal": [1, 0, 0], "offset": 0},
                                                   {"normal": [-1, 0, 0], "offset": -1}]},
    "cylinder": {"kind": "sublevel", "expr": "x1^2+x2^2-1",
                 "box": [[-1, 1], [-1, 1], [-10, 10]], "convex_hint": True},
}


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, spec in SPECS.items():
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(spec))
        out[name] = str(p)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out["bad"] = str(bad)
    return out


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    lines = [json.loads(s) for s in cap.out.splitlines() if s.strip()]
    return code, lines, cap


def test_domain_round_trip():
    for spec in SPECS.values():
        dom = domain_from_dict(spec)
        again = domain_from_dict(json.loads(json.dumps(domain_to_dict(dom))))
        assert domain_to_dict(again) == domain_to_dict(dom)
    assert isinstance(domain_from_dict(SPECS["ball"]), Ball)
    assert isinstance(domain_from_dict(SPECS["halfspace"]), HalfSpace)
    assert isinstance(domain_from_dict(SPECS["slab"]), Polyhedral)
    assert isinstance(domain_from_dict(SPECS["cylinder"]), Sublevel)


@pytest.mark.parametrize("spec", [
    {"kind": "torus"}, {"center": [0, 0, 0]}, {"kind": "ball", "center": [0, 0, 0]},
    {"kind": "ball", "center": [0, 0], "radius": 1}, [1, 2],
])
def test_invalid_specs(spec):
    with pytest.raises(InvalidDomain):
        domain_from_dict(spec)


def test_load_malformed(files):
    with pytest.raises(InvalidDomain, match="malformed"):
        load_domain(files["bad"])


def test_disc_round_trip():
    d = NullDisc(np.array([0.1, 0, 0]), [[1, 1j, 0], [0.2, 0, -0.3j]])
    e = disc_from_dict(json.loads(json.dumps(disc_to_dict(d))))
    np.testing.assert_array_equal(e.coeffs, d.coeffs)
    np.testing.assert_array_equal(e.center, d.center)


def test_dumps_is_canonical():
    assert dumps({"b": np.float64(1.5), "a": np.arange(2)}) == '{"a":[0,1],"b":1.5}'
    assert dumps({"e": parse("x1+1", 3), "inf": np.inf}) == '{"e":"x1+1","inf":"inf"}'
    assert config_hash({"a": 1}) == config_hash({"a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_metric_ball_exact(files, capsys):
    code, (rec,), _ = run(capsys, "metric", "--domain", files["ball"], "--point", "0.5,0,0",
                          "--dir", "1,0,0")
    assert code == 0
    assert rec["outputs"]["exact"] == pytest.approx(4 / 3, abs=1e-6)
    assert set(rec) == {"command", "config_hash", "config", "inputs", "outputs", "version"}


def test_metric_ball_plane(files, capsys):
    code, (rec,), _ = run(capsys, "metric", "--domain", files["ball"], "--point", "0.5,0,0",
                          "--plane", "1,0,0;0,1,0")
    assert code == 0
    assert rec["outputs"]["exact"] == pytest.approx(4 / 3)


def test_metric_halfspace_sandwich(files, capsys):
    code, (rec,), _ = run(capsys, "metric", "--domain", files["halfspace"], "--point", "1,0,0",
                          "--dir", "1,0,0", "--multistarts", "2")
    out = rec["outputs"]
    assert code == 0
    assert out["lower"] == 0.5
    assert out["lower"] <= out["upper"] <= 0.55
    assert out["gap"] == pytest.approx(out["upper"] - out["lower"])
    assert out["lower_certificate"]["kind"] == "halfspace"


def test_metric_errors(files, capsys):
    code, _, cap = run(capsys, "metric", "--domain", files["bad"], "--point", "0,0,0",
                       "--dir", "1,0,0")
    assert code == 2 and "malformed" in cap.err
    code, _, _ = run(capsys, "metric", "--domain", files["ball"], "--point", "2,0,0",
                     "--dir", "1,0,0")
    assert code == 3
    code, _, _ = run(capsys, "metric", "--domain", files["ball"], "--point", "0,0",
                     "--dir", "1,0,0")
    assert code == 2
    code, _, _ = run(capsys, "metric", "--domain", files["ball"], "--point", "0,0,0",
                     "--dir", "0,0,0")
    assert code == 2
    code, _, _ = run(capsys, "metric", "--domain", files["ball"], "--point", "a,b,c",
                     "--dir", "1,0,0")
    assert code == 2
    code, _, _ = run(capsys, "metric", "--domain", files["ball"], "--point", "0,0,0")
    assert code == 2


def test_distance_ball(files, capsys):
    code, (rec,), _ = run(capsys, "distance", "--domain", files["ball"], "--from", "0,0,0",
                          "--to", "0.5,0,0")
    out = rec["outputs"]
    assert code == 0
    assert out["chain_upper"] == pytest.approx(0.5493, rel=0.02)
    assert out["lower"] >= 0.538
    assert out["lower"] <= out["chain_upper"]
    assert len(out["chain"]["links"]) >= 1


def test_classify_slab(files, capsys):
    code, (rec,), _ = run(capsys, "classify", "--domain", files["slab"])
    assert code == 0
    assert rec["outputs"]["status"] == "NonHyperbolic"
    assert rec["outputs"]["certificate"]["plane"]["point"][0] == pytest.approx(0.5)


def test_classify_with_witness(tmp_path, capsys):
    p = tmp_path / "hyp.json"
    p.write_text(json.dumps({"kind": "sublevel", "expr": "x1^2+x2^2-0.5*x3^2-1",
                             "box": [[-4, 4], [-4, 4], [-5, 5]]}))
    code, (rec,), _ = run(capsys, "classify", "--domain", str(p),
                          "--witness", "x1^2+x2^2-0.5*x3^2-1", "--clip", "-1")
    assert code == 0 and rec["outputs"]["status"] == "Hyperbolic"
    code, _, _ = run(capsys, "classify", "--domain", str(p), "--witness", "x1^^2")
    assert code == 2


def test_deterministic_output(files, tmp_path, capsys):
    args = ["metric", "--domain", files["cylinder"], "--point", "0.2,0,1", "--dir", "0,1,0",
            "--multistarts", "2", "--seed", "5"]
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rec = json.loads(a.read_text())
    assert rec["outputs"]["lower"] <= rec["outputs"]["upper"]


def test_timing_and_append(files, tmp_path, capsys):
    out = tmp_path / "o.jsonl"
    for _ in range(2):
        main(["metric", "--domain", files["ball"], "--point", "0,0,0", "--dir", "0,1,0",
              "--output", str(out), "--timing"])
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert all("wall_time" in json.loads(s) for s in lines)


def test_verify_suite(capsys):
    code, lines, cap = run(capsys, "verify", "--suite", "1,6")
    assert code == 0
    assert [r["criterion"] for r in lines] == [1, 6]
    assert all(r["passed"] for r in lines)
    assert "PASS" in cap.err


def test_verify_unknown_suite(capsys):
    assert main(["verify", "--suite", "nope"]) == 2
    assert main(["verify", "--suite", "99"]) == 2
