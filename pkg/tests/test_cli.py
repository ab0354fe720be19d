import json
import math

import pytest

from zonecontrol.cli import main
from zonecontrol.potential import PeriodicPotential, make_kronig_penney
from zonecontrol.propagator import monodromy


def read_json(path):
    return json.loads(path.read_text())


def test_bands_outputs(tmp_path):
    assert main(["bands", "--e-max", "12", "--grid", "1000", "--out", str(tmp_path)]) == 0
    data = read_json(tmp_path / "bands.json")
    assert data["config"]["command"] == "bands"
    assert data["result"]["gaps"][0][0] == pytest.approx(1.0, abs=1e-10)
    csv = (tmp_path / "discriminant.csv").read_text().splitlines()
    assert csv[0].startswith("# config: ")
    assert csv[1] == "E,discriminant,imK,in_band"


def test_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["smart", "--energy", "2.0", "--out", str(tmp_path / "same")]) == 0
        for f in ("smart.json", "knots.csv"):
            d.mkdir(exist_ok=True)
            (d / f).write_bytes((tmp_path / "same" / f).read_bytes())
    for f in ("smart.json", "knots.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_smart_knot_csv(tmp_path):
    assert main(["smart", "--energy", "2.0", "--periods", "5", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "knots.csv").read_text().splitlines()[2:]
    grow = [float(r.split(",")[2]) for r in rows if r.startswith("growing")]
    assert len(grow) == 5
    assert max(abs(b - a - math.pi) for a, b in zip(grow, grow[1:])) < 1e-10


def test_input_file_round_trip(tmp_path):
    p = make_kronig_penney(2.0, 0.5, 3.0)
    path = tmp_path / "p.json"
    path.write_text(p.to_json())
    assert main(["susy", "--input", str(path), "--shift", "0.4", "--e-max", "10",
                 "--grid", "400", "--out", str(tmp_path / "o")]) == 0
    q = PeriodicPotential.from_json((tmp_path / "o" / "potential.json").read_text())
    diag = read_json(tmp_path / "o" / "diagnostics.json")["result"]
    assert diag["auxiliary_start"].startswith("left-edge")
    assert float(monodromy(q, 3.0).half_trace) == pytest.approx(
        float(monodromy(PeriodicPotential.from_json(q.to_json()), 3.0).half_trace), abs=1e-10)


@pytest.mark.parametrize("argv", [
    ["eps-sweep", "--samples", "8"],
    ["beats", "--energy", "3.0", "--periods", "60"],
    ["swf", "--ratio", "2", "--comb", "0", "--strength", "4", "--e-max", "10", "--grid", "400"],
    ["delta-edge", "--placement", "mid-well", "--e-max", "10"],
    ["transmission", "--grid", "200"],
    ["channels", "--model", "2"],
    ["channels", "--model", "3"],
])
def test_commands_succeed(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == 0
    assert any(tmp_path.iterdir())


def test_channels_model1(tmp_path):
    p = make_kronig_penney(math.pi, 1.0, 2.0).to_dict()
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"eps1": 0, "eps2": 0, "v11": p, "v22": p, "coupling": 0.5}))
    assert main(["channels", "--model", "1", "--input", str(path), "--e-max", "8",
                 "--out", str(tmp_path)]) == 0
    assert set(read_json(tmp_path / "channels.json")["result"]) == {"plus", "minus"}


def test_validation_exit(tmp_path, capsys):
    assert main(["bands", "--e-min", "3", "--e-max", "3", "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ValidationError"
    assert main(["smart", "--energy", "3.0", "--out", str(tmp_path)]) == 2
    assert main(["bands", "--input", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_numerical_exit(tmp_path, capsys):
    # shifting level 2 below level 1 makes the Wronskian vanish
    assert main(["susy", "--comb", "0", "--level", "2", "--shift", "-3.5", "--out", str(tmp_path)]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "SingularTransformError"
