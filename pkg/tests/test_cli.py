import csv
import json
from fractions import Fraction as F

import pytest

from flipflop import cli


def construct(tmp_path, name, *flags):
    out = tmp_path / name
    code = cli.main(["construct", *flags, "--out", str(out)])
    return code, out


@pytest.fixture(scope="module")
def golden(tmp_path_factory):
    code, out = construct(tmp_path_factory.mktemp("golden"), "run", "--kmax", "2")
    assert code == 0
    return out


def test_golden_layout(golden):
    assert {p.name for p in golden.iterdir()} == {"orbit.json", "prefix.csv", "report.json", "schedules"}
    orbit = json.loads((golden / "orbit.json").read_text())
    assert orbit["schema_version"] == 1 and orbit["T"] == 205
    with open(golden / "prefix.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "phi_n_lo", "phi_n_hi", "avg_lo", "avg_hi", "scale_marks"]
    assert [int(r[0]) for r in rows[1:]] == list(range(1, 206))
    # the end of the segment is a control time at both scales
    assert rows[-1][5] == "1;2"
    report = json.loads((golden / "report.json").read_text())
    assert report["certified"]


def test_labels_round_trip(golden):
    orbit = json.loads((golden / "orbit.json").read_text())
    labels = cli._decode_labels(orbit["labels"])
    assert cli._decode_labels(cli._encode_labels(labels)).tolist() == labels.tolist()
    assert cli._decode_labels(cli._encode_labels([12, 3])).tolist() == [12, 3]


def test_verify_accepts_and_writes_report(golden, tmp_path):
    rep = tmp_path / "verify.json"
    assert cli.main(["verify", str(golden / "orbit.json"), "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["passed"]


def copy_run(src, dst):
    dst.mkdir()
    for p in src.rglob("*"):
        if p.is_file():
            q = dst / p.relative_to(src)
            q.parent.mkdir(parents=True, exist_ok=True)
            q.write_bytes(p.read_bytes())
    return dst


def test_verify_detects_a_dropped_control_time(golden, tmp_path):
    run = copy_run(golden, tmp_path / "gap")
    path = run / "schedules" / "scale_1.json"
    sch = json.loads(path.read_text())
    del sch["times"][len(sch["times"]) // 2]
    path.write_text(json.dumps(sch))
    res = cli.verify_run(run)
    assert not res["passed"] and any("scale 1" in f for f in res["failures"])
    assert cli.main(["verify", str(run)]) == 1


def test_verify_detects_edited_sums(golden, tmp_path):
    run = copy_run(golden, tmp_path / "sums")
    lines = (run / "prefix.csv").read_text().splitlines()
    cells = lines[50].split(",")
    cells[1] = repr(float(cells[1]) + 0.5)
    cells[2] = repr(float(cells[2]) + 0.5)
    lines[50] = ",".join(cells)
    (run / "prefix.csv").write_text("\n".join(lines) + "\n")
    res = cli.verify_run(run)
    assert any("n = 50" in f for f in res["failures"])


def test_verify_detects_missing_scale_and_bad_ladder(golden, tmp_path):
    run = copy_run(golden, tmp_path / "miss")
    (run / "schedules" / "scale_2.json").unlink()
    assert any("missing" in f for f in cli.verify_run(run)["failures"])
    run = copy_run(golden, tmp_path / "beta")
    path = run / "schedules" / "scale_1.json"
    sch = json.loads(path.read_text())
    sch["beta"] = "2"
    path.write_text(json.dumps(sch))
    assert any("differs from the ladder" in f for f in cli.verify_run(run)["failures"])


def test_unreadable_inputs_exit_with_parse_code(golden, tmp_path):
    run = copy_run(golden, tmp_path / "parse")
    (run / "orbit.json").write_text("{not json")
    assert cli.main(["verify", str(run)]) == 4
    orbit = json.loads((golden / "orbit.json").read_text())
    del orbit["schema_version"]
    (run / "orbit.json").write_text(json.dumps(orbit))
    assert cli.main(["verify", str(run)]) == 4
    assert cli.main(["construct", "--no-such-flag"]) == 4
    assert cli.main(["construct", "--config", str(tmp_path / "absent.json")]) == 4


def test_budget_exit_code(tmp_path, capsys):
    code, out = construct(tmp_path, "big", "--kmax", "5", "--budget", "100000")
    assert code == 2 and not out.exists()
    assert "42515280" in capsys.readouterr().err


def test_invalid_configuration_exit_code(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"k_max": 0}))
    assert cli.main(["construct", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 3
    cfg.write_text(json.dumps({"symbolic": {"v": [1, 1]}}))
    assert cli.main(["construct", "--config", str(cfg), "--out", str(tmp_path / "y")]) == 3
    assert cli.main(["construct", "--chi", "1", "--out", str(tmp_path / "z")]) == 3


def test_config_file_and_flags_merge(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k_max": 2, "chi": "1/10"}))
    rc = cli.load_config(str(cfg), {"chi": "0"})
    assert rc["k_max"] == 2 and F(rc["chi"]) == 0


def test_construct_is_deterministic(tmp_path):
    outs = [construct(tmp_path, f"r{i}", "--kmax", "2", "--seed", "3")[1] for i in range(2)]
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    assert files and all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)


def test_zero_chi_sweep_reproduces_construct(tmp_path):
    _, direct = construct(tmp_path, "direct", "--model", "spawner", "--kmax", "2")
    cfg = cli.load_config(None, {"model": "spawner", "k_max": 2})
    rows = cli.run_sweep(cfg, ["0"], tmp_path / "sweep", jobs=1)
    assert rows[0]["pass"] == "true"
    header = (tmp_path / "sweep" / "chi_sweep.csv").read_text().splitlines()[0]
    assert header == ",".join(cli.SWEEP_COLUMNS)
    swept = [p for p in (tmp_path / "sweep").iterdir() if p.is_dir()]
    assert len(swept) == 1
    for name in ("orbit.json", "prefix.csv", "report.json"):
        assert (swept[0] / name).read_bytes() == (direct / name).read_bytes()


def test_sweep_rejects_chi_outside_the_gap(tmp_path, capsys):
    code = cli.main(["chi-sweep", "--kmax", "2", "--chi", "2,3", "--out", str(tmp_path / "s")])
    assert code == 3
    assert "rejected" in capsys.readouterr().out


def test_blender_exit_codes(tmp_path):
    assert cli.main(["blender", "--trials", "80", "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "blender.json").read_text())
    assert rec["passed"] and rec["image_margins"]["center_margin"] == "1/80"
    assert cli.main(["blender", "--lambda", "13/10", "--trials", "40"]) == 1
    cfg = tmp_path / "wide.json"
    cfg.write_text(json.dumps({"spawner": {"params": {"alpha1": "1/5"}}}))
    assert cli.main(["blender", "--config", str(cfg), "--trials", "40"]) == 3
