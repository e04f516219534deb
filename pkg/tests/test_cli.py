import json
import math

import numpy as np
import pytest

from flowtopo import __version__, cli, flow_io


def run(tmp_path, *args):
    return cli.main(list(args))


def test_usage_errors(tmp_path, capsys):
    assert cli.main([]) == 2
    assert cli.main(["bogus"]) == 2
    assert cli.main(["ph", "--out", str(tmp_path), "nonsense"]) == 2
    assert cli.main(["ph", "--out", str(tmp_path), "wrong_key=1"]) == 2
    assert "unknown config keys" in capsys.readouterr().err


@pytest.mark.parametrize("override", ["q=0", "q=1.5", "k=0", "primes=[2,4]", "primes=[]", "halfwidth=2",
                                      "n_points=-3", "checks=[\"everything\"]", "shape=sphere",
                                      "r_max=-1", "seed=1.5", "persistence_ratio=1"])
def test_config_validation(tmp_path, override):
    assert cli.main(["ph", "--out", str(tmp_path), override]) == 2


def test_config_file_and_override_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k": 7, "q": 0.5, "seed": 4}))
    merged = cli.load_config(cfg, ["k=9"], seed=None)
    assert (merged["k"], merged["q"], merged["seed"]) == (9, 0.5, 4)
    assert cli.load_config(cfg, [], seed=11)["seed"] == 11
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(cli.ConfigError):
        cli.load_config(bad)
    assert cli.main(["ph", "--config", str(tmp_path / "missing.json")]) == 2


def circle_ph(out, *extra):
    return cli.main(["ph", "--out", str(out), "shape=circle", "n_points=21", "noise_sigma=0.1",
                     "complex=vr", *extra])


def test_ph_circle_report(tmp_path):
    assert circle_ph(tmp_path, "expect_signature=[1,1,0]") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["version"] == __version__ and rep["seed"] == 0 and rep["config"]["n_points"] == 21
    for p in ("2", "3"):
        assert rep["primes"][p]["signature"] == [1, 1, 0]
        (a, b), = rep["primes"][p]["windows"]
        assert b - a >= 0.5
    for name in ("barcode_p2.json", "barcode_p2.csv", "diagram_p2.svg", "barcode_p2.png", "diagram_p3.png"):
        assert (tmp_path / name).stat().st_size > 0


def test_ph_check_failure_exits_one(tmp_path):
    assert circle_ph(tmp_path, "expect_signature=[1,2,0]") == 1
    assert json.loads((tmp_path / "report.json").read_text())["passed"] is False


def test_outputs_are_byte_identical(tmp_path):
    assert circle_ph(tmp_path / "a") == 0
    assert circle_ph(tmp_path / "b") == 0
    for name in ("report.json", "barcode_p3.json", "barcode_p2.csv", "diagram_p2.svg", "barcode_p2.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_changes_output(tmp_path):
    assert circle_ph(tmp_path / "a", "figures=false") == 0
    assert cli.main(["ph", "--out", str(tmp_path / "b"), "--seed", "1", "shape=circle", "n_points=21",
                     "noise_sigma=0.1", "complex=vr", "figures=false"]) == 0
    a = json.loads((tmp_path / "a" / "barcode_p2.json").read_text())
    b = json.loads((tmp_path / "b" / "barcode_p2.json").read_text())
    assert a != b


def test_ph_from_csv_with_witness_complex(tmp_path):
    assert cli.main(["synth", "--out", str(tmp_path / "s"), "shape=circle", "n_points=200",
                     "noise_sigma=0.02"]) == 0
    assert cli.main(["ph", "--out", str(tmp_path / "p"), f"input={tmp_path / 's' / 'cloud.csv'}",
                     "landmarks=30", "max_dim=1", "primes=[3]", "expect_signature=[1,1]",
                     "figures=false"]) == 0
    rep = json.loads((tmp_path / "p" / "report.json").read_text())
    assert rep["n_landmarks"] == 30 and math.isclose(rep["r_max"], 2 * rep["cover_radius"])


def test_synth_flow_patches(tmp_path):
    assert cli.main(["synth", "--out", str(tmp_path), "shape=flow_patches", "n_patches=100"]) == 0
    rows = (tmp_path / "patches.csv").read_text().splitlines()
    assert len(rows) == 101 and rows[0].startswith("u1,u2")


def write_fields(directory):
    rng = np.random.default_rng(0)
    directory.mkdir()
    for i in range(2):
        data = rng.normal(size=(6, 7, 2)).astype(np.float32)
        flow_io.write_flo_file(directory / f"f{i}.flo", flow_io.FlowField.from_array(data))


def test_ingest(tmp_path):
    write_fields(tmp_path / "flo")
    assert cli.main(["ingest", "--out", str(tmp_path / "o"), f"input={tmp_path / 'flo'}", "n_patches=50"]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["flo_files"] == ["f0.flo", "f1.flo"] and rep["n_patches"] == 50
    assert len((tmp_path / "o" / "provenance.csv").read_text().splitlines()) == 51


def test_ingest_errors(tmp_path):
    assert cli.main(["ingest", "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["ingest", "--out", str(tmp_path / "o"), f"input={tmp_path / 'nope'}"]) == 2
    (tmp_path / "empty").mkdir()
    assert cli.main(["ingest", "--out", str(tmp_path / "o"), f"input={tmp_path / 'empty'}"]) == 2
    (tmp_path / "broken").mkdir()
    (tmp_path / "broken" / "x.flo").write_bytes(b"nope" * 4)
    assert cli.main(["ingest", "--out", str(tmp_path / "o"), f"input={tmp_path / 'broken'}"]) == 1


def test_pipeline_then_zigzag(tmp_path):
    out = tmp_path / "pipe"
    assert cli.main(["pipeline", "--out", str(out), "n_patches=40000", "k=100", "subsample=5000",
                     "maxmin_m=30", "figures=false"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert len(rep["bins"]) == 12 and rep["core_size"] == math.ceil(0.5 * min(8000, 5000))
    assert (out / "bin_00_maxmin.csv").exists()
    code = cli.main(["zigzag", "--out", str(tmp_path / "zz"), f"input={out}", "primes=[2]"])
    rep = json.loads((tmp_path / "zz" / "report.json").read_text())
    assert rep["n_nodes"] == 24
    assert code == (0 if rep["passed"] else 1)
    assert (tmp_path / "zz" / "zigzag_p2.txt").read_text().startswith("H1 zigzag barcode")


def test_zigzag_missing_bins(tmp_path):
    (tmp_path / "d").mkdir()
    assert cli.main(["zigzag", "--out", str(tmp_path / "o"), f"input={tmp_path / 'd'}"]) == 2


def test_pipeline_stage_error(tmp_path):
    assert cli.main(["pipeline", "--out", str(tmp_path), "n_patches=1000", "k=300"]) == 1


def test_verify_subset(tmp_path, capsys):
    code = cli.main(["verify", "--out", str(tmp_path), 'checks=["quotient","roundtrip","circle"]',
                     "roundtrip_fields=10"])
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert set(rep["checks"]) == {"quotient", "roundtrip", "circle"}
    assert "quotient      PASS" in capsys.readouterr().out
