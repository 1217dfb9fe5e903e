import csv
import json
import os

import pytest

from trapsmooth import cli
from trapsmooth import config as C

FAST_SCAN = """
[surface]
m1 = {m1}
m2 = 1
[grid]
xmin = -7
xmax = 8
[cap]
layer_width = 2
[resolvent]
well = {well}
h_list = 1/10 1/13 1/16
samples = 3
refine = no
"""


def run(tmp_path, command, text=None, *extra):
    argv = [command, "--out", str(tmp_path)]
    if text is not None:
        path = tmp_path / "run.ini"
        path.write_text(text)
        argv += ["--config", str(path)]
    return cli.main(argv + list(extra))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------- config


def test_defaults_and_fractions():
    cfg = C.parse("[resolvent]\nh_list = 1/40, 1/80 0.005\n")
    assert cfg.resolvent.h_list == (0.025, 0.0125, 0.005)
    assert cfg.m1 == cfg.m2 == 1 and cfg.cap is not None
    assert C.has_section(cfg, "resolvent") and not C.has_section(cfg, "quasimode")
    assert C.has_section(C.ExperimentConfig(), "quasimode")


@pytest.mark.parametrize("text", [
    "[bogus]\n",
    "[surface]\nm3 = 1\n",
    "[surface]\nm1 = 1.5\n",
    "[surface]\nm1 = 0\n",
    "[grid]\nxmin = 2\n",
    "[grid]\nppw = 4\n",
    "[cap]\nenabled = maybe\n",
    "[cap]\npower = 1\n",
    "[resolvent]\nwell = elliptic\n",
    "[resolvent]\nh_list = 0.1 0.05\n",
    "[resolvent]\nh_list = 0.1 x 0.05\n",
    "[quasimode]\ndelta = 1\n",
    "[quasimode]\nalpha_E = 0\n",
    "[evolution]\nk_list = 10 2.5 40\n",
    "[evolution]\ninitial = noise\n",
    "[evolution]\ndt = 2\nT = 1\n",
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(C.ConfigError):
        C.parse(text)


def test_case_sensitive_keys():
    cfg = C.parse("[evolution]\nT = 0.5\n[quasimode]\nalpha_E = 2\n")
    assert cfg.evolution.T == 0.5 and cfg.quasimode.alpha_E == 2.0


def test_readme_example_parses():
    readme = os.path.join(os.path.dirname(__file__), os.pardir, "README.md")
    with open(readme, encoding="utf-8") as fh:
        text = fh.read()
    block = text.split("```ini\n", 1)[1].split("```", 1)[0]
    assert C.parse(block).hash() == C.ExperimentConfig().hash()


def test_cap_disabled():
    assert C.parse("[cap]\nenabled = no\n").cap is None


def test_hash_tracks_content():
    a, b = C.parse(""), C.parse("[surface]\nm1 = 2\n")
    assert a.hash() == C.ExperimentConfig().hash()
    assert a.hash() != b.hash() and len(a.hash()) == 16


def test_load_missing_file(tmp_path):
    with pytest.raises(C.ConfigError):
        C.load(tmp_path / "nope.ini")


# ---------------------------------------------------------------- cli


def test_profile_rows(tmp_path):
    assert run(tmp_path, "profile") == 0
    with open(tmp_path / "profile_m1_1.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1001
    assert float(rows[0]["x"]) == -12.0
    by_x = {round(float(r["x"]), 9): r for r in rows}
    assert float(by_x[0.0]["A2"]) == pytest.approx(1.0, abs=1e-12)
    assert abs(float(by_x[1.0]["V1"])) < 1e-12


def test_profile_respects_range(tmp_path):
    assert run(tmp_path, "profile", "[profile]\nxmin = -1\nxmax = 2\npoints = 31\n") == 0
    with open(tmp_path / "profile_m1_1.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "a", "A2", "V1", "V"]
    assert len(rows) == 32 and float(rows[1][0]) == -1.0


@pytest.mark.parametrize("m1,well,expected", [(2, "hyperbolic", 4 / 3),
                                               (1, "inflection", 1.2),
                                               (1, "nontrapping", 1.0)])
def test_resolvent_scan_expected_exponent(tmp_path, m1, well, expected):
    assert run(tmp_path, "resolvent-scan", FAST_SCAN.format(m1=m1, well=well)) == 0
    data = read_json(tmp_path / f"resolvent_{well}_m{m1}_1.json")
    assert data["expected_exponent"] == pytest.approx(expected)
    assert {"fitted_slope", "stderr", "passed", "config_hash"} <= set(data)
    assert len(data["sup"]) == 3
    assert os.path.exists(tmp_path / f"resolvent_{well}_m{m1}_1.csv")


def test_resolvent_scan_unreliable_exit(tmp_path):
    text = FAST_SCAN.format(m1=1, well="hyperbolic") + "tol = 1e-14\nmaxit = 1\n"
    assert run(tmp_path, "resolvent-scan", text) == cli.EXIT_NUMERIC


@pytest.mark.parametrize("m2,target", [(1, 1.2), (2, 10 / 7)])
def test_quasimode_check(tmp_path, m2, target):
    assert run(tmp_path, "quasimode-check", f"[surface]\nm2 = {m2}\n") == 0
    data = read_json(tmp_path / f"quasimode_m1_{m2}.json")
    assert data["gamma"] == pytest.approx(target)
    assert data["residual_pass"] and data["norm_pass"]
    if m2 == 1:
        assert data["target_norm_slope"] == pytest.approx(-0.2)


def test_malformed_delta_exit(tmp_path):
    assert run(tmp_path, "quasimode-check", "[quasimode]\ndelta = 1.5\n") == cli.EXIT_CONFIG


def test_bad_flags_exit(tmp_path):
    assert run(tmp_path, "profile", None, "--threads", "0") == cli.EXIT_CONFIG
    assert run(tmp_path, "profile", None, "--seed", "-1") == cli.EXIT_CONFIG
    assert cli.main(["profile", "--config", str(tmp_path / "none.ini"),
                     "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_saturate_requires_quasimode_block(tmp_path):
    assert run(tmp_path, "saturate", "[evolution]\nk_list = 10 20 30\n") == cli.EXIT_CONFIG


def test_saturate_small_ladder(tmp_path):
    text = "[quasimode]\ndelta = 0.1\n[evolution]\nk_list = 10 20 30 40\ncsv_rows = 50\n"
    assert run(tmp_path, "saturate", text) == 0
    data = read_json(tmp_path / "saturate_m1_1.json")
    assert len(data["runs"]) == 4
    assert all(r["ratio"] > 0 for r in data["runs"])
    assert data["uniform"] == (data["spread"] <= 3.0)
    with open(tmp_path / "saturate_m1_1_k40.csv") as fh:
        assert len(fh.readlines()) <= 52


def test_evolve_packets(tmp_path):
    text = "[evolution]\nk_list = 5 10 20\nT = 0.2\ninitial = packets\n"
    assert run(tmp_path, "evolve", text, "--seed", "3") == 0
    data = read_json(tmp_path / "evolve_m1_1.json")
    assert data["seed"] == 3 and len(data["runs"]) == 3
    assert data["beta"] == pytest.approx(0.6)


def test_report_empty_and_rows(tmp_path):
    assert run(tmp_path, "report") == 0
    assert read_json(tmp_path / "report.json") == {"count": 0, "rows": {}}
    for well in ("hyperbolic", "nontrapping"):
        assert run(tmp_path, "resolvent-scan", FAST_SCAN.format(m1=1, well=well)) == 0
    assert run(tmp_path, "report") == 0
    rep = read_json(tmp_path / "report.json")
    assert rep["count"] == 2
    assert set(rep["rows"]) == {"m1=1,m2=1,resolvent-scan:hyperbolic",
                                "m1=1,m2=1,resolvent-scan:nontrapping"}


def test_report_conflict(tmp_path):
    base = {"experiment": "saturate", "m1": 1, "m2": 1, "config_hash": "a"}
    cli.write_json(tmp_path / "one.json", base)
    cli.write_json(tmp_path / "two.json", dict(base, config_hash="b"))
    assert run(tmp_path, "report") == cli.EXIT_CONFLICT
    cli.write_json(tmp_path / "two.json", base)
    assert run(tmp_path, "report") == 0


def test_outputs_are_deterministic(tmp_path):
    text = FAST_SCAN.format(m1=1, well="inflection") + "[profile]\npoints = 101\n"
    blobs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        out.mkdir()
        for command in ("profile", "resolvent-scan", "quasimode-check"):
            assert run(out, command, text) == 0
        os.remove(out / "run.ini")
        blobs.append({f: (out / f).read_bytes() for f in sorted(os.listdir(out))})
    assert blobs[0] == blobs[1]
    assert len(blobs[0]) == 5


def test_float_cells_round_trip():
    for v in (0.1, 1 / 3, 1e-300, 12345.678901234567):
        assert float(cli.fmt(v)) == v
    assert cli.fmt(True) == "true" and cli.fmt(7) == "7"


def test_console_help(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    assert "resolvent-scan" in capsys.readouterr().out
