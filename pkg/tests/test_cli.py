import json
import subprocess
import sys

import pytest

from crnscale import gallery
from crnscale.cli import main, parse_predicate_text
from crnscale.parse import parse_network, parse_scaling
from crnscale.reduce import parse_reduced


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("gallery")
    assert main(["examples", "--out", str(d)]) == 0
    return d


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_examples_parse_and_keep_printed_rates(files):
    names = sorted(p.name for p in files.iterdir())
    assert set(gallery.FILES) == set(names)
    net = parse_network((files / "goutsias.crn").read_text())
    t1 = parse_scaling((files / "goutsias_table1.scale").read_text(), net)
    t3 = parse_scaling((files / "goutsias_table3.scale").read_text(), net)
    assert [r.rate_const for r in net.reactions] == [4.30e-2, 7.00e-4, 7.15e-2, 3.90e-3, 1.99e-2, 4.79e-1,
                                                     1.99e-4, 8.77e-12, 8.30e-2, 5.00e-1]
    assert t1.kappa == pytest.approx((4.30, 0.07, 7.15, 0.390, 1.99, 47.9, 0.0199, 8.77e-10, 0.0830, 0.500),
                                     rel=1e-12)
    assert t3.kappa == pytest.approx((4.30, 7.00, 7.15, 0.390, 1.99, 0.479, 199, 8.77e-8, 8.30, 0.500), rel=1e-12)
    for name in names:
        if name.endswith(".crn"):
            parse_network((files / name).read_text(), strict=True)


def test_validate_gallery_is_clean(capsys, files):
    code, out, err = run(capsys, "validate", files / "goutsias.crn")
    assert code == 0 and err == "" and "0 diagnostics" in out


def test_validate_reports_diagnostics(capsys, tmp_path):
    bad = tmp_path / "bad.crn"
    bad.write_text("# crn-v1\nspecies A, B\nA -> B @ 1\n4 A -> B @ 2\n")
    code, out, err = run(capsys, "validate", bad)
    assert code == 0 and "order 4" in err and "1 diagnostics" in out
    code, _, err = run(capsys, "validate", "--strict", bad)
    assert code == 1 and "order 4" in err


def test_parse_error_exits_one_with_location(capsys, tmp_path):
    bad = tmp_path / "bad.crn"
    bad.write_text("species A\nA -> 0 @ -1\n")
    code, _, err = run(capsys, "validate", bad)
    assert code == 1 and "bad.crn:2:" in err


def test_usage_errors_exit_two_and_name_the_flag(capsys, files):
    with pytest.raises(SystemExit) as info:
        main(["simulate", str(files / "goutsias.crn"), "--replicates", "zero", "--t-end", "1"])
    assert info.value.code == 2
    assert "--replicates" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["analyze", str(files / "goutsias.crn"), str(files / "goutsias_table3.scale"), "--gamma", "x/y"])
    assert info.value.code == 2
    assert "--gamma" in capsys.readouterr().err


def test_analyze_table3_all_satisfied(capsys, files):
    code, out, _ = run(capsys, "analyze", files / "goutsias.crn", files / "goutsias_table3.scale", "--gamma", "0")
    assert code == 0
    assert "all balance conditions hold: yes" in out
    assert "violated" not in out
    code, out, _ = run(capsys, "analyze", files / "goutsias.crn", files / "goutsias_table3.scale",
                       "--gamma", "0", "--format", "report")
    report = json.loads(out)
    assert report["all_conditions_hold"] and report["r1"] == "0" and report["r2"] == "1"


def test_analyze_writes_byte_stable_files(capsys, files, tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run(capsys, "analyze", files / "network36.crn", files / "network36.scale",
                   "--gamma", "-2", "--gamma", "-3/2", "--out", d)[0] == 0
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert set(outs[0]) == {"report.json", "report.txt", "manifest.json"}
    assert outs[0]["report.json"] == outs[1]["report.json"] and outs[0]["report.txt"] == outs[1]["report.txt"]
    manifests = [json.loads(o["manifest.json"]) for o in outs]
    for m in manifests:
        m["config"].pop("out")
    assert manifests[0] == manifests[1]
    assert manifests[0]["config"]["gamma"] == ["-2", "-3/2"]
    assert len(manifests[0]["inputs"]) == 2 and all(len(h) == 64 for h in manifests[0]["inputs"].values())
    report = json.loads(outs[0]["report.json"])
    assert [r["gamma"] for r in report] == ["-2", "-3/2"]


def test_timescales_output(capsys, files):
    code, out, _ = run(capsys, "timescales", files / "goutsias.crn", files / "goutsias_table3.scale")
    assert code == 0
    assert "r1 = 0" in out and "r2 = 1" in out
    code, out, _ = run(capsys, "timescales", files / "network36.crn", files / "network36.scale", "--format", "report")
    assert json.loads(out)["max_admissible_gamma"] == "-2"


def test_reduce_needs_closure(capsys, files, tmp_path):
    crn, t3 = files / "goutsias.crn", files / "goutsias_table3.scale"
    code, out, err = run(capsys, "reduce", crn, t3, "--gamma", "2", "--aux", "Z12=M+2D+2DNA_D",
                         "--aux", "Z45=DNA+DNA_D")
    assert code == 1 and "unresolved" in err
    code, _, _ = run(capsys, "reduce", crn, t3, "--gamma", "2", "--recipe", "goutsias", "--out", tmp_path)
    assert code == 0
    model = parse_reduced((tmp_path / "reduced.crn").read_text())
    assert model.closed and str(model.gamma) == "2"


def test_simulate_conserves_promoter_in_every_row(capsys, files):
    code, out, _ = run(capsys, "simulate", "--method", "ssa", files / "goutsias.crn", "--t-end", "100",
                       "--replicates", "5", "--seed", "1", "--grid", "11")
    assert code == 0
    rows = [line.split(",") for line in out.splitlines() if line and line[0].isdigit()]
    assert len(rows) == 55
    assert all(int(r[4]) + int(r[5]) + int(r[6]) == 2 for r in rows)


def test_simulate_repeatable_and_thread_independent(capsys, files, tmp_path):
    base = ["simulate", files / "goutsias.crn", "--t-end", "20", "--replicates", "6", "--seed", "3",
            "--grid", "5", "--hit", "tau1: DNA + DNA_D == 1"]
    dumps = []
    for k, threads in enumerate((1, 1, 3)):
        d = tmp_path / f"s{k}"
        assert run(capsys, *base, "--threads", threads, "--out", d)[0] == 0
        dumps.append({p.name: p.read_bytes() for p in d.iterdir() if p.name != "manifest.json"})
    assert dumps[0] == dumps[1] == dumps[2]
    assert {"trajectories.csv", "ensemble.csv", "summary.json", "hitting_tau1.csv"} <= set(dumps[0])
    manifest = json.loads((tmp_path / "s0" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3 and manifest["config"]["replicates"] == 6


def test_simulate_reduced_model_file(capsys, files, tmp_path):
    assert run(capsys, "reduce", files / "goutsias.crn", files / "goutsias_table3.scale", "--gamma", "0",
               "--out", tmp_path)[0] == 0
    code, out, _ = run(capsys, "simulate", "--method", "hybrid", tmp_path / "reduced.crn", "--t-end", "1",
                       "--grid", "3", "--format", "report")
    assert code == 0 and json.loads(out)["replicates"] == 1


def test_simulate_ode_rejects_rare_species(capsys, files):
    code, _, err = run(capsys, "simulate", "--method", "ode", files / "goutsias.crn",
                       files / "goutsias_table1.scale", "--t-end", "1")
    assert code == 1 and "alpha = 1" in err


def test_simulate_ode_without_scale(capsys, files):
    code, out, _ = run(capsys, "simulate", "--method", "ode", files / "michaelis_menten.crn", "--t-end", "1",
                       "--grid", "2")
    assert code == 0 and out.splitlines()[1] == "time,S1,S2,S3,S4"


def test_compare_runs_and_reports(capsys, files, tmp_path):
    code, out, _ = run(capsys, "compare", files / "goutsias.crn", files / "goutsias_table3.scale", "--gamma", "0",
                       "--t-end", "5", "--replicates", "3", "--grid", "3", "--out", tmp_path)
    assert code == 0 and "max |full - reduced|" in out
    payload = json.loads((tmp_path / "comparison.json").read_text())
    assert payload["time_factor"] == 1.0 and "DNA" in payload["observables"]


def test_predicate_text():
    assert parse_predicate_text("tau: 2*A + B <= 3") == ("tau", {"A": 2.0, "B": 1.0}, "<=", 3.0)
    with pytest.raises(Exception):
        parse_predicate_text("A +")


def test_module_entry_point(files):
    res = subprocess.run([sys.executable, "-m", "crnscale", "validate", str(files / "goutsias.crn")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    res = subprocess.run([sys.executable, "-m", "crnscale", "nosuch"], capture_output=True, text=True)
    assert res.returncode == 2


def test_reduced_model_reports_original_time_units(capsys, files, tmp_path):
    assert run(capsys, "reduce", files / "goutsias.crn", files / "goutsias_table3.scale", "--gamma", "2",
               "--recipe", "goutsias", "--out", tmp_path)[0] == 0
    code, out, _ = run(capsys, "simulate", "--method", "hybrid", tmp_path / "reduced.crn", "--t-end", "1e4",
                       "--replicates", "50", "--hit", "tau1: Z45 == 1", "--stop-on-hit", "--format", "report")
    hit = json.loads(out)["hitting"]["tau1"]
    assert code == 0 and hit["hit"] == 50 and 50 < hit["mean"] < 400


def test_compare_accepts_stop_on_hit(capsys, files):
    code, out, _ = run(capsys, "compare", files / "goutsias.crn", files / "goutsias_table3.scale", "--gamma", "2",
                       "--recipe", "goutsias", "--t-end", "1e4", "--replicates", "5", "--grid", "3",
                       "--hit", "tau1: Z45 == 1", "--stop-on-hit")
    assert code == 0 and "5/5, 5/5" in out
