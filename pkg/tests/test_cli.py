import json

import pytest

from bifid.cli import (
    DECISIONS_SCHEMA,
    RunConfig,
    command_pipeline,
    format_report,
    main,
    selection_report,
)
from bifid.exceptions import ConfigError
from bifid.harness import MetadataTable, read_table, write_table
from bifid.sampling import read_plan
from bifid.surrogates import load_model

SMALL = {
    "pairs": ["forrester", "currin"],
    "budgets": [[2, 4], [2, 8], [4, 8]],
    "budget_units": "d",
    "repetitions": 6,
    "seed": 3,
    "trainer": {"n_starts": 2},
    "filter": {"mode": "critical", "theta": "auto"},
    "selector": {"mode": "rules"},
    "output_dir": "out",
}


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return path


def test_pairs_list(capsys):
    assert main(["pairs", "list"]) == 0
    out = capsys.readouterr().out
    assert "forrester\td=1\tliterature" in out


def test_plan_and_fit(tmp_path, capsys):
    assert main(["plan", "--d", "2", "--n-l", "8", "--n-h", "3", "--out", str(tmp_path / "p.txt")]) == 0
    design = read_plan(tmp_path / "p.txt")
    assert design.plan.points.shape == (8, 2) and design.n_h == 3
    assert main(["fit", "--pair", "forrester", "--n-low", "12", "--n-high", "4",
                 "--model", "cokriging", "--out", str(tmp_path / "m.txt")]) == 0
    assert capsys.readouterr().out.startswith("p_corr ")
    assert load_model(tmp_path / "m.txt").rho_ != 0.0


def test_plan_needs_dimension(capsys):
    assert main(["plan", "--n-l", "8", "--out", "x"]) == 1
    assert "--pair or --d" in capsys.readouterr().err


def test_run_filter_select_report(tmp_path, capsys, monkeypatch):
    meta = tmp_path / "meta.csv"
    assert main(["run", "--pairs", "forrester", "--grid", "custom", "--budgets", "2x4,3x6,4x8",
                 "--reps", "6", "--out", str(meta)]) == 0
    table = read_table(meta)
    assert len(table.rows) == 3
    assert (tmp_path / "meta.csv.transform.json").exists()

    assert main(["filter", "--metadata", str(meta), "--theta", "0", "--mode", "dissimilar",
                 "--out", str(tmp_path / "f.csv")]) == 0
    assert len(read_table(tmp_path / "f.csv").rows) == 3
    assert json.loads(capsys.readouterr().out)["retained"] == 3

    assert main(["project", "--metadata", str(meta)]) == 0
    projected = capsys.readouterr().out.splitlines()
    assert projected[0] == "instance_id,z1,z2,good_kriging,good_cokriging"
    assert len(projected) == 4 and all(float(v) == float(v) for v in projected[1].split(",")[1:3])

    dec = tmp_path / "d.csv"
    assert main(["select", "--features", str(meta), "--mode", "cc-baseline", "--out", str(dec)]) == 0
    rows = read_table(dec, schema=DECISIONS_SCHEMA).rows
    assert {r["rule_fired"] for r in rows} <= {"cc>=0.7", "cc<0.7"}
    assert main(["report", str(dec)]) == 0
    assert "selector accuracy" in capsys.readouterr().out
    # the metadata table has no choice column
    assert main(["report", str(meta)]) == 1


def test_seed_env_override(tmp_path, monkeypatch):
    args = ["plan", "--d", "2", "--n-l", "6", "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("BIFID_SEED", "99")
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a").read_text() != (tmp_path / "b").read_text()
    monkeypatch.setenv("BIFID_SEED", "1")
    assert main(args + ["--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "a").read_text() == (tmp_path / "c").read_text()
    monkeypatch.setenv("BIFID_SEED", "abc")
    assert main(args + ["--out", str(tmp_path / "d")]) == 1


def test_usage_errors_exit_one(capsys):
    assert main_exit(["frobnicate"]) == 1
    assert main_exit(["plan", "--out", "x"]) == 1  # --n-l missing


def main_exit(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    return info.value.code


# -- report -------------------------------------------------------------------------------


def report_rows(n_k, n_ck, n=1000, choice="Kriging"):
    return [{"good_kriging": int(i < n_k), "good_cokriging": int(i >= n - n_ck), "choice": choice}
            for i in range(n)]


def test_report_reproduces_rates():
    report = selection_report(report_rows(610, 618))
    assert report["algorithms"]["Kriging"]["pr_good"] == pytest.approx(0.610)
    assert report["algorithms"]["CoKriging"]["pr_good"] == pytest.approx(0.618)
    text = format_report(report)
    assert "0.610" in text and "0.618" in text


def test_report_all_kriging_good():
    report = selection_report(report_rows(40, 0, n=40))
    assert report["selector_accuracy"] == 1.0
    assert report["algorithms"]["Kriging"]["accuracy"] == 1.0


def test_empty_report(tmp_path, capsys):
    path = tmp_path / "empty.csv"
    cols = ["instance_id", "good_kriging", "good_cokriging", "choice"]
    write_table(MetadataTable(cols, []), path, schema=DECISIONS_SCHEMA)
    assert main(["report", str(path)]) == 0
    assert capsys.readouterr().out == "no instances\n"


# -- config and pipeline ------------------------------------------------------------------------


def test_config_errors_have_line_numbers(tmp_path):
    bad = dict(SMALL, pairs=["forrester", "nosuchpair"])
    with pytest.raises(ConfigError, match=r"line 4: .*nosuchpair"):
        RunConfig.from_file(write_config(tmp_path, bad))
    with pytest.raises(ConfigError, match=r"line \d+: unknown config key 'colour'"):
        RunConfig.from_file(write_config(tmp_path, dict(SMALL, colour="red")))
    (tmp_path / "broken.json").write_text('{\n  "pairs": [\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        RunConfig.from_file(tmp_path / "broken.json")
    with pytest.raises(ConfigError, match="repetitions"):
        RunConfig.from_text(json.dumps(dict(SMALL, repetitions=0)))


def test_config_roundtrip():
    cfg = RunConfig.from_text(json.dumps(SMALL))
    assert RunConfig.from_text(json.dumps(cfg.to_dict())) == cfg


def test_pipeline_bad_pair_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, dict(SMALL, pairs=["nosuchpair"]))
    assert main(["pipeline", str(path)]) == 1
    assert "nosuchpair" in capsys.readouterr().err


@pytest.fixture(scope="module")
def pipeline_dirs(tmp_path_factory):
    outs = []
    for jobs in (1, 2):
        base = tmp_path_factory.mktemp(f"run{jobs}")
        path = write_config(base, dict(SMALL, jobs=jobs))
        assert command_pipeline(path) == 0
        outs.append(base / "out")
    return outs


def test_pipeline_artifacts(pipeline_dirs):
    out = pipeline_dirs[0]
    table = read_table(out / "metadata.csv")
    assert len(table.rows) == 6
    for name in ("filtered.csv", "decisions.csv", "report.txt", "transform.json", "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 3
    assert len(manifest["instances"]) == 6
    assert "metadata.csv" in manifest["artifacts"]
    assert len(list((out / "plans").glob("*/rep*.plan"))) == 6 * 6


def test_pipeline_jobs_do_not_change_outputs(pipeline_dirs):
    a, b = pipeline_dirs
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for rel in files:
        if rel.name == "manifest.json":
            ma, mb = (json.loads((d / rel).read_text()) for d in (a, b))
            assert ma["artifacts"] == mb["artifacts"]
        else:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()
