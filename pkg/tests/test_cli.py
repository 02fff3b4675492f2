import dataclasses
import json
import subprocess
import sys

import numpy as np
import pytest

from gapdecomp import StructuralParams, generate, load_csv, write_csv
from gapdecomp.cli import main, selfcheck

CONTINUOUS = StructuralParams(
    group_share=0.4,
    x_group_effect=0.5, m_group_effect=0.4, m_early_effect=0.3,
    y_group_effect=0.3, y_early_effect=0.4, y_target_effect=0.5,
)
DISCRETE = StructuralParams(
    group_share=0.4,
    x_intercept=0.4, x_group_effect=0.2,
    m_intercept=0.3, m_group_effect=0.15, m_early_effect=0.2,
    y_group_effect=0.3, y_early_effect=0.4, y_target_effect=0.5,
    discrete=True,
)
BINDINGS = {"outcome": "outcome", "group": "group", "early": ["early"], "target": "target"}


def write_cohort(tmp_path, params=CONTINUOUS, n=1500, seed=1, name="cohort.csv"):
    path = tmp_path / name
    write_csv(generate(params, n, seed=seed), path)
    return path


def write_config(tmp_path, **overrides):
    body = {
        "input": str(tmp_path / "cohort.csv"),
        "bindings": BINDINGS,
        "runs": [{"proposition": "P1", "estimator": "SUCCESSIVE"}],
        "output": {
            "report": str(tmp_path / "report.json"),
            "table": str(tmp_path / "table.txt"),
        },
    }
    body.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(body), encoding="utf-8")
    return path


def read_report(tmp_path):
    return json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))


def test_run_reports_every_request(tmp_path, capsys):
    write_cohort(tmp_path)
    cfg = write_config(
        tmp_path,
        runs=[
            {"proposition": p, "estimator": "SUCCESSIVE"} for p in ("P1", "P2", "P3", "P4")
        ] + [{"proposition": "P4", "estimator": "PRODUCT"}],
    )
    assert main(["run", str(cfg)]) == 0
    report = read_report(tmp_path)
    assert report["dataset"]["rows"] == 1500
    assert [r["proposition"] for r in report["runs"]] == ["P1", "P2", "P3", "P4", "P4"]
    for r in report["runs"]:
        est = r["estimate"]
        assert r["error"] is None
        assert est["scale"] == "ADDITIVE"
        assert est["initial"] == pytest.approx(est["residual"] + est["reduction"], abs=1e-10)
        assert est["coefficients"]  # nested model -> coefficient maps
    successive = report["runs"][3]["estimate"]
    product = report["runs"][4]["estimate"]
    assert successive["residual"] == pytest.approx(product["residual"], rel=1e-8)

    table = (tmp_path / "table.txt").read_text(encoding="utf-8")
    assert table == capsys.readouterr().out
    lines = table.splitlines()
    assert lines[0].startswith("quantity")
    assert lines[1].startswith("initial disparity")
    assert lines[2].startswith("residual disparity")
    assert lines[3].startswith("% reduction")
    percents = lines[3].split()[2:]
    expected = [str(round(100 * r["estimate"]["proportion_reduced"])) for r in report["runs"]]
    assert percents == expected


def test_invalid_combination_fails_before_any_estimate(tmp_path, capsys):
    write_cohort(tmp_path)
    cfg = write_config(
        tmp_path,
        runs=[
            {"proposition": "P1", "estimator": "SUCCESSIVE"},
            {"proposition": "P5", "estimator": "SUCCESSIVE"},
        ],
    )
    assert main(["run", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and "runs[1]" in err and "P5" in err
    assert not (tmp_path / "report.json").exists()
    assert not (tmp_path / "table.txt").exists()


def test_reruns_are_byte_identical(tmp_path, capsys):
    write_cohort(tmp_path)
    cfg = write_config(
        tmp_path,
        runs=[
            {"proposition": "P4", "estimator": "SUCCESSIVE"},
            {"proposition": "P4", "estimator": "PRODUCT"},
        ],
        bootstrap={"replicates": 25, "seed": 3},
    )
    assert main(["run", str(cfg)]) == 0
    first_report = (tmp_path / "report.json").read_bytes()
    first_table = (tmp_path / "table.txt").read_bytes()
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "report.json").read_bytes() == first_report
    assert (tmp_path / "table.txt").read_bytes() == first_table
    boot = read_report(tmp_path)["runs"][0]["bootstrap"]
    assert boot["replicates"] == 25 and boot["seed"] == 3
    assert set(boot["quantities"]) == {"initial", "residual", "reduction", "proportion_reduced"}
    assert boot["quantities"]["initial"]["se"] > 0.0
    point = read_report(tmp_path)["runs"][0]["estimate"]["initial"]
    assert boot["quantities"]["initial"]["point"] == pytest.approx(point, abs=0.0)


def test_one_failing_run_does_not_abort_the_others(tmp_path, capsys):
    write_cohort(tmp_path)
    cfg = write_config(
        tmp_path,
        runs=[
            {"proposition": "P1", "estimator": "SUCCESSIVE"},
            # continuous early measure: the stratum builder must refuse
            {"proposition": "P1", "estimator": "PLUGIN"},
        ],
    )
    assert main(["run", str(cfg)]) == 1
    report = read_report(tmp_path)
    good, bad = report["runs"]
    assert good["error"] is None and good["estimate"] is not None
    assert bad["estimate"] is None
    assert bad["error"]["type"] == "TooManyLevels"
    assert "discretize" in bad["error"]["message"]
    out = capsys.readouterr()
    assert "P1/PLUGIN failed" in out.err
    table_lines = (tmp_path / "table.txt").read_text(encoding="utf-8").splitlines()
    assert "error" in table_lines[1]
    # duplicate propositions are disambiguated by estimator
    assert "P1/SUCCESSIVE" in table_lines[0] and "P1/PLUGIN" in table_lines[0]


def test_plugin_runs_with_discretization_and_anchor(tmp_path):
    write_cohort(tmp_path, n=4000)
    cfg = write_config(
        tmp_path,
        preprocess={"discretize": {"columns": ["early", "target"], "bins": 4}},
        runs=[
            {"proposition": "P2", "estimator": "PLUGIN"},
            {"proposition": "P4", "estimator": "PLUGIN"},
        ],
    )
    assert main(["run", str(cfg)]) == 0
    report = read_report(tmp_path)
    p2 = report["runs"][0]
    assert any("anchored at early-measure stratum" in note for note in p2["notes"])
    for r in report["runs"]:
        assert r["estimate"]["initial"] is not None


def test_missing_indicators_flow_into_the_dataset(tmp_path):
    path = tmp_path / "cohort.csv"
    path.write_text(
        "outcome,group,early,target\n"
        "1.0,0,0.1,\n"
        "2.0,0,0.4,0.7\n"
        "1.5,0,0.2,0.3\n"
        "2.5,1,0.9,\n"
        "3.0,1,0.8,0.9\n"
        "2.0,1,0.5,0.2\n",
        encoding="utf-8",
    )
    cfg = write_config(
        tmp_path,
        preprocess={"missing_indicators": ["target"]},
        runs=[{"proposition": "P3", "estimator": "SUCCESSIVE"}],
    )
    assert main(["run", str(cfg)]) == 0
    report = read_report(tmp_path)
    assert "target_miss" in report["dataset"]["columns"]
    assert report["runs"][0]["error"] is None


def test_config_schema_errors_name_the_problem(tmp_path, capsys):
    write_cohort(tmp_path, n=50)
    cases = [
        ({"typo_key": 1}, "typo_key"),
        ({"runs": []}, "runs"),
        ({"runs": [{"proposition": "P1"}]}, "estimator"),
        ({"runs": [{"proposition": "P1", "estimator": "SUCCESSIVE", "extra": 1}]}, "extra"),
        ({"bindings": "outcome"}, "bindings"),
        ({"preprocess": {"unknown_step": {}}}, "unknown_step"),
        ({"runs": [{"proposition": "P9", "estimator": "SUCCESSIVE"}]}, "P9"),
        ({"runs": [{"proposition": "P1", "estimator": "GUESS"}]}, "GUESS"),
    ]
    for overrides, fragment in cases:
        cfg = write_config(tmp_path, **overrides)
        assert main(["run", str(cfg)]) == 2, fragment
        err = capsys.readouterr().err
        assert "config error" in err and fragment in err

    missing = tmp_path / "nope.json"
    assert main(["run", str(missing)]) == 2
    assert "cannot read config" in capsys.readouterr().err

    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json", encoding="utf-8")
    assert main(["run", str(bad_json)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_generate_subcommand_round_trips(tmp_path, capsys):
    params = tmp_path / "params.json"
    params.write_text(
        json.dumps(
            {
                "n": 400,
                "seed": 5,
                "x_group_effect": 0.3,
                "m_group_effect": 0.2,
                "y_group_effect": 0.2,
                "y_target_effect": 0.4,
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "cohort.csv"
    assert main(["generate", str(params), str(out)]) == 0
    assert "wrote 400 rows" in capsys.readouterr().out
    first = out.read_bytes()
    d = load_csv(out, BINDINGS)
    assert d.n_rows == 400
    assert set(d.columns) == {"outcome", "group", "early", "target"}
    assert main(["generate", str(params), str(out)]) == 0
    assert out.read_bytes() == first


def test_generate_rejects_unknown_parameters(tmp_path, capsys):
    params = tmp_path / "params.json"
    params.write_text(json.dumps({"n": 10, "group_gap": 0.5}), encoding="utf-8")
    assert main(["generate", str(params), str(tmp_path / "x.csv")]) == 2
    err = capsys.readouterr().err
    assert "unknown parameter(s)" in err and "group_gap" in err


def test_selfcheck_passes_and_prints_verdicts(capsys):
    assert selfcheck() == 0
    out = capsys.readouterr().out
    assert "all identities hold" in out
    assert "max deviation" in out
    assert "FAIL" not in out
    for fragment in (
        "additivity",
        "nested-regression vs coefficient-product",
        "plug-in cell means vs saturated regression",
        "constant-confounder collapse",
        "group-stratified vs pooled-interaction",
    ):
        assert fragment in out


def test_selfcheck_catches_a_broken_estimator(monkeypatch, capsys):
    import gapdecomp.cli as cli
    from gapdecomp.engine import estimate as real_estimate

    def skewed(d, spec):
        est = real_estimate(d, spec)
        if spec.estimator.value == "PRODUCT":
            return dataclasses.replace(est, reduction=est.reduction + 0.05)
        return est

    monkeypatch.setattr(cli, "estimate", skewed)
    assert selfcheck() == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "all identities hold" not in out


def test_module_is_executable_as_a_script(tmp_path):
    params = tmp_path / "params.json"
    params.write_text(json.dumps({"n": 30, "seed": 2}), encoding="utf-8")
    out = tmp_path / "tiny.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "gapdecomp.cli", "generate", str(params), str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
