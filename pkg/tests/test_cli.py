import json
from dataclasses import replace
from pathlib import Path

import pytest

import hypdec.cli
from hypdec.classes.enums import CriterionStatus, ExitCode
from hypdec.cli import (
    CRITERIA,
    SCENARIOS,
    SUBCOMMANDS,
    ExperimentConfig,
    TrialOutcome,
    main,
    make_rng,
    run,
    verify_all,
)


def test_subcommands_name_scenarios():
    for actions in SUBCOMMANDS.values():
        assert set(actions.values()) <= set(SCENARIOS)
    assert "restriction" in SCENARIOS
    assert [c.number for c in CRITERIA] == list(range(1, 13))


def test_config_from_mapping():
    config = ExperimentConfig.from_mapping(
        {"scenario": "broad-value", "scales": "4,8", "k": "none", "a": "2", "save-inputs": "yes", "band": "0.5:2"}
    )
    assert config.scales == (4, 8)
    assert config.k is None and config.a == 2
    assert config.save_inputs
    assert config.band == (0.5, 2.0)
    assert config.couplings()["A"] == {"value": 2, "coupling": "R^(eps^20)"}
    assert config.as_dict()["out"] == "out"


@pytest.mark.parametrize(
    "values",
    [
        {"scenario": "broad-value", "colour": "red"},
        {"scenario": "broad-value", "seed": "x"},
        {"scenario": "broad-value", "save_inputs": "maybe"},
        {"seed": "1"},
        {"scenario": "nothing"},
        {"scenario": "broad-value", "scales": "3,4"},
        {"scenario": "broad-value", "scales": "4,4"},
        {"scenario": "broad-value", "trials": "0"},
        {"scenario": "broad-value", "p": "2"},
        {"scenario": "broad-value", "k": "6"},
        {"scenario": "restriction", "ensemble": "random-phase,comb"},
    ],
)
def test_config_rejects(values):
    with pytest.raises(ValueError):
        ExperimentConfig.from_mapping(values)


def test_config_from_file(tmp_path):
    path = tmp_path / "desk.ini"
    path.write_text("[experiment]\nscenario = broad-value\nseed = 3\ntrials = 1\n\n[broad-value]\ntrials = 2\n")
    config = ExperimentConfig.from_file(path)
    assert (config.scenario, config.seed, config.trials) == ("broad-value", 3, 2)
    other = ExperimentConfig.from_file(path, "two-ends")
    assert (other.scenario, other.trials) == ("two-ends", 1)
    path.write_text("[other]\nseed = 1\n")
    with pytest.raises(ValueError):
        ExperimentConfig.from_file(path)


def test_ensemble_names_accept_families():
    config = ExperimentConfig("two-ends", ensemble="bush, parallel")
    assert config.ensemble_names == ["bush", "parallel"]
    assert config.effective_scales() == SCENARIOS["two-ends"].scales


def test_make_rng():
    first = make_rng(1, "refined", 16, 0).random(4)
    assert (first == make_rng(1, "refined", 16, 0).random(4)).all()
    assert not (first == make_rng(1, "refined", 16, 1).random(4)).all()
    assert not (first == make_rng(1, "bilinear-l2", 16, 0).random(4)).all()


def test_trial_outcome_checks_accumulate():
    outcome = TrialOutcome()
    outcome.check("bound", True)
    outcome.check("bound", False)
    outcome.check("bound", True)
    assert outcome.checks == {"bound": False}


def test_run_writes_reports(tmp_path):
    config = ExperimentConfig("broad-value", scales=(4,), trials=2, seed=5, out=tmp_path / "a")
    result = run(config)
    assert result.exit_code == ExitCode.OK
    assert {p.name for p in result.paths} == {"broad-value.csv", "broad-value.json", "broad-value.svg"}
    assert [row["trial"] for row in result.rows] == [0, 1]
    assert all(0 <= row["ratio"] <= 1 for row in result.rows)
    summary = json.loads((tmp_path / "a" / "broad-value.json").read_text())
    assert summary["passed"] and summary["exit_code"] == 0
    assert summary["checks"] == {"bilinear": True, "exact_equals_enumeration": True, "triangle": True}
    assert summary["series"]["A=2"]["exponent"] is None
    assert summary["scale"] == "K"

    again = run(replace(config, out=tmp_path / "b"))
    assert (tmp_path / "a" / "broad-value.csv").read_bytes() == (tmp_path / "b" / "broad-value.csv").read_bytes()
    assert again.summary["series"] == result.summary["series"]


def test_run_without_writing(tmp_path):
    result = run(ExperimentConfig("broad-value", scales=(4,), out=tmp_path / "none"), write=False)
    assert result.paths == []
    assert not (tmp_path / "none").exists()


def test_verify_all_without_budget():
    summary = verify_all(0)
    assert summary.partial
    assert summary.exit_code == ExitCode.PARTIAL
    assert summary.vector == ["skipped"] * 12
    assert all(r.status == CriterionStatus.SKIPPED for r in summary.results)
    assert "partial run" in summary.table()


FULL_SIZE = {
    3: ((64, 256), 1),
    4: ((16, 64, 256), 50),
    5: ((256, 1024, 4096), 50),
    6: ((64, 256, 1024), 50),
    7: ((64, 256, 1024), 10),
    8: ((64, 256, 1024), 10),
    12: ((64, 256, 1024), 10),
}


def test_verify_all_plans_full_size_runs():
    summary = verify_all(0)
    for r in summary.results:
        if r.number in FULL_SIZE:
            assert (r.scales, r.trials) == FULL_SIZE[r.number]
        else:
            assert r.scales is None and r.parameters == "fixed"
    assert "R=256,1024,4096 x50" in summary.table()
    assert summary.as_dict()["criteria"][3]["scales"] == [16, 64, 256]


def test_verify_all_desk_and_scale_overrides():
    desk = verify_all(0, desk=True)
    assert desk.desk and "desk run" in desk.table()
    assert (desk.results[4].scales, desk.results[4].trials) == ((16, 64, 256), 5)
    mixed = verify_all(0, scales=(8, 16), overrides={5: (64, 128)})
    assert mixed.results[4].scales == (64, 128)
    assert mixed.results[5].scales == (8, 16)
    assert mixed.results[5].trials == 50
    assert mixed.results[0].scales is None
    with pytest.raises(ValueError):
        verify_all(0, overrides={9: (8,)})


def test_criteria_hand_their_parameters_to_the_runs(monkeypatch):
    seen = []

    def record(config):
        seen.append(config)
        raise RuntimeError("recorded")

    monkeypatch.setattr(hypdec.cli, "_outcome", record)
    for criterion in CRITERIA:
        if criterion.scales is None:
            continue
        scales, trials = criterion.parameters()
        with pytest.raises(RuntimeError):
            criterion.check(scales, trials, 0)
        assert (seen[-1].scales, seen[-1].trials) == FULL_SIZE[criterion.number]
    assert [config.scenario for config in seen] == ["wavepacket", "restriction2d", "bilinear-l2", "bilinear-l2", "linear-dyadic", "refined", "restriction"]
    assert seen[2].ensemble == "random-phase" and seen[3].delta == 1.0


def test_main_runs_a_scenario(tmp_path, capsys):
    code = main(["broad", "value", "--scales", "4", "--seed", "1", "--out", str(tmp_path)])
    assert code == 0
    assert "A=2" in capsys.readouterr().out
    assert (tmp_path / "broad-value.csv").exists()


def test_main_verify_all_budget(tmp_path):
    out = tmp_path / "verify.json"
    assert main(["verify-all", "--budget", "0", "--out", str(out)]) == ExitCode.PARTIAL
    data = json.loads(out.read_text())
    assert data["partial"]
    assert {c["status"] for c in data["criteria"]} == {"skipped"}


def test_main_verify_all_desk_with_criterion_scales(tmp_path):
    out = tmp_path / "verify.json"
    argv = ["verify-all", "--budget", "0", "--desk", "--criterion-scales", "5=2^8,2^6", "--out", str(out)]
    assert main(argv) == ExitCode.PARTIAL
    data = json.loads(out.read_text())
    assert data["desk"]
    assert data["criteria"][4]["scales"] == [64, 256]
    assert data["criteria"][5]["scales"] == [16, 32, 64]
    assert data["criteria"][0]["scales"] is None


@pytest.mark.parametrize(
    "argv",
    [
        ["run"],
        ["broad", "value", "--scales", "3"],
        ["run", "--config", "missing-config.ini"],
    ],
)
def test_main_reports_invalid_input(argv, capsys):
    assert main(argv) == ExitCode.INVARIANT
    assert "hypdec_lab:" in capsys.readouterr().err


def test_main_rejects_unknown_action():
    with pytest.raises(SystemExit):
        main(["broad", "shrink"])


def test_config_file_drives_run(tmp_path):
    path = Path(tmp_path) / "lab.ini"
    path.write_text(f"[experiment]\nscenario = broad-value\nscales = 4\nout = {tmp_path / 'out'}\n")
    assert main(["run", "--config", str(path)]) == 0
    assert (tmp_path / "out" / "broad-value.json").exists()
