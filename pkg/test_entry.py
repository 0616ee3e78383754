"""
Tests for configuration, batching, error mapping and report writing
"""
import os

import orjson
import pytest

from entry.config import get_settings, load_config_file
from entry.core.certify import obstruction_record
from entry.core.reports import dumps_report, render_report, write_json_report
from entry.main import build_config, build_parser
from entry.models import Command, ManifoldChoice, RunConfig, RunReport
from entry.utils.batch_processing import chunk_list, parallel_process_batch
from entry.utils.error_handling import EXIT_ERROR, EXIT_FAIL, exit_code_for, remediation_hint
from entry.utils.file_utils import atomic_write_text
from entry.utils.string_utils import parse_key_value_lines, round_floats, round_significant
from hofer.errors import ConfigError, DomainViolation, InsufficientPremises
from hofer.geometry import ManifoldModel
from hofer.hamiltonians import hamiltonian_Q


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    for var in ("HOFER_SEED", "HOFER_SAMPLES", "HOFER_EPSILON", "HOFER_OUT"):
        monkeypatch.delenv(var, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def _config(argv):
    return build_config(build_parser().parse_args(argv))


def test_flags_win_over_file_and_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("HOFER_SEED", "3")
    monkeypatch.setenv("HOFER_EPSILON", "0.02")
    config = tmp_path / "run.cfg"
    config.write_text("# run\nseed = 11\nlambda = 0.3\nmanifold = blowup\n", encoding="utf-8")

    cfg = _config(["certify", "--config", str(config)])
    assert cfg.seed == 11
    assert cfg.lam == 0.3
    assert cfg.epsilon == 0.02

    cfg = _config(["certify", "--config", str(config), "--seed", "5"])
    assert cfg.seed == 5
    assert cfg.command is Command.CERTIFY


def test_unknown_config_key(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("sead = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_config_file(str(config))
    assert info.value.details["unknown"] == ["sead"]


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(str(tmp_path / "absent.cfg"))


def test_dashed_keys_are_read_as_flag_names(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("r1-blowup = 2.5\n", encoding="utf-8")
    assert load_config_file(str(config)) == {"r1_blowup": "2.5"}


def test_invalid_values_become_config_errors():
    with pytest.raises(ConfigError) as info:
        _config(["verify", "--epsilon", "-1"])
    assert any("epsilon" in p for p in info.value.details["problems"])


def test_blowup_lambda_default_and_range():
    cfg = RunConfig(command=Command.CERTIFY, manifold=ManifoldChoice.BLOWUP)
    assert cfg.lam == 0.5
    assert cfg.manifold_model().lam == 0.5
    with pytest.raises(ValueError):
        RunConfig(command=Command.CERTIFY, manifold=ManifoldChoice.BLOWUP, **{"lambda": 1.0})


def test_summary_uses_the_lambda_alias():
    cfg = RunConfig(command=Command.VERIFY, manifold=ManifoldChoice.BLOWUP, **{"lambda": 0.3})
    summary = cfg.summary()
    assert summary["lambda"] == 0.3
    assert "overlay" not in summary


def test_key_value_parsing_strips_comments():
    assert parse_key_value_lines("a = 1  # one\n\n# b = 2\nc=x=y") == {"a": "1", "c": "x=y"}


def test_round_floats():
    assert round_significant(1 / 3, 4) == 0.3333
    assert round_floats({"x": [0.1 + 0.2, True, 2], "y": float("inf")}) == {"x": [0.3, True, 2], "y": float("inf")}


def test_parallel_batches_keep_input_order():
    items = list(range(53))
    assert parallel_process_batch(items, lambda x: x * x, max_workers=4, chunk_size=5) == [x * x for x in items]
    assert chunk_list(items, 20)[-1] == items[40:]


def test_exit_codes_and_hints():
    assert exit_code_for(InsufficientPremises("no route")) == EXIT_FAIL
    assert exit_code_for(DomainViolation("bad")) == EXIT_ERROR
    assert exit_code_for(RuntimeError("boom")) == EXIT_ERROR
    assert remediation_hint(InsufficientPremises("x", {"hint": "add a map"})) == "add a map"
    assert remediation_hint(ConfigError("x"))


def test_reports_are_deterministic(tmp_path):
    report = RunReport(command=Command.VERIFY, config={"seed": 7}, passed=True,
                       results={"value": 0.1 + 0.2, "zeta": [1.0 / 3]})
    assert dumps_report(report) == dumps_report(report)
    data = orjson.loads(dumps_report(report))
    assert list(data) == sorted(data)
    assert data["results"]["value"] == 0.3

    path = write_json_report(report, str(tmp_path / "out"))
    with open(path, "rb") as f:
        assert f.read() == dumps_report(report)
    assert render_report(report).startswith("hofer verify: PASS")


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "nested" / "report.txt"
    atomic_write_text(str(target), "first")
    atomic_write_text(str(target), "second")
    assert target.read_text(encoding="utf-8") == "second"
    assert os.listdir(target.parent) == ["report.txt"]


def test_obstruction_record_carries_the_sampled_volume():
    record = obstruction_record(hamiltonian_Q(ManifoldModel.blowup(0.97)), 0.1, 4_000, 7)
    for side in record["sides"].values():
        evidence = side["certificate"]["evidence"]
        assert evidence["region_volume_mc"] == pytest.approx(evidence["region_volume"],
                                                             abs=4 * evidence["region_volume_stderr"] + 1e-3)
    exact_only = obstruction_record(hamiltonian_Q(ManifoldModel.blowup(0.97)), 0.1, 0, 7)
    assert "region_volume_mc" not in exact_only["sides"]["-"]["certificate"]["evidence"]
