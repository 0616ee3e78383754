"""
End-to-end runs of the hofer command line
"""
import orjson
import pytest

from entry.config import get_settings
from entry.main import main


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def _report(out):
    return orjson.loads((out / "report.json").read_bytes())


def test_polytope_writes_figure_and_reports(tmp_path):
    assert main(["polytope", "--manifold", "cp2", "--out", str(tmp_path)]) == 0
    for name in ("polytope_cp2.csv", "polytope_cp2.svg", "report.json", "report.txt"):
        assert (tmp_path / name).exists(), name
    assert _report(tmp_path)["passed"] is True


def test_polytope_with_point_overlay(tmp_path):
    argv = ["polytope", "--manifold", "blowup", "--lambda", "0.5", "--overlay", "j_minus",
            "--samples", "500", "--out", str(tmp_path)]
    assert main(argv) == 0
    assert (tmp_path / "polytope_blowup_0.5_j_minus_points.csv").exists()


def test_corrupted_suite_fails(tmp_path):
    assert main(["verify", "--suite", "corrupted", "--samples", "500", "--out", str(tmp_path)]) == 1
    report = _report(tmp_path)
    assert report["passed"] is False
    assert report["results"]["first_failure"]["suite"] == "corrupted"


def test_refusal_for_2P(tmp_path):
    argv = ["certify", "--manifold", "cp2", "--hamiltonian", "2P", "--samples", "500", "--out", str(tmp_path)]
    assert main(argv) == 1
    certify = _report(tmp_path)["results"]["certify"]
    assert certify["passed"] is False
    assert "witness" in certify["refusal"]["details"]
    assert certify["refusal"]["error"] == "InsufficientPremises"
    assert "refus" in (tmp_path / "report.txt").read_text(encoding="utf-8").lower()


def test_bad_config_is_an_error(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("colour = blue\n", encoding="utf-8")
    assert main(["verify", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_unsupported_polytope_is_an_error(tmp_path):
    assert main(["polytope", "--manifold", "disk", "--out", str(tmp_path)]) == 2
    assert _report(tmp_path)["error"]["error"] == "Unsupported"


def test_certify_P_on_cp2_is_global(tmp_path):
    argv = ["certify", "--manifold", "cp2", "--hamiltonian", "P", "--samples", "1000", "--out", str(tmp_path)]
    assert main(argv) == 0
    verdict = _report(tmp_path)["results"]["certify"]["verdict"]
    assert verdict["scope"] == "globally"
    assert verdict["evidence"]["route"] == "A"
