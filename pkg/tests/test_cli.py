import hashlib
from pathlib import Path

import pytest

from cli.main import EXIT_DATA_ERROR, EXIT_FAIL, EXIT_PASS, main
from moment_common.model import CheckKind, ReportFile, SequenceFile, Verdict


@pytest.fixture
def workspace(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    monkeypatch.chdir(tmp_path)
    return tmp_path


def generate_poisson(name: str = "poisson.json") -> None:
    assert main(["generate", "poisson", name, "--values", "1,2", "--truncation", "4"]) == EXIT_PASS


def test_generate_then_check_passes(workspace: Path, capsys: pytest.CaptureFixture[str]) -> None:
    generate_poisson()
    file = SequenceFile.model_validate_json((workspace / "poisson.json").read_bytes())
    assert file.basis == "correlation"
    assert file.provenance is not None
    assert main(["check", "corr-multi", "poisson.json"]) == EXIT_PASS
    assert "corr-multi: pass" in capsys.readouterr().out


def test_converted_poisson_is_not_simple(workspace: Path, capsys: pytest.CaptureFixture[str]) -> None:
    generate_poisson()
    assert main(["convert", "corr-to-moment", "poisson.json", "moments.json"]) == EXIT_PASS
    assert main(["check", "simple-config", "moments.json"]) == EXIT_FAIL
    out = capsys.readouterr().out
    assert "simple-config: fail" in out
    assert "  failed: diagonal[s0]" in out
    assert main(["check", "multi-config", "moments.json"]) == EXIT_PASS


def test_sub_probability_is_not_a_probability(workspace: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["generate", "fixed-measure", "m.json", "--values", "0.3,0.4", "--truncation", "4"]) == EXIT_PASS
    assert main(["check", "subprob", "m.json"]) == EXIT_PASS
    assert main(["check", "prob", "m.json"]) == EXIT_FAIL
    assert "failed: unit-total-mass" in capsys.readouterr().out


def test_convert_round_trip(workspace: Path) -> None:
    generate_poisson()
    assert main(["convert", "corr-to-moment", "poisson.json", "moments.json"]) == EXIT_PASS
    assert main(["convert", "moment-to-corr", "moments.json", "back.json"]) == EXIT_PASS
    original = SequenceFile.model_validate_json((workspace / "poisson.json").read_bytes())
    back = SequenceFile.model_validate_json((workspace / "back.json").read_bytes())
    assert back.components == original.components


def test_convert_records_the_conversion(workspace: Path) -> None:
    generate_poisson()
    assert main(["convert", "corr-to-moment", "poisson.json", "moments.json"]) == EXIT_PASS
    assert main(["convert", "moment-to-corr", "moments.json", "back.json"]) == EXIT_PASS
    original = SequenceFile.model_validate_json((workspace / "poisson.json").read_bytes())
    moments = SequenceFile.model_validate_json((workspace / "moments.json").read_bytes())
    back = SequenceFile.model_validate_json((workspace / "back.json").read_bytes())
    assert original.provenance is not None
    assert original.provenance.conversions == ()
    assert moments.provenance is not None
    assert moments.provenance.model == original.provenance.model
    (step,) = moments.provenance.conversions
    assert step.direction == "corr-to-moment"
    assert step.source_digest == hashlib.sha256((workspace / "poisson.json").read_bytes()).hexdigest()
    assert back.provenance is not None
    assert [entry.direction for entry in back.provenance.conversions] == ["corr-to-moment", "moment-to-corr"]


def test_convert_rejects_the_wrong_basis(workspace: Path) -> None:
    generate_poisson()
    assert main(["convert", "corr-to-moment", "poisson.json", "moments.json"]) == EXIT_PASS
    assert main(["convert", "corr-to-moment", "moments.json", "again.json"]) == EXIT_DATA_ERROR
    assert main(["check", "corr-multi", "moments.json"]) == EXIT_DATA_ERROR


def test_bernoulli_file_has_empty_diagonal(workspace: Path) -> None:
    assert main(["generate", "bernoulli", "b.json", "--values", "0.3,0.5", "--truncation", "2"]) == EXIT_PASS
    file = SequenceFile.model_validate_json((workspace / "b.json").read_bytes())
    second = next(block for block in file.components if block.order == 2)
    assert [entry.index for entry in second.entries] == [("s0", "s1")]


def test_sampled_generation_is_reproducible(workspace: Path) -> None:
    arguments = ["--values", "1,2", "--truncation", "3", "--samples", "200", "--seed", "7"]
    assert main(["generate", "poisson", "a.json", *arguments]) == EXIT_PASS
    assert main(["generate", "poisson", "b.json", *arguments]) == EXIT_PASS
    assert (workspace / "a.json").read_bytes() == (workspace / "b.json").read_bytes()


def test_sampled_generation_needs_a_seed(workspace: Path) -> None:
    arguments = ["--values", "1,2", "--truncation", "3", "--samples", "200"]
    assert main(["generate", "poisson", "a.json", *arguments]) == EXIT_DATA_ERROR


def test_report_file(workspace: Path) -> None:
    generate_poisson()
    assert main(["check", "corr-multi", "poisson.json", "--report", "report.json", "--test-set",
                 "indicators+random:2", "--seed", "3"]) == EXIT_PASS
    report = ReportFile.model_validate_json((workspace / "report.json").read_bytes())
    assert report.input_digest == hashlib.sha256((workspace / "poisson.json").read_bytes()).hexdigest()
    assert report.report.kind == CheckKind.CORR_MULTI
    assert report.report.verdict == Verdict.PASS
    assert report.config.test_set.random_count == 2
    assert report.report.test_set[-2:] == ("random[0]", "random[1]")


def test_verify(workspace: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["verify", "propconv", "--cases", "3"]) == EXIT_PASS
    assert "propconv: max error" in capsys.readouterr().out
    assert main(["verify", "nope"]) == EXIT_DATA_ERROR


@pytest.mark.parametrize("argv", [
    [],
    ["check"],
    ["check", "nope", "x.json"],
    ["convert", "sideways", "a.json", "b.json"],
    ["generate", "poisson", "x.json", "--values", "1,a", "--truncation", "2"],
    ["check", "subprob", "x.json", "--quiet", "--verbose"],
])
def test_usage_errors(workspace: Path, argv: list[str]) -> None:
    assert main(argv) == EXIT_DATA_ERROR


def test_data_errors(workspace: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    assert main(["check", "subprob", "missing.json"]) == EXIT_DATA_ERROR
    assert main(["generate", "fixed-measure", "m.json", "--values", "0.3,0.4", "--truncation", "4"]) == EXIT_PASS
    assert main(["check", "subprob", "m.json", "--degree", "3"]) == EXIT_DATA_ERROR
    assert main(["check", "subprob", "m.json", "--test-set", "everything"]) == EXIT_DATA_ERROR
    (workspace / "broken.json").write_text("{\"schema_version\": 1}")
    assert main(["check", "subprob", "broken.json"]) == EXIT_DATA_ERROR
    monkeypatch.setenv("RMM_THREADS", "none")
    assert main(["check", "subprob", "m.json"]) == EXIT_DATA_ERROR
