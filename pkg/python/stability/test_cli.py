import json

import pytest

from .bitstream import BitSequence, read_bits, write_bits
from .cli import format_value, main


def parse_pairs(text: str) -> dict[str, str]:
    return dict(line.split("=", 1) for line in text.splitlines() if line)


@pytest.fixture
def balanced(tmp_path):
    path = tmp_path / "balanced.bits"
    path.write_text("0101")
    return path


def test_generate_to_stdout(capsys):
    code = main(["generate", "--source", "periodic", "--pattern", "01", "--n", "6", "--out", "-", "--format", "ascii01"])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out == "010101"


def test_generate_to_file(tmp_path, capsys):
    out = tmp_path / "x.bits"
    assert main(["generate", "--source", "bernoulli", "--p", "1/4", "--seed", "7", "--n", "100", "--out", str(out)]) == 0
    pairs = parse_pairs(capsys.readouterr().out)
    assert pairs["n"] == "100"
    assert len(read_bits(out, "packed")) == 100


def test_bias(balanced, capsys):
    assert main(["bias", "--in", str(balanced)]) == 0
    assert capsys.readouterr().out == "bias=0\n"


def test_bias_of_biased_input(tmp_path, capsys):
    path = tmp_path / "b.bits"
    path.write_text("1110")
    assert main(["bias", "--in", str(path)]) == 0
    assert parse_pairs(capsys.readouterr().out) == {"bias": "0.25"}


def test_select_writes_subsequence(tmp_path, capsys):
    x = tmp_path / "x.bits"
    out = tmp_path / "r.bits"
    write_bits(BitSequence.from_string("1111"), x, "packed")
    assert main(["select", "--rule", "transient:1", "--in", str(x), "--out", str(out), "--format", "ascii01"]) == 0
    pairs = parse_pairs(capsys.readouterr().out)
    assert pairs["sub_len"] == "2"
    assert pairs["halt_reason"] == "index_out_of_range"
    assert out.read_text() == "11"


def test_select_to_stdout_keeps_stdout_clean(balanced, capsys):
    assert main(["select", "--rule", "every:2", "--in", str(balanced), "--out", "-", "--format", "ascii01"]) == 0
    captured = capsys.readouterr()
    assert captured.out == "11"
    assert "sub_len=2" in captured.err


def test_select_with_rule_file(tmp_path, balanced, capsys):
    rule = tmp_path / "id.rule"
    rule.write_text("state 1: move +1 select halt=no -> 1,1,1\n")
    assert main(["select", "--rule", str(rule), "--in", str(balanced)]) == 0
    assert parse_pairs(capsys.readouterr().out)["sub_len"] == "4"


def test_complexity_and_deficiency(tmp_path, capsys):
    path = tmp_path / "zero.bits"
    path.write_text("0")
    assert main(["complexity", "--in", str(path)]) == 0
    assert parse_pairs(capsys.readouterr().out) == {"k_hat": "2", "n": "1", "estimator": "lz78"}
    assert main(["deficiency", "--in", str(path)]) == 0
    assert parse_pairs(capsys.readouterr().out)["deficiency"] == "0"


def test_block_entropy_flag(tmp_path, capsys):
    path = tmp_path / "zeros.bits"
    path.write_text("0" * 16)
    assert main(["complexity", "--in", str(path), "--estimator", "block_entropy", "--block", "1"]) == 0
    assert parse_pairs(capsys.readouterr().out)["k_hat"] == "10"


def test_bound(tmp_path, capsys):
    path = tmp_path / "x.bits"
    assert main(["generate", "--source", "uniform", "--seed", "1", "--n", "4096", "--out", str(path)]) == 0
    capsys.readouterr()
    assert main(["bound", "--in", str(path), "--rule", "identity", "--c", "1"]) == 0
    pairs = parse_pairs(capsys.readouterr().out)
    assert pairs["k_rule"] == "120"
    assert pairs["sub_len"] == "4096"
    assert pairs["satisfied"] in ("true", "false")


def test_bound_on_empty_selection_fails(balanced, capsys):
    assert main(["bound", "--in", str(balanced), "--rule", "halt"]) == 1
    assert "halt_flag" in capsys.readouterr().err


def test_curve(tmp_path, capsys):
    path = tmp_path / "x.bits"
    path.write_text("01" * 2048)
    assert main(["curve", "--in", str(path), "--stride", "1024"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4
    assert lines[-1] == "point=4096:-3080"


def test_validate_rule(tmp_path, capsys):
    path = tmp_path / "ok.rule"
    path.write_text("state 1: move -1 select halt=no -> 1,1,1\n")
    assert main(["validate-rule", "--rule", str(path)]) == 0
    pairs = parse_pairs(capsys.readouterr().out)
    assert pairs["k_rule_bits"] == "120"
    assert pairs["admissibility"] == "kolmogorov_loveland"


def test_validate_rule_names_undefined_state(tmp_path, capsys):
    path = tmp_path / "bad.rule"
    path.write_text("state 1: move +1 select halt=no -> 1,3,1\nstate 2: move +1 skip halt=no -> 1,1,1\n")
    assert main(["validate-rule", "--rule", str(path)]) == 1
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "undefined state 3" in captured.err


def test_missing_input_is_io_error(tmp_path, capsys):
    assert main(["bias", "--in", str(tmp_path / "missing.bits")]) == 2
    assert capsys.readouterr().out == ""


@pytest.mark.parametrize(
    "command, rule_ref, with_input",
    [
        ("select", "gone.rule", True),
        ("select", "file:gone.rule", True),
        ("bound", "gone.rule", True),
        ("bound", "file:gone.rule", True),
        ("validate-rule", "gone.rule", False),
    ],
)
def test_missing_rule_file_is_io_error(tmp_path, balanced, capsys, command, rule_ref, with_input):
    kind, _, name = rule_ref.rpartition(":")
    argv = [command, "--rule", f"{kind}:{tmp_path / name}" if kind else str(tmp_path / name)]
    if with_input:
        argv += ["--in", str(balanced)]
    assert main(argv) == 2
    assert capsys.readouterr().out == ""


def test_select_with_file_reference(tmp_path, balanced, capsys):
    rule = tmp_path / "id.rule"
    rule.write_text("state 1: move +1 select halt=no -> 1,1,1\n")
    assert main(["select", "--rule", f"file:{rule}", "--in", str(balanced)]) == 0
    assert parse_pairs(capsys.readouterr().out)["sub_len"] == "4"


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["bias", "--in", "x", "--bogus"],
        ["complexity", "--in", "x", "--estimator", "gzip"],
        [],
    ],
)
def test_usage_errors_exit_one(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().out == ""


def test_malformed_input_exit_one(tmp_path, capsys):
    path = tmp_path / "x.bits"
    path.write_text("01x1")
    assert main(["bias", "--in", str(path)]) == 1
    assert "byte offset 2" in capsys.readouterr().err


def test_experiment_and_calibrate(tmp_path, capsys):
    config = tmp_path / "exp.conf"
    config.write_text(
        "source = uniform\nseed = 2\nn = 4096\nrules = identity, transient:1-4, halt\n"
        "replicates = 3\nc = 0.5\noutput = out.json\nformat = json\n"
    )
    assert main(["experiment", "--config", str(config)]) == 0
    pairs = parse_pairs(capsys.readouterr().out)
    assert pairs["records"] == "18"
    records = json.loads((tmp_path / "out.json").read_text())
    assert len(records) == 18

    assert main(["experiment", "--config", str(config), "--out", "-", "--format", "csv"]) == 0
    captured = capsys.readouterr()
    assert captured.out.splitlines()[0].startswith("rule_id,k_rule_bits")
    assert "records=18" in captured.err

    assert main(["calibrate", "--config", str(config)]) == 0
    assert float(parse_pairs(capsys.readouterr().out)["c_hat"]) > 0


@pytest.mark.parametrize(
    "value, text",
    [(0.0, "0"), (3080.0, "3080"), (0.25, "0.25"), (True, "true"), (7, "7")],
)
def test_format_value(value, text):
    assert format_value(value) == text
