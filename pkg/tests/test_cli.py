import re

import pytest

from crabgate.cli import build_parser, main


def test_missing_layout_is_usage_error(capsys):
    assert main(["run", "--inputs", "11"]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_command_and_bad_values(capsys):
    assert main(["fly"]) == 2
    assert main(["run", "--layout", "or.map", "--inputs", "12"]) == 2
    assert main(["run", "--layout", "or.map", "--p", "0"]) == 2
    assert main(["run", "--layout", "or.map", "--seed", "-4"]) == 2


def test_snapshots_need_an_output_directory(capsys):
    assert main(["run", "--layout", "or.map", "--snap-every", "5", "--max-steps", "5"]) == 2


def test_missing_layout_file_is_config_error(tmp_path, capsys):
    assert main(["run", "--layout", str(tmp_path / "none.map")]) == 1
    assert "none.map" in capsys.readouterr().err


def test_malformed_layout_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.map"
    bad.write_text("MAP\n#Q#\nFLOW\n...\n")
    assert main(["run", "--layout", str(bad)]) == 1
    assert "column 2" in capsys.readouterr().err


def test_truth_table_or(capsys):
    code = main(["truth-table", "--layout", "or.map", "--p", "20", "--lambda", "0",
                 "--agents", "40", "--trials", "2", "--seed", "7"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    table = {tuple(l.split("|")[0].split()): l.split("|")[1].strip() for l in lines[1:]}
    assert table == {("0", "0"): "0", ("0", "1"): "1", ("1", "0"): "1", ("1", "1"): "1"}


def test_run_writes_snapshots_and_csv(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--layout", "and.map", "--inputs", "11", "--agents", "40", "--p", "20",
                 "--seed", "1", "--snap-every", "50", "--max-steps", "120", "--out", str(out)])
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["counts.csv", "frame_000000.ppm", "frame_000050.ppm", "frame_000100.ppm",
                     "telemetry.csv"]
    assert (out / "counts.csv").read_text().startswith("output,count\n1,")
    assert "decision" in capsys.readouterr().out


def test_seed_falls_back_to_environment(tmp_path, monkeypatch, capsys):
    args = ["run", "--layout", "and.map", "--inputs", "10", "--max-steps", "40"]
    monkeypatch.setenv("CRABGATE_SEED", "3")
    main(args + ["--out", str(tmp_path / "env")])
    monkeypatch.delenv("CRABGATE_SEED")
    main(args + ["--seed", "3", "--out", str(tmp_path / "flag")])
    for name in ("counts.csv", "telemetry.csv"):
        assert (tmp_path / "env" / name).read_bytes() == (tmp_path / "flag" / name).read_bytes()
    monkeypatch.setenv("CRABGATE_SEED", "not-a-number")
    assert main(args) == 2


def test_sweep_noise_csv(tmp_path):
    out = tmp_path / "noise.csv"
    code = main(["sweep-noise", "--p", "1", "20", "--lambda", "0", "0.2", "--trials", "1",
                 "--max-steps", "20", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "p,lambda,successes,trials,performance"
    assert [l.split(",")[:2] for l in lines[1:]] == [["1", "0.0"], ["1", "0.2"],
                                                      ["20", "0.0"], ["20", "0.2"]]


def test_sweep_noise_rejects_out_of_range_lambda(capsys):
    assert main(["sweep-noise", "--lambda", "0.5", "--trials", "1"]) == 1


def test_sweep_perturbation_stdout(capsys):
    code = main(["sweep-perturbation", "--p", "1", "31", "--agents", "5", "--size", "12", "12",
                 "--warmup", "2", "--measure", "3", "--seed", "2"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "p,inherent_perturbation,polarization,density,lambda,seed"
    assert lines[1].startswith("1,0.0,") and lines[2].startswith("31,1.0,")
    assert main(["sweep-perturbation", "--lambda", "0.1"]) == 2


@pytest.mark.parametrize("fmt, magic", [("ppm", b"P6\n"), ("svg", b"<svg")])
def test_render_command(tmp_path, fmt, magic):
    out = tmp_path / f"f.{fmt}"
    assert main(["render", "--layout", "or.map", "--frame", "12", "--format", fmt,
                 "--out", str(out)]) == 0
    assert out.read_bytes().startswith(magic)


def test_help_lists_every_flag_with_defaults():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    text = sub["run"].format_help()
    for flag in ("--layout", "--inputs", "--agents", "--p", "--alpha", "--lambda", "--seed",
                 "--max-steps", "--wall-weight", "--decision", "--out", "--snap-every",
                 "--format"):
        assert flag in text
    flat = " ".join(text.split())
    assert re.search(r"--alpha DEG angular range [^(]*\(default: 120\.0\)", flat)
    assert "--trials" in sub["truth-table"].format_help()


def test_layout_file_is_not_modified(tmp_path):
    from importlib import resources
    src = (resources.files("crabgate") / "layouts" / "or.map").read_text()
    path = tmp_path / "or.map"
    path.write_text(src)
    before = path.read_bytes()
    main(["run", "--layout", str(path), "--max-steps", "10"])
    assert path.read_bytes() == before
