import math

import pytest

from fuchsmcf import cli_io
from fuchsmcf.cli_io import ConfigError, RunConfig, emit_plot, emit_series, main, parse_config, serialize_config
from fuchsmcf.flow_engine import run

SMALL_CFG = "Nx = 32\nNy = 17\nprofile = sine\namplitude = 0.1\noffset = 0.3\nt_max = 0.2\n"


@pytest.fixture(scope="module")
def small_run():
    return run(parse_config(SMALL_CFG))


def test_parse_negative_a0():
    with pytest.raises(ConfigError) as info:
        parse_config("a0 = -1")
    assert str(info.value) == "line 1: a0 must be > 0"
    assert info.value.line == 1


@pytest.mark.parametrize(
    "text, needle",
    [
        ("Nx = 32\nbogus = 1\n", "line 2: unknown key 'bogus'"),
        ("cfl = 0.1\ncfl = 0.2\n", "line 2: duplicate key"),
        ("t_max = soon\n", "line 1: cannot parse t_max"),
        ("just words\n", "line 1: expected 'key = value'"),
        ("profile = file\n", "init_file"),
    ],
)
def test_parse_errors(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_parse_comments_and_defaults():
    cfg = parse_config("# header\n\nkx = 2   # wave number\nstop_on_converge = false\n")
    assert cfg.kx == 2.0 and cfg.stop_on_converge is False and cfg.Nx == 128 and cfg.Ny == 64


def test_config_round_trip():
    cfg = RunConfig(profile="bump", amplitude=0.05, offset=0.5, kx=1.0, C=0.3, t_max=math.pi, seed=7)
    assert parse_config(serialize_config(cfg)) == cfg


def test_empty_series_writes_nothing(tmp_path):
    path = tmp_path / "s.csv"
    with pytest.raises(ValueError):
        emit_series([], path)
    assert not path.exists()


def test_series_format(tmp_path, small_run):
    _, records = small_run
    path = tmp_path / "s.csv"
    emit_series(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(cli_io.SERIES_HEADER)
    assert len(lines) == len(records) + 1
    row = lines[1].split(",")
    assert len(row) == len(cli_io.SERIES_HEADER) and row[8] in ("0", "1")
    assert float(row[2]) == records[0].theta_min


def test_summary_keys(small_run):
    summary, _ = small_run
    text = cli_io.summary_text(summary, {"classification": "graph-preserved"})
    keys = [line.split(" = ")[0] for line in text.splitlines()]
    assert keys[0] == "outcome" and "compliance" in keys and keys[-1] == "classification"
    assert not any(k.startswith("final.") for k in keys)


@pytest.mark.parametrize("kind", ["height-decay", "angle-bound", "probe"])
def test_plot_kinds(tmp_path, small_run, kind):
    _, records = small_run
    for recs in (records, records[:1]):
        path = tmp_path / f"{kind}.svg"
        emit_plot(recs, kind, path)
        svg = path.read_text()
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>") and "polyline" in svg


def test_plot_rejects_unknown_kind(tmp_path, small_run):
    with pytest.raises(ValueError, match="unknown plot kind"):
        emit_plot(small_run[1], "pie", tmp_path / "x.svg")


def test_flow_outputs_deterministic(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL_CFG)
    outs = []
    for k in range(2):
        s, m = tmp_path / f"s{k}.csv", tmp_path / f"m{k}.txt"
        assert main(["flow", "--config", str(cfg), "--series", str(s), "--summary", str(m)]) == 0
        outs.append((s.read_bytes(), m.read_bytes()))
    assert outs[0] == outs[1]


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("a0 = -1\n")
    assert main(["flow", "--config", str(bad)]) == 2
    assert "line 1: a0 must be > 0" in capsys.readouterr().err
    assert main(["flow", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["barrier", "--a0", "-1"]) == 2
    assert main(["angle-ode", "--a0", "1", "--eps", "1.5"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["barrier", "--a0", "1", "--t-max", "0.5"]) == 0
    assert "R(0.5) = 0.419885257562" in capsys.readouterr().out
    assert main(["group", "--check", "--points", "50"]) == 0


def test_runtime_failure_exit(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL_CFG)
    out = tmp_path / "no" / "such" / "dir" / "s.csv"
    assert main(["flow", "--config", str(cfg), "--series", str(out)]) == 3


def test_verify_tolerance_exit(monkeypatch):
    monkeypatch.setattr(cli_io, "_check", lambda lines, name, value, tol, ok=None: False)
    assert main(["group", "--check", "--points", "5"]) == 4


def test_probe_command(tmp_path, capsys):
    cfg = tmp_path / "probe.cfg"
    cfg.write_text(SMALL_CFG)
    plot = tmp_path / "p.svg"
    assert main(["probe", "--config", str(cfg), "--plot", str(plot)]) == 0
    out = capsys.readouterr().out
    assert "classification = graph-preserved" in out
    assert "|a| at argmin Theta" in plot.read_text()


def test_curve_output(tmp_path):
    path = tmp_path / "phi.csv"
    assert main(["angle-ode", "--a0", "1", "--eps", "0.1", "--t-max", "1", "--dt", "0.01",
                 "--output", str(path)]) == 0
    last = path.read_text().splitlines()[-1].split(",")
    assert float(last[0]) == pytest.approx(1.0) and float(last[1]) == pytest.approx(0.12220444375532417)
