import json
import re

import pytest
from click.testing import CliRunner

from maskedit.cli import main, parse_mask_spec, parse_size
from maskedit.masks import rasterize_rect


@pytest.fixture
def runner():
    return CliRunner()


PROC = ["--backend", "procedural", "--size", "16x16", "--steps", "8", "--scale", "4"]


def test_parse_size():
    assert parse_size("32x48") == (32, 48)
    with pytest.raises(Exception):
        parse_size("32")


def test_parse_mask_specs(tmp_path):
    rect = parse_mask_spec("rect:1,1,4,4", 8, 8)
    assert rect == rasterize_rect(1, 1, 4, 4, 8, 8)
    poly = parse_mask_spec("poly:1,1;6,1;3,6", 8, 8)
    assert poly.count() > 0
    ellipse = parse_mask_spec("ellipse:4,4,3,2", 8, 8)
    assert ellipse.count() > 0
    path = tmp_path / "m.json"
    path.write_text(json.dumps(rect.to_rle()))
    assert parse_mask_spec(str(path), 8, 8) == rect
    png = tmp_path / "m.png"
    png.write_bytes(rect.to_png_bytes())
    assert parse_mask_spec(str(png), 8, 8) == rect


def test_session_lifecycle(runner, tmp_path):
    sdir = str(tmp_path / "s")
    result = runner.invoke(main, PROC + ["session", "new", "--prompt", "a desk", "--out", sdir])
    assert result.exit_code == 0, result.output
    result = runner.invoke(
        main,
        PROC + ["session", "edit", sdir, "--prompt", "a mug", "--mask", "rect:4,4,11,11"],
    )
    assert result.exit_code == 0, result.output
    assert "layer 1 added" in result.output
    out_png = tmp_path / "render.png"
    result = runner.invoke(main, ["session", "render", sdir, "--out", str(out_png)])
    assert result.exit_code == 0
    assert out_png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    result = runner.invoke(
        main, PROC + ["session", "delete", sdir, "--layer", "1"]
    )
    assert result.exit_code == 0


def test_session_replay_checksum_stable(runner, tmp_path):
    sdir = str(tmp_path / "s")
    runner.invoke(main, PROC + ["session", "new", "--prompt", "a desk", "--out", sdir])
    runner.invoke(
        main,
        PROC + ["session", "edit", sdir, "--prompt", "a mug", "--mask", "rect:2,2,9,9"],
    )
    first = runner.invoke(main, ["session", "replay", sdir])
    second = runner.invoke(main, ["session", "replay", sdir])
    assert first.exit_code == 0 and second.exit_code == 0
    sum_a = re.search(r"checksum (\w+)", first.output).group(1)
    sum_b = re.search(r"checksum (\w+)", second.output).group(1)
    assert sum_a == sum_b
    assert "matches the saved image byte-exactly" in first.output


def test_bench_gen_deterministic(runner, tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    for out in (a, b):
        result = runner.invoke(
            main,
            ["bench", "gen", "--seed", "7", "--count", "3",
             "--out", str(out), "--canvas", "64x64", "--margin", "4"],
        )
        assert result.exit_code == 0, result.output
    assert a.read_text() == b.read_text()


def test_bench_run_and_eval(runner, tmp_path):
    suite = tmp_path / "suite.json"
    results = tmp_path / "results"
    report = tmp_path / "report.json"
    assert (
        runner.invoke(
            main,
            ["bench", "gen", "--seed", "3", "--count", "2",
             "--out", str(suite), "--canvas", "64x64", "--margin", "4"],
        ).exit_code
        == 0
    )
    run = runner.invoke(
        main, PROC + ["bench", "run", "--suite", str(suite), "--out", str(results)]
    )
    assert run.exit_code == 0, run.output
    ev = runner.invoke(
        main,
        ["bench", "eval", "--suite", str(suite), "--results", str(results),
         "--out", str(report)],
    )
    assert ev.exit_code == 0, ev.output
    payload = json.loads(report.read_text())
    assert payload["suite_averages"]["bleu2"] == pytest.approx(1.0)


def test_bench_run_rejects_canvas_mismatch(runner, tmp_path):
    suite = tmp_path / "suite.json"
    runner.invoke(
        main,
        ["bench", "gen", "--seed", "3", "--count", "1",
         "--out", str(suite), "--canvas", "64x64", "--margin", "4"],
    )
    result = runner.invoke(
        main,
        ["--backend", "procedural", "--size", "16x16",
         "bench", "run", "--suite", str(suite), "--out", str(tmp_path / "r")],
    )
    assert result.exit_code != 0
    assert "adjust --size" in result.output


def test_perf_compare_gain_column_consistent(runner, tmp_path):
    out = tmp_path / "perf.json"
    result = runner.invoke(
        main,
        ["--backend", "procedural", "--size", "12x12", "--steps", "6",
         "perf", "compare", "--edits", "2", "--runs", "2", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    rows = json.loads(out.read_text())["rows"]
    by_mode = {row["mode"]: row for row in rows}
    assert by_mode["bcg"]["forward_cost"] == 0
    assert by_mode["bcg"]["gain"] == 1.0
    for row in rows:
        assert row["gain"] == (row["omega"] + row["forward_cost"]) / row["omega"]
    # lb recomputes one forward pass per denoising step
    assert by_mode["lb"]["forward_cost"] == by_mode["lb"]["denoiser_calls"]


def test_cli_errors_exit_nonzero(runner, tmp_path):
    result = runner.invoke(main, ["session", "render", str(tmp_path), "--out", "x.png"])
    assert result.exit_code != 0
