"""Command-line surface for headless use, replay, benchmarking, and the
LB-vs-BCG performance comparison."""

from __future__ import annotations

import json
import time
from pathlib import Path

import click
import numpy as np

from .bench import (
    LayoutConstraints,
    Suite,
    evaluate_suite,
    generate_scenarios,
    run_scenario,
)
from .bench.evaluate import ScenarioResult
from .denoiser import BACKENDS, DenoiserConfig, make_denoiser
from .errors import MaskEditError
from .guidance import MODE_BCG, MODE_LB, run_background_denoise, run_edit_denoise
from .masks import Mask, rasterize_mask
from .memory import LayerMemory
from .session import EditSession, RgbImage, SessionConfig


def parse_size(value: str) -> tuple[int, int]:
    try:
        h, w = value.lower().split("x")
        return int(h), int(w)
    except ValueError as err:
        raise click.BadParameter(f"size must look like 32x32, got {value!r}") from err


def parse_mask_spec(spec: str, height: int, width: int) -> Mask:
    """rect:x0,y0,x1,y1 | poly:x,y;x,y;... | ellipse:cx,cy,rx,ry | file path."""
    if ":" in spec and spec.split(":", 1)[0] in ("rect", "poly", "ellipse"):
        kind, body = spec.split(":", 1)
        if kind == "rect":
            coords = [int(v) for v in body.split(",")]
            return rasterize_mask(("rect", *coords), width, height)
        if kind == "ellipse":
            coords = [float(v) for v in body.split(",")]
            return rasterize_mask(("ellipse", *coords), width, height)
        points = [tuple(float(v) for v in pair.split(",")) for pair in body.split(";")]
        return rasterize_mask(("poly", points), width, height)
    path = Path(spec)
    if not path.exists():
        raise click.BadParameter(f"mask file {spec!r} does not exist")
    if path.suffix == ".json":
        return Mask.from_rle(json.loads(path.read_text()))
    return Mask.from_image_bytes(path.read_bytes())


def config_from_options(backend, seed, size, steps, scale) -> SessionConfig:
    h, w = parse_size(size)
    return SessionConfig(
        latent_height=h,
        latent_width=w,
        decode_scale=scale,
        backend=backend,
        seed=seed,
        denoiser=DenoiserConfig(num_steps=steps),
    )


def load_session(directory: str) -> EditSession:
    path = Path(directory)
    if not (path / "manifest.json").exists():
        raise click.ClickException(f"no session manifest under {directory}")
    return EditSession.load(path)


def fit_mask_to_session(mask: Mask, session: EditSession) -> Mask:
    config = session.config
    if mask.shape == (config.latent_height, config.latent_width):
        return mask
    if mask.shape == (config.image_height, config.image_width):
        from .masks import downsample_mask

        return downsample_mask(mask, config.latent_height, config.latent_width)
    raise click.ClickException(
        f"mask {mask.shape} matches neither latent nor image resolution"
    )


@click.group()
@click.option("--backend", default="toy-dit", type=click.Choice(BACKENDS),
              envvar="MASKEDIT_BACKEND", show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--size", default="32x32", show_default=True,
              help="Latent grid as HxW.")
@click.option("--steps", default=20, type=int, show_default=True,
              help="Denoising steps per edit.")
@click.option("--scale", default=8, type=int, show_default=True,
              help="Decode upscale factor (image = latent x scale).")
@click.pass_context
def main(ctx, backend, seed, size, steps, scale):
    """Iterative mask-ordered image editing."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = config_from_options(backend, seed, size, steps, scale)


@main.group()
def session():
    """Create, edit, render, and replay sessions on disk."""


@session.command("new")
@click.option("--prompt", required=True, help="Background prompt.")
@click.option("--out", required=True, type=click.Path(), help="Session directory.")
@click.pass_context
def session_new(ctx, prompt, out):
    sess = EditSession.create(prompt, config=ctx.obj["config"])
    sess.save(out)
    click.echo(f"created session at {out} ({sess.render().checksum()[:12]})")


@session.command("edit")
@click.argument("directory", type=click.Path(exists=True))
@click.option("--prompt", required=True)
@click.option("--mask", "mask_spec", required=True,
              help="rect:x0,y0,x1,y1 | poly:... | ellipse:... | mask file")
@click.pass_context
def session_edit(ctx, directory, prompt, mask_spec):
    sess = load_session(directory)
    mask = parse_mask_spec(
        mask_spec, sess.config.latent_height, sess.config.latent_width
    )
    mask = fit_mask_to_session(mask, sess)
    image = sess.add_edit(prompt, mask)
    sess.save(directory)
    click.echo(f"layer {len(sess.memory) - 1} added ({image.checksum()[:12]})")


@session.command("delete")
@click.argument("directory", type=click.Path(exists=True))
@click.option("--layer", required=True, type=int)
def session_delete(directory, layer):
    sess = load_session(directory)
    image = sess.delete_edit(layer)
    sess.save(directory)
    click.echo(f"layer {layer} deleted ({image.checksum()[:12]})")


@session.command("render")
@click.argument("directory", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def session_render(directory, out):
    sess = load_session(directory)
    image = sess.render()
    Path(out).write_bytes(image.to_png_bytes())
    click.echo(f"wrote {out} ({image.checksum()[:12]})")


@session.command("replay")
@click.argument("directory", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None,
              help="Also write the replayed final image here.")
@click.option("--check/--no-check", default=True,
              help="Compare against the saved final image.")
def session_replay(directory, out, check):
    replayed = EditSession.replay(directory)
    image = replayed.render()
    if out:
        Path(out).write_bytes(image.to_png_bytes())
    click.echo(f"replayed image checksum {image.checksum()}")
    if check:
        saved = (Path(directory) / "image.png").read_bytes()
        if saved != image.to_png_bytes():
            raise click.ClickException("replay does NOT match the saved image")
        click.echo("replay matches the saved image byte-exactly")


@main.group()
def bench():
    """Generate and evaluate sequential-editing benchmark suites."""


@bench.command("gen")
@click.option("--seed", required=True, type=int)
@click.option("--count", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--canvas", default="256x256", show_default=True,
              help="Mask canvas as HxW (image resolution).")
@click.option("--margin", default=16, type=int, show_default=True)
def bench_gen(seed, count, out, canvas, margin):
    h, w = parse_size(canvas)
    constraints = LayoutConstraints(canvas_width=w, canvas_height=h, margin=margin)
    suite = generate_scenarios(seed, count, constraints)
    suite.save(out)
    hist = suite.step_histogram()
    click.echo(
        f"wrote {count} scenarios to {out} "
        f"(occlusion {suite.occlusion_mean():.4f}, steps {dict(sorted(hist.items()))})"
    )


@bench.command("run")
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Results directory.")
@click.pass_context
def bench_run(ctx, suite_path, out):
    suite = Suite.load(suite_path)
    config = ctx.obj["config"]
    canvas = (suite.constraints.canvas_height, suite.constraints.canvas_width)
    if (config.image_height, config.image_width) != canvas:
        raise click.ClickException(
            f"session renders {config.image_height}x{config.image_width} but the "
            f"suite canvas is {canvas[0]}x{canvas[1]}; adjust --size"
        )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for scenario in suite.scenarios:
        result = run_scenario(scenario, config)
        image_name = f"{scenario.scenario_id}.png"
        (out_dir / image_name).write_bytes(result.image.to_png_bytes())
        entries.append(
            {
                "id": scenario.scenario_id,
                "image": image_name,
                "layers": list(result.layer_labels),
            }
        )
    (out_dir / "results.json").write_text(
        json.dumps({"suite_seed": suite.seed, "results": entries}, indent=2)
    )
    click.echo(f"rendered {len(entries)} scenarios into {out}")


@bench.command("eval")
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True))
@click.option("--results", "results_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def bench_eval(suite_path, results_dir, out):
    import io

    from PIL import Image as PilImage

    suite = Suite.load(suite_path)
    results_dir = Path(results_dir)
    payload = json.loads((results_dir / "results.json").read_text())
    results = {}
    for entry in payload["results"]:
        img = PilImage.open(io.BytesIO((results_dir / entry["image"]).read_bytes()))
        pixels = np.asarray(img.convert("RGB"))
        results[entry["id"]] = ScenarioResult(
            scenario_id=entry["id"],
            image=RgbImage(pixels),
            layer_labels=tuple(entry["layers"]),
        )
    report = evaluate_suite(results, suite)
    report.save(out)
    click.echo(report.to_table())
    click.echo(f"wrote report to {out}")


@main.command("perf")
@click.argument("action", type=click.Choice(["compare"]))
@click.option("--edits", default=3, type=int, show_default=True)
@click.option("--runs", default=5, type=int, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Also write JSON here.")
@click.pass_context
def perf(ctx, action, edits, runs, out):
    """Run the same edit script in memory-read (bcg) and recompute (lb) modes
    and report measured counters plus wall time."""
    config = ctx.obj["config"]
    rows = []
    for mode in (MODE_BCG, MODE_LB):
        omega = forward = calls = 0
        walls = []
        for run in range(runs):
            backend = make_denoiser(config.backend, config.channels, config.denoiser)
            memory = LayerMemory()
            record, _ = run_background_denoise(
                "a plain backdrop", backend, config.denoiser, config.channels,
                config.latent_height, config.latent_width, config.seed + run,
            )
            memory.append(record)
            started = time.perf_counter()
            for e in range(edits):
                side = max(2, config.latent_height // 2)
                offset = (e * 3) % max(1, config.latent_height - side)
                mask = rasterize_mask(
                    ("rect", offset, offset, offset + side - 1, offset + side - 1),
                    config.latent_width, config.latent_height,
                )
                rec, rep = run_edit_denoise(
                    memory, f"object {e}", mask, backend, config.denoiser,
                    config.seed + run, mode=mode,
                )
                memory.append(rec)
                omega += rep.omega
                forward += rep.forward_cost
                calls += rep.denoiser_calls
            walls.append((time.perf_counter() - started) * 1000.0)
        rows.append(
            {
                "mode": mode,
                "edits": edits * runs,
                "denoiser_calls": calls,
                "omega": omega,
                "forward_cost": forward,
                "gain": (omega + forward) / omega,
                "wall_ms": float(np.mean(walls)),
            }
        )
    header = f"{'mode':<6} {'edits':>6} {'omega':>8} {'forward_cost':>13} {'gain':>8} {'wall_ms':>10}"
    click.echo(header)
    for row in rows:
        click.echo(
            f"{row['mode']:<6} {row['edits']:>6} {row['omega']:>8} "
            f"{row['forward_cost']:>13} {row['gain']:>8.4f} {row['wall_ms']:>10.2f}"
        )
    if out:
        Path(out).write_text(json.dumps({"rows": rows}, indent=2))


@main.command("serve")
@click.option("--host", default="127.0.0.1", envvar="MASKEDIT_HOST", show_default=True)
@click.option("--port", default=8787, type=int, envvar="MASKEDIT_PORT", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="Static directory to serve at / (the web client build).")
@click.pass_context
def serve(ctx, host, port, ui_dir):
    """Start the HTTP API (and optionally the static web client)."""
    import uvicorn

    from .server import create_app

    app = create_app(ctx.obj["config"])
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def run() -> None:
    try:
        main(obj={})
    except MaskEditError as err:  # engine errors exit nonzero with a message
        raise SystemExit(f"error: {err}")


if __name__ == "__main__":
    run()
