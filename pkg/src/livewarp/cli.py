"""Command line interface: render, eval, bench, serve, make-dataset."""

from __future__ import annotations

import asyncio
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .dataset import load_stream, save_color_png, select_keyframes, write_dataset
from .engine import RenderConfig, Renderer
from .fusion import DepthErrorModel
from .protocol import pose_from_seven
from .store import KeyframeStore


def _model_options(f):
    f = click.option("--band-kappa", default=0.01, show_default=True,
                     help="Fusion band half-width coefficient (band = kappa*d^2).")(f)
    f = click.option("--delta-a", default=1.0, show_default=True)(f)
    f = click.option("--delta-b", default=0.0, show_default=True)(f)
    f = click.option("--delta-c", default=0.0, show_default=True)(f)
    f = click.option("--strict-paper-delta", is_flag=True,
                     help="Use the depth error curve itself as the fusion band.")(f)
    return f


def _render_options(f):
    f = click.option("--num-views", "-N", default=15, show_default=True)(f)
    f = click.option("--tile-size", default=32, show_default=True)(f)
    f = click.option("--coverage-downsample", default=8, show_default=True)(f)
    f = click.option("--cache-capacity", default=64, show_default=True)(f)
    f = click.option("--encode-budget", default=2, show_default=True)(f)
    f = click.option("--temporal-blend", default=0.1, show_default=True)(f)
    f = click.option("--conf-k", default=0.05, show_default=True)(f)
    f = click.option("--depth-near", default=0.2, show_default=True)(f)
    f = click.option("--depth-far", default=6.0, show_default=True)(f)
    f = _model_options(f)
    return f


def _build_config(kw) -> RenderConfig:
    model = DepthErrorModel(
        a=kw.pop("delta_a"), b=kw.pop("delta_b"), c=kw.pop("delta_c"),
        band_kappa=kw.pop("band_kappa"),
        strict_paper_mode=kw.pop("strict_paper_delta"),
    )
    return RenderConfig(
        num_views=kw.pop("num_views"),
        tile_size=kw.pop("tile_size"),
        coverage_downsample=kw.pop("coverage_downsample"),
        cache_capacity=kw.pop("cache_capacity"),
        encode_budget=kw.pop("encode_budget"),
        temporal_blend=kw.pop("temporal_blend"),
        conf_k=kw.pop("conf_k"),
        depth_near=kw.pop("depth_near"),
        depth_far=kw.pop("depth_far"),
        model=model,
    )


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Live RGB-D novel view synthesis."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--dataset", "-d", required=True, type=click.Path(exists=True))
@click.option("--pose", required=True, help='Target pose "tx ty tz qx qy qz qw".')
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--mode", default="color", type=click.Choice(["color", "depth", "confidence"]))
@click.option("--warp", default="forward", type=click.Choice(["forward", "deferred"]))
@_render_options
def render(dataset, pose, out, mode, warp, **kw):
    """Render one novel view offline and write it as PNG."""
    config = _build_config(kw)
    target = pose_from_seven(pose.split())
    frames = load_stream(dataset)
    store = KeyframeStore()
    for kf in select_keyframes(frames):
        store.insert(kf)
    renderer = Renderer(store, frames[0].intrinsics, config)
    renderer.budget.max_encodes_per_frame = len(store)  # offline: no build-up
    result = renderer.render(target, mode=mode, warp=warp)
    save_color_png(Path(out), result.image)
    click.echo(f"wrote {out} ({len(store)} keyframes, {len(result.selection.ids)} views used)")


@main.command("eval")
@click.option("--dataset", "-d", required=True, type=click.Path(exists=True))
@click.option("--holdout", default="every:10", show_default=True,
              help="'every:K' or 'indices:i,j,...'.")
@click.option("--mode", "warp", default="forward", type=click.Choice(["forward", "deferred"]))
@click.option("--out", "-o", type=click.Path(), default=None)
@click.option("--dump-dir", type=click.Path(), default=None)
@_render_options
def eval_cmd(dataset, holdout, warp, out, dump_dir, **kw):
    """Render held-out views and report PSNR/L1/SSIM."""
    from .evalharness import parse_holdout_spec, run_eval

    config = _build_config(kw)
    frames = load_stream(dataset)
    indices = parse_holdout_spec(holdout, len(frames))
    report = run_eval(frames, indices, warp=warp, config=config, dump_dir=dump_dir)
    text = report.to_json()
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


@main.command()
@click.option("--dataset", "-d", required=True, type=click.Path(exists=True))
@click.option("--frames", default=256, show_default=True)
@click.option("--out", "-o", type=click.Path(), default=None)
@_render_options
def bench(dataset, frames, out, **kw):
    """Per-stage timing over a scripted camera run (forward and deferred)."""
    from .bench import run_benchmark

    config = _build_config(kw)
    stream = load_stream(dataset)
    keyframes = list(select_keyframes(stream))
    report = run_benchmark(keyframes, frame_count=frames, config=config)
    click.echo(report.format_table())
    if out:
        Path(out).write_text(report.to_json())
        click.echo(f"wrote {out}")


@main.command()
@click.option("--dataset", "-d", required=True, type=click.Path(exists=True))
@click.option("--listen", default="127.0.0.1:8765", show_default=True)
@click.option("--replay-fps", default=30.0, show_default=True,
              help="Replay the dataset as a timed live stream (0 = ingest instantly).")
@click.option("--render-fps", default=15.0, show_default=True)
@click.option("--width", default=640, show_default=True)
@click.option("--height", default=480, show_default=True)
@_render_options
def serve(dataset, listen, replay_fps, render_fps, width, height, **kw):
    """Serve interactive rendering over a websocket."""
    from .service import RenderService

    config = _build_config(kw)
    host, _, port = listen.partition(":")
    service = RenderService.from_dataset(
        dataset, width=width, height=height, render_fps=render_fps,
        replay_fps=replay_fps, config=config,
    )
    click.echo(f"listening on ws://{host}:{port}")
    try:
        asyncio.run(service.serve(host, int(port)))
    except KeyboardInterrupt:
        click.echo("bye")


@main.command("make-dataset")
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--frames", default=70, show_default=True)
@click.option("--width", default=320, show_default=True)
@click.option("--height", default=240, show_default=True)
def make_dataset(out, frames, width, height):
    """Generate the synthetic textured-room dataset."""
    from .geometry import Intrinsics
    from .synthetic import BoxRoomScene, make_frames, orbit_poses

    K = Intrinsics(fx=0.9375 * width, fy=0.9375 * width,
                   cx=(width - 1) / 2, cy=(height - 1) / 2,
                   width=width, height=height)
    poses = orbit_poses(frames)
    write_dataset(Path(out), make_frames(poses, K, BoxRoomScene()))
    click.echo(f"wrote {frames} frames to {out}")


if __name__ == "__main__":
    main()
