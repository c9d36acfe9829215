import functools
import logging
import sys
import time
from pathlib import Path

import click
from dotenv import load_dotenv

from utils.env import configure_threads

# thread caps must be in the environment before numpy loads its BLAS
load_dotenv()
configure_threads()

import numpy as np  # noqa: E402
from rich.console import Console  # noqa: E402
from rich.table import Table  # noqa: E402

from analysis.diagnostics import (  # noqa: E402
    attention_map, attention_overlay, attention_trajectory, decomposition_grid, motion_style_cosine,
    normalize_map, tile_grid,
)
from analysis.frechet import evaluate_frechet, frechet_distance, real_clip_stats  # noqa: E402
from cli.bench import parse_layer, run_bench  # noqa: E402
from cli.gradcheck_suite import SCOPES, run_suite, worst_offender  # noqa: E402
from models.generator import GeneratorNet  # noqa: E402
from msgv_types.errors import (  # noqa: E402
    CheckpointError, ConfigError, GradCheckError, NonFiniteError,
)
from msgv_types.types import RunConfig  # noqa: E402
from msgv_types.utils import latest_checkpoint  # noqa: E402
from synthetic.dataset import DATASET_KINDS, dump_dataset, make_dataset, read_manifest  # noqa: E402
from training.ablation import run_ablation  # noqa: E402
from training.acceptance import DEFAULT_SEEDS, run_acceptance  # noqa: E402
from training.checkpoint import load_checkpoint  # noqa: E402
from training.trainer import build_state, load_generator, restore_state, run_training  # noqa: E402
from utils.utils import parse_sweep, parse_times, setup_logging, write_pgm, write_ppm  # noqa: E402

VERSION = "0.1.0"
BASE_FPS = 25.0
ANALYSES = ("cosine", "trajectory", "attmap", "grid", "frechet")

logger = logging.getLogger("msgv")


def exit_codes(fn):
    """Map library errors onto the documented exit codes: 2 config/usage, 3 numeric, 4 I/O."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return fn(*args, **kwargs)
        except ConfigError as err:
            click.echo(f"config error: {err}", err=True)
            ctx.exit(2)
        except (NonFiniteError, GradCheckError) as err:
            click.echo(f"numeric error: {err}", err=True)
            ctx.exit(3)
        except (CheckpointError, OSError) as err:
            click.echo(f"i/o error: {err}", err=True)
            ctx.exit(4)
        except ValueError as err:
            click.echo(f"error: {err}", err=True)
            ctx.exit(2)

    return wrapper


def _checkpoint_path(path: str) -> Path:
    """A checkpoint file, or the newest checkpoint inside a run directory."""
    path = Path(path)
    if path.is_dir():
        found = latest_checkpoint(path)
        if found is None:
            raise FileNotFoundError(f"no checkpoint in {path}")
        return found
    return path


def _top_layer(generator: GeneratorNet, index: int) -> str:
    return f"b{generator.cfg.resolution}.conv{index}"


@click.group(invoke_without_command=True)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def cli(ctx, verbose):
    """msgv - motion-style video GAN at desk scale"""
    setup_logging(verbose)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@cli.command()
def version():
    """Show the version"""
    click.echo(f"msgv v{VERSION}")


@cli.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--resume", "resume", type=click.Path(), default=None,
              help="Checkpoint (or run directory) to continue from.")
@click.option("--steps", type=int, default=None, help="Override total_steps.")
@exit_codes
def train(config_path, out_dir, resume, steps):
    """Train on the configured synthetic dataset"""
    config = RunConfig.from_file(config_path)
    if resume:
        state = restore_state(load_checkpoint(_checkpoint_path(resume)))
        if state.config.to_text() != config.to_text():
            logger.warning("resuming with the checkpoint's config; %s is only used for total_steps", config_path)
    else:
        state = build_state(config)
    total = steps if steps is not None else config.train.total_steps
    run_training(state, out_dir, total_steps=total)
    click.echo(f"trained to step {state.step}; outputs in {out_dir}")


@cli.command()
@click.argument("ckpt", type=click.Path())
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--frames", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--fps", type=click.FloatRange(min=0, min_open=True), default=BASE_FPS, show_default=True,
              help="Frame i is drawn at time i*25/fps.")
@click.option("--seed", type=int, default=0, show_default=True)
@exit_codes
def sample(ckpt, out_dir, frames, fps, seed):
    """Sample one clip of arbitrary length as PPM frames"""
    generator, _ = load_generator(_checkpoint_path(ckpt))
    times = np.arange(frames, dtype=np.float64) * (BASE_FPS / fps)
    z_c, track = generator.sample_latents(np.random.default_rng(seed), float(times[-1]))

    start = time.perf_counter()
    clip = generator.generate_clip(z_c, track, times).clip()
    elapsed_ms = (time.perf_counter() - start) * 1e3

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(clip.frames):
        write_ppm(out / f"frame_{i:06d}.ppm", frame)
    logger.info("wrote %d frames to %s", frames, out)
    click.echo(f"{frames} frames, {elapsed_ms / frames:.2f} ms/frame")


def _write_matrix(path: Path, matrix: np.ndarray, header):
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, matrix, delimiter=",", fmt="%.10g", header=",".join(header), comments="")
    logger.info("wrote %s", path)


@cli.command()
@click.argument("ckpt", type=click.Path())
@click.argument("out", type=click.Path())
@click.option("--what", type=click.Choice(ANALYSES), required=True)
@click.option("--times", "times_text", default="0..15", show_default=True, help="a..b or t1,t2,...")
@click.option("--layer", "layer_id", default=None, help="Layer id, e.g. b32.conv0.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--rows", type=click.IntRange(min=1), default=3, show_default=True, help="grid: motion tracks.")
@click.option("--cols", type=click.IntRange(min=1), default=3, show_default=True, help="grid: contents.")
@click.option("--dataset", "manifest", type=click.Path(dir_okay=False), default=None,
              help="frechet: manifest of real scenes (default: the run's dataset).")
@click.option("--lengths", default=None, help="frechet: segment lengths, e.g. 8,16.")
@click.option("--self-reference", is_flag=True, help="frechet: score the real set against itself.")
@exit_codes
def analyze(ckpt, out, what, times_text, layer_id, seed, rows, cols, manifest, lengths, self_reference):
    """Motion-style diagnostics of a trained generator"""
    generator, config = load_generator(_checkpoint_path(ckpt))
    times = parse_times(times_text)
    rng = np.random.default_rng(seed)
    out = Path(out)

    if what == "frechet":
        train = config.train
        specs = read_manifest(manifest) if manifest else make_dataset(
            train.dataset_kind, train.dataset_size, train.data_seed, config.generator.resolution, train.clip_length
        )
        lens = [int(v) for v in lengths.split(",")] if lengths else [config.eval.eval_frames]
        if self_reference:
            scores = {}
            for n in lens:
                stats = real_clip_stats(specs, config.eval.eval_clips, n, config.eval.embed_seed)
                scores[n] = frechet_distance(stats, stats)
        else:
            scores = evaluate_frechet(generator, specs, config.eval, lengths=lens, seed=seed)
        _write_matrix(out, np.array([[n, s] for n, s in sorted(scores.items())]), ["length", "frechet"])
        for n, s in sorted(scores.items()):
            click.echo(f"frechet[{n}] = {s:.6f}")
        return

    z_c, track = generator.sample_latents(rng, max(times))
    if what == "cosine":
        layer_id = layer_id or _top_layer(generator, 0)
        sims = motion_style_cosine(generator, z_c, track, times[0], layer_id)
        _write_matrix(out, sims, [f"s{k}" for k in range(sims.shape[1])])
    elif what == "trajectory":
        layer_id = layer_id or _top_layer(generator, 0)
        traj = attention_trajectory(generator, z_c, track, times, layer_id)
        _write_matrix(out, traj, [f"s{k}" for k in range(traj.shape[1])])
    elif what == "attmap":
        layer_id = layer_id or _top_layer(generator, 1)
        if layer_id not in generator.layer_ids:
            raise ValueError(f"unknown layer '{layer_id}'")
        result = generator.generate_clip(z_c, track, times, trace=True)
        if not result.records.get(layer_id):
            raise ValueError(f"layer '{layer_id}' has no motion attention (k=0)")
        out.mkdir(parents=True, exist_ok=True)
        for i, record in enumerate(result.records[layer_id]):
            maps = attention_map(record.logits.data, record.features)
            for k, amap in enumerate(maps):
                write_pgm(out / f"attmap_{i:06d}_s{k}.pgm", normalize_map(amap))
            top = int(np.argmax(record.probs.mean(axis=0)))
            frame = result.frames.data[i]
            if frame.shape[1:] == maps.shape[1:]:
                write_ppm(out / f"overlay_{i:06d}.ppm", attention_overlay(frame, maps[top]))
        logger.info("wrote attention maps for %d frames to %s", len(times), out)
    elif what == "grid":
        contents = [generator.sample_latents(rng, max(times))[0] for _ in range(cols)]
        tracks = [generator.sample_latents(rng, max(times))[1] for _ in range(rows)]
        tiled = tile_grid(decomposition_grid(generator, contents, tracks, times))
        out.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(tiled):
            write_ppm(out / f"grid_{i:06d}.ppm", frame)
        logger.info("wrote %dx%d grid of %d frames to %s", rows, cols, len(times), out)
    click.echo(f"{what} -> {out}")


@cli.command()
@click.option("--layer", "layer_text", default="512,512,3,3", show_default=True, help="c_out,c_in,kh,kw")
@click.option("--dh", "d_h", type=click.IntRange(min=1), default=128, show_default=True)
@click.option("--rank", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--reps", type=click.IntRange(min=10), default=10, show_default=True)
@click.option("--styles", type=click.IntRange(min=1), default=8, show_default=True)
@click.option("--model", "model_config", type=click.Path(dir_okay=False), default=None,
              help="Also report every modulated layer of this config's generator.")
@exit_codes
def bench(layer_text, d_h, rank, reps, styles, model_config):
    """Low-rank vs full-rank hypernetwork cost"""
    console = Console()
    result = run_bench(parse_layer(layer_text), d_h, rank, reps=reps, styles=styles)
    click.echo(f"lowrank params: {result.lowrank_params}")
    click.echo(f"fullrank params: {result.fullrank_params}")

    table = Table(title=f"layer {layer_text}, d_h={d_h}, R={rank}, K={styles}, {reps} reps")
    table.add_column("path")
    table.add_column("params", justify="right")
    table.add_column("time (mean ± std)", justify="right")
    table.add_row("low-rank", str(result.lowrank_params), str(result.lowrank_time))
    table.add_row("full-rank", str(result.fullrank_params), str(result.fullrank_time))
    console.print(table)

    if model_config:
        gen_cfg = RunConfig.from_file(model_config).generator
        generator = GeneratorNet(gen_cfg, np.random.default_rng(0))
        if not generator.style.has_motion_styles:
            raise ValueError("the configured generator has no motion styles (k=0)")
        report = Table(title=f"generator layers, d_h={gen_cfg.d_h}, R={gen_cfg.rank}")
        for column in ("layer", "shape", "low-rank", "full-rank"):
            report.add_column(column, justify="left" if column in ("layer", "shape") else "right")
        for layer_id, shape, low, full in generator.style.param_report(gen_cfg.d_h):
            report.add_row(layer_id, f"{shape.c_out},{shape.c_in},{shape.k_h},{shape.k_w}", str(low), str(full))
        console.print(report)


@cli.command()
@click.option("--scope", type=click.Choice(SCOPES), default="ops", show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@exit_codes
def gradcheck(scope, tol, seed):
    """Finite-difference check of analytic gradients"""
    results = run_suite(scope, tol=tol, seed=seed)
    table = Table(title=f"gradcheck {scope} (tol {tol:g})")
    for column in ("case", "checked", "skipped", "max rel err", "ok"):
        table.add_column(column)
    for r in results:
        table.add_row(r.name, str(r.report.checked), str(r.report.skipped),
                      f"{r.report.max_rel_error:.3e}", "yes" if r.passed else "NO")
    Console().print(table)

    worst = worst_offender(results)
    click.echo(f"worst: {worst.name} ({worst.report.worst_name}[{worst.report.worst_index}]) "
               f"{worst.report.max_rel_error:.3e}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise GradCheckError(f"gradient check failed for {', '.join(failed)}")


@cli.group()
def dataset():
    """Synthetic scene datasets"""


@dataset.command("dump")
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--kind", type=click.Choice(DATASET_KINDS), default="two-motion", show_default=True)
@click.option("--count", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resolution", type=int, default=32, show_default=True)
@click.option("--frames", type=click.IntRange(min=1), default=64, show_default=True)
@exit_codes
def dataset_dump(out_dir, kind, count, seed, resolution, frames):
    """Write a manifest and PPM frames of a synthetic dataset"""
    specs = make_dataset(kind, count, seed, resolution, clip_length=frames)
    dump_dataset(specs, out_dir, frames=frames)
    click.echo(f"{count} {kind} clips -> {out_dir}")


@cli.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--sweep", "sweep_text", required=True, help="key=v1,v2,...")
@click.option("--steps", type=int, default=None, help="Training steps per arm.")
@exit_codes
def ablate(config_path, out_dir, sweep_text, steps):
    """Train one arm per swept value and compare toy Fréchet scores"""
    key, values = parse_sweep(sweep_text)
    rows = run_ablation(RunConfig.from_file(config_path), key, values, out_dir, steps=steps)
    table = Table(title=f"ablation over {key}")
    table.add_column(key)
    table.add_column("frechet", justify="right")
    for row in rows:
        table.add_row(row.value, f"{row.frechet:.4f}")
    Console().print(table)


@cli.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--seeds", "seeds_text", default=",".join(map(str, DEFAULT_SEEDS)), show_default=True)
@click.option("--steps", type=click.IntRange(min=1), default=None, help="Training steps per arm.")
@exit_codes
def acceptance(config_path, out_dir, seeds_text, steps):
    """Configured K against K=1 over seed pairs, plus attention and style checks"""
    try:
        seeds = [int(v) for v in seeds_text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"--seeds expects s1,s2,..., got '{seeds_text}'") from None
    report = run_acceptance(RunConfig.from_file(config_path), out_dir, seeds, steps=steps)

    table = Table(title=f"k={report.k} vs k=1, {report.steps} steps per arm")
    for column in ("seed", f"frechet k={report.k}", "frechet k=1", "moving styles", "mean |cos|"):
        table.add_column(column, justify="right")
    for r in report.seeds:
        table.add_row(str(r.seed), f"{r.frechet_k:.4f}", f"{r.frechet_single:.4f}", str(r.moving_styles),
                      f"{r.mean_offdiag_cosine:.4f}")
    Console().print(table)
    for name, ok in (("frechet", report.frechet_ok), ("attention", report.attention_ok),
                     ("cosine", report.cosine_ok)):
        click.echo(f"{name}: {'pass' if ok else 'FAIL'}")


def main():
    try:
        cli()
    except KeyboardInterrupt:
        click.echo("\nInterrupted.")
        sys.exit(130)


if __name__ == '__main__':
    main()
