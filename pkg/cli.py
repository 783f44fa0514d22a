#!/usr/bin/env python3
"""
Command Line Interface for measure2shape
"""
import functools
import logging
import sys
from pathlib import Path

import click
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import track
from rich.table import Table

from src.config import config
from src.errors import InputFormatError, Measure2ShapeError
from src.evaluation.experiments import PROTOCOLS, ExperimentSettings, run_experiment, write_bundle
from src.evaluation.gradcheck import run_gradcheck
from src.evaluation.report import REPORT_FORMATS, dump_report, evaluate_meshes
from src.measurements.engine import measure_all
from src.measurements.specs import load_profile, save_profile
from src.measurements.tables import (measurement_table_text, read_measurement_row,
                                     read_measurement_table, write_measurement_table)
from src.mesh.obj_io import read_obj, write_obj
from src.model.model_io import load_model, save_model
from src.model.shape_model import NORMALIZATIONS, measure_meshes, train_model
from src.refinement.pipeline import PRESETS, RefinementConfig, predict_shape
from src.synth.family import make_family, sample_family
from src.synth.gaussian import fit_gaussian, sample_close, sample_ellipsoid
from src.synth.profiles import template_profile
from src.synth.templates import KINDS, MIN_RESOLUTION, build_template

console = Console()
log = logging.getLogger("measure2shape")


def report_errors(command):
    """Map library errors to a red message, an `error=CODE` stderr line and the exit code"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (click.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except ValidationError as e:
            _fail(InputFormatError.code, InputFormatError.exit_code, str(e))
        except Measure2ShapeError as e:
            _fail(e.code, e.exit_code, str(e))
        except Exception as e:
            log.debug("unexpected failure", exc_info=True)
            _fail(Measure2ShapeError.code, Measure2ShapeError.exit_code, str(e))
    return wrapper


def _fail(code: str, exit_code: int, message: str):
    console.print(f"❌ Error: {message}", style="red")
    single_line = " ".join(message.split())
    click.echo(f"error={code} message={single_line}", err=True)
    sys.exit(exit_code)


def _progress(ctx, description: str):
    if ctx.obj["quiet"]:
        return lambda items, total: items
    return lambda items, total: track(items, total=total, description=description,
                                      console=console)


def _read_meshes(paths):
    paths = sorted(Path(p) for p in paths)
    return [read_obj(p) for p in paths], [p.name for p in paths]


def _obj_files(directory: str):
    files = sorted(Path(directory).glob("*.obj"))
    if len(files) < 2:
        raise InputFormatError(f"need >= 2 training meshes, got {len(files)} in {directory}")
    return files


def _profile_for(mesh, profile_path=None, model_path=None):
    if model_path:
        return load_model(model_path).profile
    if profile_path:
        return load_profile(profile_path, mesh.vertex_count, mesh.triangle_count)
    raise click.UsageError("pass --profile or --model")


def _summary_table(title: str, rows, first: str = "Dimension") -> Table:
    table = Table(title=title)
    table.add_column(first, style="cyan")
    table.add_column("Average (mm)", justify="right")
    table.add_column("Maximum (mm)", justify="right")
    for row in rows:
        table.add_row(row.name,
                      "n/a" if row.average is None else f"{row.average:.4f}",
                      "n/a" if row.maximum is None else f"{row.maximum:.4f}")
    return table


@click.group()
@click.option('--seed', type=int, default=None, help='Random seed for commands that sample')
@click.option('--threads', type=int, default=config.THREADS, show_default=True,
              help='Worker threads for independent measurements and predictions')
@click.option('--quiet', is_flag=True, help='Only log errors and hide progress bars')
@click.pass_context
def cli(ctx, seed, threads, quiet):
    """measure2shape - estimate 3D shapes from anthropometric measurements"""
    if threads < 1:
        raise click.BadParameter("must be at least 1", param_hint="--threads")
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, threads=threads, quiet=quiet)
    logging.basicConfig(
        level=logging.ERROR if quiet else config.LOG_LEVEL,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@cli.command()
@click.argument('mesh_dir', type=click.Path(exists=True, file_okay=False))
@click.argument('profile_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--output', '-o', default='model.json', help='Model file to write')
@click.option('--components', '-r', type=int, default=None, help='PCA components (default: all)')
@click.option('--normalization', type=click.Choice(NORMALIZATIONS), default=None,
              help='Feature-map weight normalization')
@click.option('--exclude-group', multiple=True, help='Drop a measurement group or name')
@click.pass_context
@report_errors
def train(ctx, mesh_dir, profile_path, output, components, normalization, exclude_group):
    """Learn the shape space and the measurement-to-weights map"""
    console.print(Panel(f"🧠 Training on: {mesh_dir}", style="blue"))

    meshes, labels = _read_meshes(_obj_files(mesh_dir))
    profile = load_profile(profile_path, meshes[0].vertex_count, meshes[0].triangle_count)
    if exclude_group:
        profile = profile.without(exclude_group)

    with console.status("Training PCA and feature map..."):
        model, _ = train_model(meshes, profile, components, normalization, labels,
                               ctx.obj["threads"])
    save_model(model, output)

    table = Table(title="Trained Model")
    table.add_column("Property", style="cyan")
    table.add_column("Value", justify="right")
    table.add_row("Training meshes", str(len(meshes)))
    table.add_row("Vertices", str(model.pca.vertex_count))
    table.add_row("Components", str(model.pca.component_count))
    table.add_row("Measurements", str(len(profile)))
    table.add_row("Normalization", model.feature_map.normalization)
    console.print(table)
    console.print(f"💾 Model saved to: {output}")


@cli.command()
@click.argument('model_path', type=click.Path(exists=True, dir_okay=False))
@click.argument('targets_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--output', '-o', default='prediction.obj', help='Predicted mesh (OBJ)')
@click.option('--report', 'report_path', default=None,
              help='Stage report path (default: next to the mesh)')
@click.option('--format', 'fmt', type=click.Choice(REPORT_FORMATS), default='json',
              help='Report format')
@click.option('--row', type=int, default=0, show_default=True, help='Target CSV data row')
@click.option('--preset', type=click.Choice(list(PRESETS)), default=None,
              help='Parameter set; explicit flags override it')
@click.option('--l', 'clamp_l', type=float, default=None, help='Clamp multiplier l')
@click.option('--lambda', 'smoothness_lambda', type=float, default=None,
              help='Smoothness weight lambda in [0, 1]')
@click.option('--s', 'recompute_s', type=int, default=None, help='Outer refreeze count s')
@click.option('--s-vertices', 'recompute_s_vertices', type=int, default=None,
              help='Outer refreeze count for the vertex stage (default: --s)')
@click.option('--no-clamp', is_flag=True, help='Do not clamp the feature-analysis start')
@report_errors
def predict(model_path, targets_path, output, report_path, fmt, row, preset, clamp_l,
            smoothness_lambda, recompute_s, recompute_s_vertices, no_clamp):
    """Estimate a shape from one row of target measurements"""
    console.print(Panel(f"🚀 Predicting from: {targets_path}", style="blue"))

    model = load_model(model_path)
    targets = read_measurement_row(targets_path, model.profile, row)
    overrides = dict(clamp_l=clamp_l, smoothness_lambda=smoothness_lambda,
                     recompute_s=recompute_s, recompute_s_vertices=recompute_s_vertices)
    if preset:
        settings = RefinementConfig.preset(preset, clamp=not no_clamp, **overrides)
    else:
        settings = RefinementConfig(clamp=not no_clamp,
                                    **{k: v for k, v in overrides.items() if v is not None})

    with console.status("Refining shape..."):
        mesh, report = predict_shape(model, targets, settings)
    write_obj(mesh, output)
    report_file = dump_report(report, report_path or Path(output).with_suffix(""), fmt)

    table = Table(title="Residuals per stage (mm)")
    table.add_column("Measurement", style="cyan")
    for stage in report.stages:
        table.add_column(stage.name, justify="right")
    for i, name in enumerate(report.measurement_names):
        table.add_row(name, *["n/a" if s.residuals[i] is None else f"{s.residuals[i]:.4f}"
                              for s in report.stages])
    console.print(table)
    if report.dropped:
        console.print(f"⚠️  Dropped during refinement: {', '.join(report.dropped)}",
                      style="yellow")
    console.print(f"✅ Mesh written to: {output}")
    console.print(f"💾 Report saved to: {report_file}")


@cli.command()
@click.argument('meshes', nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--profile', 'profile_path', type=click.Path(exists=True, dir_okay=False),
              default=None, help='Measurement profile JSON')
@click.option('--model', 'model_path', type=click.Path(exists=True, dir_okay=False),
              default=None, help='Take the profile from a model file')
@click.option('--output', '-o', default=None, help='CSV file (default: stdout)')
@click.pass_context
@report_errors
def measure(ctx, meshes, profile_path, model_path, output):
    """Measure meshes; one CSV row per mesh in argument order"""
    meshes = [read_obj(p) for p in meshes]
    profile = _profile_for(meshes[0], profile_path, model_path)
    rows = (measure_meshes(meshes, profile, ctx.obj["threads"]) if len(meshes) > 1
            else [measure_all(meshes[0], profile)])
    if output:
        write_measurement_table(output, profile.names, rows)
        console.print(f"💾 Measurements saved to: {output}")
    else:
        click.echo(measurement_table_text(profile.names, rows), nl=False)


@cli.command()
@click.argument('targets_path', type=click.Path(exists=True, dir_okay=False))
@click.argument('meshes', nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--profile', 'profile_path', type=click.Path(exists=True, dir_okay=False),
              default=None, help='Measurement profile JSON')
@click.option('--model', 'model_path', type=click.Path(exists=True, dir_okay=False),
              default=None, help='Take the profile from a model file')
@click.option('--report', 'report_path', default='evaluation', help='Report path')
@click.option('--format', 'fmt', type=click.Choice(REPORT_FORMATS), default='json',
              help='Report format')
@report_errors
def evaluate(targets_path, meshes, profile_path, model_path, report_path, fmt):
    """Compare predicted meshes (argument order) with target rows"""
    meshes = [read_obj(p) for p in meshes]
    profile = _profile_for(meshes[0], profile_path, model_path)
    targets = read_measurement_table(targets_path, profile)
    report = evaluate_meshes(meshes, targets, profile)

    console.print(_summary_table("Absolute errors", report.dimensions))
    if report.groups:
        console.print(_summary_table("Group errors", report.groups, "Group"))
    overall = "n/a" if report.overall_average is None else f"{report.overall_average:.4f} mm"
    console.print(f"📏 Average error over all dimensions: {overall}")
    console.print(f"💾 Report saved to: {dump_report(report, report_path, fmt)}")


@cli.command()
@click.option('--output', '-o', default='samples', help='Output directory')
@click.option('--kind', type=click.Choice(KINDS), default='mannequin', help='Template kind')
@click.option('--resolution', type=click.IntRange(min=MIN_RESOLUTION),
              default=config.TEMPLATE_RESOLUTION, show_default=True)
@click.option('--modes', type=click.IntRange(min=1), default=8, show_default=True,
              help='Shape-family modes')
@click.option('--count', '-n', type=click.IntRange(min=2), default=50, show_default=True,
              help='Meshes to generate')
@click.option('--targets', type=click.IntRange(min=0), default=0,
              help='Also sample this many target rows from the fitted measurement Gaussian')
@click.option('--k', 'k', type=float, default=None,
              help='Sample targets on the Mahalanobis ellipsoid of radius k')
@click.option('--seed', 'local_seed', type=int, default=None, help='Random seed')
@click.pass_context
@report_errors
def sample(ctx, output, kind, resolution, modes, count, targets, k, local_seed):
    """Write a seeded synthetic family: OBJ meshes, profile and measurement CSV"""
    seed = local_seed if local_seed is not None else ctx.obj["seed"]
    if seed is None:
        raise click.UsageError("sample needs --seed")
    console.print(Panel(f"🎲 Sampling {count} {kind} shapes (seed {seed})", style="blue"))

    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    template = build_template(kind, resolution)
    profile = template_profile(template)
    family = make_family(template.mesh, modes, seed)
    meshes = sample_family(family, count, seed + 1)
    width = len(str(count - 1))
    for i, mesh in enumerate(track(meshes, description="Writing meshes...", console=console,
                                   disable=ctx.obj["quiet"])):
        write_obj(mesh, out / f"shape_{i:0{width}d}.obj")

    measured = measure_meshes(meshes, profile, ctx.obj["threads"])
    save_profile(profile, out / "profile.json")
    write_measurement_table(out / "measurements.csv", profile.names, measured)
    if targets:
        gaussian = fit_gaussian(measured)
        rows = (sample_ellipsoid(gaussian, k, targets, seed + 2) if k is not None
                else sample_close(gaussian, targets, seed + 2))
        write_measurement_table(out / "targets.csv", profile.names, rows)

    console.print(f"✅ {count} meshes with {template.mesh.vertex_count} vertices")
    console.print(f"💾 Written to: {out}")


@cli.command()
@click.argument('protocol', type=click.Choice(PROTOCOLS))
@click.option('--output', '-o', default=None, help='Bundle directory')
@click.option('--kind', type=click.Choice(KINDS), default='mannequin', help='Template kind')
@click.option('--resolution', type=click.IntRange(min=MIN_RESOLUTION),
              default=config.TEMPLATE_RESOLUTION, show_default=True)
@click.option('--modes', type=click.IntRange(min=1), default=8, show_default=True)
@click.option('--training', type=click.IntRange(min=2), default=None,
              help='Training shapes (default 50; 35 for small-training)')
@click.option('--subjects', type=click.IntRange(min=1), default=None,
              help='Targets per set (default 10; 5 for small-training)')
@click.option('--k', 'ks', type=float, multiple=True, help='Ellipsoid radii (default 2 and 4)')
@click.option('--components', '-r', type=int, default=None, help='PCA components')
@click.option('--preset', type=click.Choice(list(PRESETS)), default=None)
@click.option('--no-clamp', is_flag=True, help='Do not clamp the feature-analysis baseline')
@click.option('--format', 'fmt', type=click.Choice(REPORT_FORMATS), default='json')
@click.option('--seed', 'local_seed', type=int, default=None, help='Random seed')
@click.pass_context
@report_errors
def experiment(ctx, protocol, output, kind, resolution, modes, training, subjects, ks,
               components, preset, no_clamp, fmt, local_seed):
    """Run a synthetic protocol and write report, targets and summary"""
    seed = local_seed if local_seed is not None else (ctx.obj["seed"] or 0)
    options = dict(protocol=protocol, seed=seed, kind=kind, resolution=resolution,
                   modes=modes, training=training, subjects=subjects, components=components,
                   preset=preset, clamp=not no_clamp, threads=ctx.obj["threads"])
    if ks:
        options["ks"] = list(ks)
    settings = ExperimentSettings(**options)
    console.print(Panel(f"🧪 Experiment: {protocol} ({kind}, seed {seed})", style="blue"))

    report, sets = run_experiment(settings, _progress(ctx, "Predicting..."))
    if output is None:
        config.ensure_directories()
        output = config.OUTPUT_DIR / f"{protocol}-{kind}-{seed}"
    files = write_bundle(report, sets, output, fmt)

    table = Table(title="Average error over all dimensions (mm)")
    table.add_column("Method", style="cyan")
    for name in report.sets:
        table.add_column(name, justify="right")
    for row in report.table:
        table.add_row(row.method, *["n/a" if row.averages[n] is None else f"{row.averages[n]:.4f}"
                                    for n in report.sets])
    console.print(table)
    for path in files:
        console.print(f"💾 {path}")


@cli.command()
@click.option('--configurations', type=click.IntRange(min=1), default=20, show_default=True)
@click.option('--report', 'report_path', default=None, help='Optional report path')
@click.option('--format', 'fmt', type=click.Choice(REPORT_FORMATS), default='json')
@click.option('--seed', 'local_seed', type=int, default=None, help='Random seed')
@click.pass_context
@report_errors
def gradcheck(ctx, configurations, report_path, fmt, local_seed):
    """Compare analytic energy gradients with central finite differences"""
    seed = local_seed if local_seed is not None else (ctx.obj["seed"] or 0)
    with console.status("Checking gradients..."):
        report = run_gradcheck(seed, configurations)

    table = Table(title=f"Gradient check (seed {seed})")
    table.add_column("Term", style="cyan")
    table.add_column("Max relative error", justify="right")
    table.add_column("Status", justify="center")
    for check in report.terms:
        table.add_row(check.term, f"{check.max_relative_error:.3e}",
                      "✅" if check.passed else "❌")
    console.print(table)
    if report_path:
        console.print(f"💾 Report saved to: {dump_report(report, report_path, fmt)}")
    if not report.passed:
        _fail("E_GRADIENT", 3, f"gradient check failed for: {', '.join(report.failed_terms)}")
    console.print("✅ All gradients match", style="green")


if __name__ == '__main__':
    cli()
