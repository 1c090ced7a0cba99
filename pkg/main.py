import functools
import logging
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from gtml.config.settings import Settings, load_config
from gtml.core.errors import ConfigError, GtmlError, InputError, NumericalError
from gtml.data.database import RunRegistry
from gtml.experiments import runner
from gtml.utils.logging import diagnostic, setup_logging

console = Console()
logger = logging.getLogger("gtml")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def common_options(fn):
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="JSON config file")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="output directory")
    @click.option("--seed", type=int, default=None, help="override the config seed")
    @click.option("--jobs", type=int, default=None, help="concurrent replications")
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)

    return wrapper


def run_experiment(command: str, config_path, out_dir, seed, jobs, action):
    """Load config, record the run, execute `action(config, out)`, map failures to exit codes."""
    settings = Settings()
    config_path = config_path or settings.config_path
    registry = RunRegistry(settings.db_path)
    run_id = None
    try:
        config = load_config(config_path)
        updates = {}
        if seed is not None:
            updates["seed"] = seed
        if jobs is not None:
            if jobs < 1:
                raise InputError("--jobs must be at least 1")
            updates["experiment"] = config.experiment.model_copy(update={"jobs": jobs})
        config = config.model_copy(update=updates)
        out = Path(out_dir or config.experiment.out_dir or settings.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        run_id = registry.start_run(command, config_path, config.seed, str(out))
        summary = action(config, out)
    except (ConfigError, InputError) as e:
        _fail(registry, run_id, "config_error", e)
        raise SystemExit(EXIT_CONFIG)
    except NumericalError as e:
        _fail(registry, run_id, "numerical_error", e)
        raise SystemExit(EXIT_NUMERICAL)
    except GtmlError as e:
        _fail(registry, run_id, "failed", e)
        raise SystemExit(EXIT_NUMERICAL)
    except OSError as e:
        _fail(registry, run_id, "failed", e, kind="io_error")
        raise SystemExit(EXIT_CONFIG)
    registry.finish_run(run_id, "ok", summary)
    console.print(f"✅ {command} finished (run {run_id})", style="bold green")
    for key, value in summary.items():
        console.print(f"   {key}: {value}")


def _fail(registry, run_id, status, error, kind=None):
    diagnostic(kind or getattr(error, "kind", type(error).__name__), str(error))
    if run_id is not None:
        registry.finish_run(run_id, status, {"error": str(error)})


@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING ...")
def cli(log_level):
    """Game-theoretic machine learning lab"""
    setup_logging(log_level or Settings().log_level)


@cli.command()
def init():
    """Initialize the run registry"""
    console.print("Initializing run registry...", style="bold green")
    registry = RunRegistry(Settings().db_path)
    registry.initialize_db()
    console.print(f"✅ Registry ready: {registry.db_path}", style="bold green")


@cli.command()
@common_options
def simulate(config_path, out_dir, seed, jobs):
    """Simulate a trajectory under the logging mechanism"""
    run_experiment("simulate", config_path, out_dir, seed, jobs,
                   lambda cfg, out: {"trajectory": str(runner.cmd_simulate(cfg, out))})


@cli.command("fit-behavior")
@common_options
@click.option("--trajectory", "trajectory_path", type=click.Path(exists=True, dir_okay=False), required=True)
def fit_behavior(config_path, out_dir, seed, jobs, trajectory_path):
    """Fit a behavior model to a trajectory file"""
    def action(cfg, out):
        model_path, report_path = runner.cmd_fit_behavior(cfg, trajectory_path, out)
        return {"model": str(model_path), "report": str(report_path)}

    run_experiment("fit-behavior", config_path, out_dir, seed, jobs, action)


@cli.command("behavior-convergence")
@common_options
def behavior_convergence(config_path, out_dir, seed, jobs):
    """Behavior-learning error over the T1 sweep"""
    run_experiment("behavior-convergence", config_path, out_dir, seed, jobs,
                   lambda cfg, out: {"csv": str(runner.cmd_behavior_convergence(cfg, out))})


@cli.command("mechanism-convergence")
@common_options
def mechanism_convergence(config_path, out_dir, seed, jobs):
    """Sup-deviation of empirical risks over the T2 sweep"""
    run_experiment("mechanism-convergence", config_path, out_dir, seed, jobs,
                   lambda cfg, out: {"csv": str(runner.cmd_mechanism_convergence(cfg, out))})


@cli.command("sharing-ablation")
@common_options
def sharing_ablation(config_path, out_dir, seed, jobs):
    """Sup-deviation with and without sample sharing over growing mechanism grids"""
    run_experiment("sharing-ablation", config_path, out_dir, seed, jobs,
                   lambda cfg, out: {"csv": str(runner.cmd_sharing_ablation(cfg, out))})


@cli.command("end-to-end")
@common_options
def end_to_end(config_path, out_dir, seed, jobs):
    """Full pipeline: fit, ERM, exact generalization gap"""
    def action(cfg, out):
        csv_path, json_path = runner.cmd_end_to_end(cfg, out)
        return {"csv": str(csv_path), "summary": str(json_path)}

    run_experiment("end-to-end", config_path, out_dir, seed, jobs, action)


@cli.command()
@common_options
@click.option("--tails/--no-tails", default=False, help="overlay empirical behavior-error tails")
def bounds(config_path, out_dir, seed, jobs, tails):
    """Bound curves over the configured sweeps"""
    run_experiment("bounds", config_path, out_dir, seed, jobs,
                   lambda cfg, out: {"csv": str(runner.cmd_bounds(cfg, out, with_tails=tails))})


@cli.command()
@common_options
def decomposition(config_path, out_dir, seed, jobs):
    """Error-decomposition check over randomized true models"""
    run_experiment("decomposition", config_path, out_dir, seed, jobs,
                   lambda cfg, out: {"csv": str(runner.cmd_decomposition(cfg, out))})


@cli.command()
@click.option("--export", "export_path", default=None, help="also write the registry to this CSV")
def runs(export_path):
    """List recorded experiment runs"""
    registry = RunRegistry(Settings().db_path)
    table = Table(title="gtml runs")
    for column in ("id", "command", "seed", "status", "started_at", "output_path"):
        table.add_column(column)
    for run in registry.get_all_runs():
        table.add_row(*(str(run.get(c, "")) for c in ("id", "command", "seed", "status", "started_at", "output_path")))
    console.print(table)
    if export_path:
        registry.export_runs(export_path)
        console.print(f"✅ Export completed: {export_path}", style="bold green")


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Start the HTTP API"""
    import uvicorn

    uvicorn.run("gtml.api.server:app", host=host, port=port)


if __name__ == "__main__":
    cli()
