import logging
from pathlib import Path
from typing import Callable, List, Optional

import typer

from src.errors import TPADError
from src.schemas.config_loader import load_run_config, parse_cli_overrides
from src.schemas.pydantic_schemas import RunConfig
from src import services

# App setup
app = typer.Typer(
    name="tpad",
    help="Search a trajectory anomaly detector and use it to filter stochastic trajectory predictions.",
    no_args_is_help=True,
    add_completion=False,
)
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Any RunConfig key is accepted as `--key value`
OVERRIDES = {"allow_extra_args": True, "ignore_unknown_options": True}
ConfigOption = typer.Option(None, "--config", "-c", help="YAML run configuration")


def _run(ctx: typer.Context, config_path: Optional[str], command: Callable[[RunConfig], object]):
    try:
        config = load_run_config(config_path, parse_cli_overrides(ctx.args))
        command(config)
    except TPADError as e:
        logger.error(f"{ctx.info_name}: {e.detail}")
        raise typer.Exit(code=e.exit_code)


@app.command(context_settings=OVERRIDES)
def prepare(ctx: typer.Context, config: Optional[str] = ConfigOption):
    """Window the scenes and write the leave-one-out split."""
    _run(ctx, config, services.prepare)


@app.command("make-negatives", context_settings=OVERRIDES)
def make_negatives(ctx: typer.Context, config: Optional[str] = ConfigOption):
    """Redraw the perturbed validation futures."""
    _run(ctx, config, services.regenerate_negatives)


@app.command(context_settings=OVERRIDES)
def search(ctx: typer.Context, config: Optional[str] = ConfigOption):
    """Search operator sequences (REINFORCE or random); resumable."""
    _run(ctx, config, lambda c: services.search(c, progress=True))


@app.command("train-final", context_settings=OVERRIDES)
def train_final(ctx: typer.Context, config: Optional[str] = ConfigOption):
    """Train the chosen spec (--spec, --preset or the search best) for final_epochs."""
    _run(ctx, config, lambda c: services.train_final(c, progress=True))


@app.command(context_settings=OVERRIDES)
def score(ctx: typer.Context, config: Optional[str] = ConfigOption):
    """Sample predictions for the held-out windows and score them."""
    _run(ctx, config, lambda c: services.score(c, progress=True))


@app.command("filter", context_settings=OVERRIDES)
def filter_predictions(ctx: typer.Context, config: Optional[str] = ConfigOption):
    """Keep the top-ψ samples per pedestrian and report ADE / FDE."""
    _run(ctx, config, services.filter_predictions)


@app.command("eval", context_settings=OVERRIDES)
def evaluate(ctx: typer.Context, config: Optional[str] = ConfigOption):
    """AUC comparison table and the ψ / Ψ sensitivity tables."""
    _run(ctx, config, lambda c: services.evaluate(c, progress=True))


@app.command(context_settings=OVERRIDES)
def plot(ctx: typer.Context, config: Optional[str] = ConfigOption):
    """Search curves and the anomaly-score histogram."""
    _run(ctx, config, services.plot)


@app.command("merge-auc")
def merge_auc(
    run_dirs: List[Path] = typer.Argument(..., help="Run directories, one held-out scene each"),
    output: Path = typer.Option(..., "--output", "-o", help="Where to write the merged CSV"),
):
    """Join the AUC tables of several runs and add the across-scene Average."""
    try:
        services.merge_auc(run_dirs, output)
    except TPADError as e:
        logger.error(f"merge-auc: {e.detail}")
        raise typer.Exit(code=e.exit_code)


if __name__ == "__main__":
    app()
