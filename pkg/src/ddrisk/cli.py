"""Command-line entry points: one subcommand per capability.

Every subcommand accepts --seed, --config (TOML or JSON ExperimentConfig
file) and --out; subcommands that have no use for a flag accept and
ignore it so scripts can pass a uniform flag set.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from . import experiments
from .adversarial import build_pool, greedy_curve
from .bounds import dd_risk_bound, dd_risk_bound_simplified, dd_risk_exact
from .core import BinGrid
from .learner import MlpModel, train
from .rebalance import unit_weights
from .tasks import GaussianMixtureTask, sample_task, sample_truncated_gaussian, sample_uniform


def _load_cfg(config: str | None, **overrides) -> experiments.ExperimentConfig:
    try:
        cfg = experiments.load_config(config) if config else experiments.ExperimentConfig()
        clean = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(cfg, **clean) if clean else cfg
    except (ValueError, TypeError, OSError) as exc:
        raise click.ClickException(f"bad config: {exc}") from exc


def _emit(payload: str, out: str | None) -> None:
    if out:
        Path(out).write_text(payload)
    else:
        click.echo(payload, nl=not payload.endswith("\n"))


@click.group()
def main() -> None:
    """Distributionally-diverse risk toolkit."""


@main.command("gen-task")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--component-std", type=float, default=None)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
def gen_task_cmd(seed, component_std, config, out) -> None:
    """Sample a mixture-of-Gaussians task and print it as JSON."""
    cfg = _load_cfg(config, component_std=component_std)
    task = sample_task(seed, cfg.component_std)
    _emit(task.to_json() + "\n", out)


@main.command("bound")
@click.option("--r", "risk", type=float, required=True, help="uniform expected risk in (0,1)")
@click.option("--gamma", type=float, required=True, help="entropy gap budget (nats)")
@click.option("--seed", type=int, default=0, hidden=True)
@click.option("--config", type=click.Path(exists=True), default=None, hidden=True)
@click.option("--out", type=click.Path(), default=None)
def bound_cmd(risk, gamma, seed, config, out) -> None:
    """Exact DD risk and its closed-form upper bounds for (r, gamma)."""
    try:
        exact = dd_risk_exact(risk, gamma)
        bound = dd_risk_bound(risk, gamma)
        simplified = dd_risk_bound_simplified(risk, gamma)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    payload = json.dumps({
        "r": risk, "gamma": gamma,
        "dd_risk_exact": exact,
        "dd_risk_bound": bound,
        "dd_risk_bound_simplified": simplified,
        "vacuous": bound >= 1.0,
    }, indent=2) + "\n"
    _emit(payload, out)


def _sample_training(task, n, sigma, seed):
    if sigma is None:
        return sample_uniform(task, n, seed)
    return sample_truncated_gaussian(task, n, sigma, seed)


@main.command("train")
@click.option("--task", "task_path", type=click.Path(exists=True), required=True)
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--sigma", type=float, default=None,
              help="truncated-Gaussian spread; omit for uniform sampling")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
def train_cmd(task_path, n, sigma, seed, config, out) -> None:
    """Train the classifier on a sampled training set and save it."""
    cfg = _load_cfg(config)
    task = GaussianMixtureTask.from_json(Path(task_path).read_text())
    data = _sample_training(task, n, sigma, seed)
    model, trace = train(unit_weights(data), cfg.train_config(n, seed))
    payload = {
        "model": json.loads(model.to_json()),
        "final_weighted_loss": trace.final_weighted_loss,
        "final_wdl2": trace.final_wdl2,
        "final_train_error": trace.final_train_error,
        "final_grid_risk": experiments.grid_risk(model, task),
        "n": n, "sigma": sigma, "seed": seed,
    }
    Path(out).write_text(json.dumps(payload) + "\n")
    click.echo(f"saved model to {out} (grid risk {payload['final_grid_risk']:.4f})")


def _load_model(path: str) -> MlpModel:
    payload = json.loads(Path(path).read_text())
    blob = payload["model"] if "model" in payload else payload
    return MlpModel.from_json(json.dumps(blob))


@main.command("evaluate")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--task", "task_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
def evaluate_cmd(model_path, task_path, seed, config, out) -> None:
    """Recompute grid risk and pool risk for a saved model on a task."""
    cfg = _load_cfg(config)
    task = GaussianMixtureTask.from_json(Path(task_path).read_text())
    model = _load_model(model_path)
    pool = build_pool(model, task, cfg.pool_size, seed, cfg.grid())
    payload = json.dumps({
        "grid_risk": experiments.grid_risk(model, task),
        "pool_risk": pool.uniform_risk,
        "pool_size": cfg.pool_size,
        "seed": seed,
    }, indent=2) + "\n"
    _emit(payload, out)


@main.command("adversarial")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--task", "task_path", type=click.Path(exists=True), required=True)
@click.option("--gamma", type=float, multiple=True, required=True)
@click.option("--m", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid-k", type=int, default=100, show_default=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
def adversarial_cmd(model_path, task_path, gamma, m, seed, grid_k, config, out) -> None:
    """Greedy worst-case risk of a saved model at one or more budgets."""
    task = GaussianMixtureTask.from_json(Path(task_path).read_text())
    model = _load_model(model_path)
    pool = build_pool(model, task, m, seed, BinGrid(grid_k))
    results = greedy_curve(pool, list(gamma))
    lines = ["gamma,achieved_gap,dd_risk,selection_size,exhausted"]
    for g in sorted(results):
        row = results[g].to_row()
        lines.append(f"{row['gamma']!r},{row['achieved_gap']!r},{row['dd_risk']!r},"
                     f"{row['selection_size']},{int(row['exhausted'])}")
    _emit("\n".join(lines) + "\n", out)


@main.command("density-fit")
@click.option("--task", "task_path", type=click.Path(exists=True), required=True)
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--sigma", type=float, default=None)
@click.option("--kind", type=click.Choice(["gmm", "kde", "histogram"]), default="gmm",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
def density_fit_cmd(task_path, n, sigma, kind, seed, config, out) -> None:
    """Fit a density to a sampled training set and save it as JSON."""
    cfg = _load_cfg(config, density_kind=kind)
    task = GaussianMixtureTask.from_json(Path(task_path).read_text())
    data = _sample_training(task, n, sigma, seed)
    model = cfg.fit_density(data, seed)
    Path(out).write_text(model.to_json() + "\n")
    click.echo(f"saved {kind} density to {out}")


@main.command("run")
@click.option("--experiment", type=click.Choice(["fig1", "fig3", "single"]), default=None)
@click.option("--seed", "master_seed", type=int, default=None)
@click.option("--seeds", type=int, default=None, help="number of task seeds")
@click.option("--workers", type=int, default=None)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
def run_cmd(experiment, master_seed, seeds, workers, config, out) -> None:
    """Run a full experiment sweep; writes CSV plus a JSON manifest."""
    cfg = _load_cfg(config, experiment=experiment, master_seed=master_seed,
                    seeds=seeds, workers=workers)
    rows = experiments.run_experiment(cfg, out)
    click.echo(f"{cfg.experiment}: wrote {len(rows)} run rows to {out}")


if __name__ == "__main__":
    sys.exit(main())
