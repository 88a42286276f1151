"""Command-line entry points: simulate, evaluate, plan, datagen, report, serve."""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from .blob import BlobField, read_blob, write_blob
from .config import GoalSpec, RunConfig, load_run_config
from .datagen import (CutScript, DatasetError, generate_dataset, read_dataset,
                      run_episode)
from .reporting import dataset_report, evaluation_report
from .service import apply_thread_cap, run_service
from .spectral import evaluate_fragments
from .mpm import KnifeState, MaterialTable, MPMSim, spawn_from_shape
from .geometry import shape_from_dict


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        return load_run_config(path)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        raise click.UsageError(f"bad config {path}: {exc}")


@click.group()
def main():
    """Deformable-cutting toolkit: simulation, rewards, planning, datasets."""
    apply_thread_cap()


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Run configuration JSON.")
@click.option("--frames", type=int, default=10, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def simulate(config_path, frames, out_dir):
    """Run a headless settling sim and write one particle snapshot per frame."""
    run = _load_config(config_path)
    try:
        table = MaterialTable.from_params(run.materials)
        shape = shape_from_dict(run.object_shape)
        particles = spawn_from_shape(shape, table, run.sim)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    sim = MPMSim(run.sim, particles, KnifeState.default_for(run.sim))
    sim.knife.active = False
    os.makedirs(out_dir, exist_ok=True)
    for f in range(frames):
        sim.step_frame()
        p = sim.particles
        fields = [
            BlobField("x", "f32", p.x),
            BlobField("v", "f32", p.v),
            BlobField("cluster", "i32", p.cluster_id),
            BlobField("damaged", "u8", p.damaged),
        ]
        write_blob(os.path.join(out_dir, f"frame_{f:05d}.tcut"), fields, count=p.n)
    click.echo(f"wrote {frames} snapshots to {out_dir}")


def _fragments_from_blob(path: str):
    """Fragment clouds + ids from a snapshot or episode blob."""
    try:
        _, fields = read_blob(path)
    except (OSError, ValueError) as exc:
        raise click.UsageError(f"cannot read {path}: {exc}")
    if "topo_point_counts" in fields:  # episode file: score the final topology
        counts = fields["topo_point_counts"].astype(np.int64)
        offs = np.concatenate([[0], np.cumsum(counts)])
        pts = fields["topo_points"].astype(np.float64).reshape(-1, 3)
        last = len(counts) - 1
        seg = pts[offs[last]:offs[last + 1]]
        labels = fields["topo_labels"][offs[last]:offs[last + 1]]
        kcounts = fields["topo_cluster_counts"].astype(np.int64)
        koffs = np.concatenate([[0], np.cumsum(kcounts)])
        ids = fields["topo_cluster_ids"][koffs[last]:koffs[last + 1]]
        clouds = [seg[labels == i] for i in range(len(ids))]
        return clouds, [int(i) for i in ids]
    if "x" in fields and "cluster" in fields:
        x = fields["x"].astype(np.float64).reshape(-1, 3)
        cluster = fields["cluster"]
        alive = fields.get("damaged", np.zeros(len(x), dtype=np.uint8)) == 0
        ids = sorted(int(c) for c in np.unique(cluster[alive]) if c >= 0)
        clouds = [x[alive & (cluster == c)] for c in ids]
        return clouds, ids
    raise click.UsageError(f"{path} holds neither an episode nor a snapshot")


@main.command()
@click.option("--topo", "topo_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Episode or snapshot .tcut file.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--goal", "goal_kind", type=click.Choice(["slice", "stick", "dice"]),
              default=None, help="Override the configured goal family.")
@click.option("--thickness", type=float, default=None)
def evaluate(topo_path, config_path, goal_kind, thickness):
    """Score stored fragments against a goal; prints the JSON report."""
    run = _load_config(config_path)
    goal = run.goal
    if goal_kind is not None:
        goal = GoalSpec(kind=goal_kind, thickness=thickness or goal.thickness)
    elif thickness is not None:
        goal = GoalSpec(kind=goal.kind, thickness=thickness)
    goal.validate()
    clouds, ids = _fragments_from_blob(topo_path)
    if not clouds:
        raise click.UsageError("no fragments to score")
    allpts = np.concatenate(clouds, axis=0)
    bounds = (allpts.min(axis=0), allpts.max(axis=0))
    from .datagen import resolve_goal_clouds

    nn = allpts.shape[0]
    spacing = float((bounds[1] - bounds[0]).max() / max(round(nn ** (1 / 3)), 2))
    goal_clouds = resolve_goal_clouds(goal, bounds, spacing)
    ev = evaluate_fragments(clouds, goal_clouds, run.spectral)
    report = evaluation_report(
        ev, run.spectral.reward.resolved_success_threshold(),
        task=goal.kind if goal.kind != "fragments" else None,
        cluster_ids=ids, fragment_sizes=[len(c) for c in clouds],
        num_goal_clouds=len(goal_clouds))
    click.echo(json.dumps(report, indent=2))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cuts", type=int, default=5, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Also store the episode as a one-record dataset.")
def plan(config_path, seed, cuts, out_dir):
    """Plan and execute cuts with the sampling planner; prints a summary."""
    run = _load_config(config_path)
    try:
        rec = run_episode(run.object_shape, run.goal, "mppi", max_cuts=cuts,
                          seed=seed, run=run)
    except (RuntimeError, ValueError) as exc:
        click.echo(f"planning failed: {exc}", err=True)
        sys.exit(1)
    summary = {
        "cuts": len(rec.tuples),
        "rewards": [t.reward for t in rec.tuples],
        "cluster_counts": rec.cluster_counts(),
        "incomplete": rec.incomplete,
        "warnings": rec.warnings,
    }
    click.echo(json.dumps(summary, indent=2))
    if out_dir:
        from .datagen import write_dataset

        write_dataset([rec], out_dir, run)
        click.echo(f"episode stored in {out_dir}", err=True)
    if rec.incomplete:
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--episodes", type=int, default=1, show_default=True)
@click.option("--seed", "root_seed", type=int, default=0, show_default=True,
              help="Root seed; per-episode seeds are split from it.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--max-cuts", type=int, default=5, show_default=True)
@click.option("--randomize/--no-randomize", default=True, show_default=True,
              help="Randomize spawn pose per episode.")
def datagen(config_path, episodes, root_seed, out_dir, max_cuts, randomize):
    """Generate a demonstration dataset with planner-driven episodes."""
    run = _load_config(config_path)
    try:
        records = generate_dataset(out_dir, run.object_shape, run.goal, episodes,
                                   root_seed, run=run, max_cuts=max_cuts,
                                   randomize=randomize)
    except (RuntimeError, ValueError) as exc:
        click.echo(f"datagen failed: {exc}", err=True)
        sys.exit(1)
    done = sum(not r.incomplete for r in records)
    click.echo(f"wrote {len(records)} episodes ({done} complete) to {out_dir}")
    if done < len(records):
        sys.exit(1)


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True, file_okay=False),
              required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def report(dataset_dir, out_dir):
    """Render reward/fragment figures and a CSV table for a dataset."""
    try:
        records = read_dataset(dataset_dir)
    except DatasetError as exc:
        raise click.UsageError(str(exc))
    paths = dataset_report(records, out_dir)
    for p in paths:
        click.echo(p)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--tick-rate", type=float, default=20.0, show_default=True)
def serve(config_path, host, port, tick_rate):
    """Run the live teleoperation WebSocket service."""
    run = _load_config(config_path)
    run_service(run, host=host, port=port, tick_rate=tick_rate)


if __name__ == "__main__":
    main()
