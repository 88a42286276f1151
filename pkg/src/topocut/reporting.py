"""Evaluation reports: JSON for machines, CSV plus rendered figures for people."""

from __future__ import annotations

import csv
import json
import os
from importlib import resources

import jsonschema
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .config import RunConfig  # noqa: E402
from .spectral import HUMAN_BASELINES, FragmentEvaluation  # noqa: E402


def _schema() -> dict:
    with resources.files("topocut.schemas").joinpath("report.schema.json").open() as fh:
        return json.load(fh)


def validate_report(report: dict) -> dict:
    jsonschema.validate(report, _schema())
    return report


def evaluation_report(ev: FragmentEvaluation, threshold: float,
                      task: str | None = None, cluster_ids=None,
                      fragment_sizes=None, num_goal_clouds: int = 1) -> dict:
    """JSON-serializable summary of one fragment evaluation."""
    frags = []
    for i, (d, r) in enumerate(zip(ev.distances, ev.rewards)):
        frags.append({
            "index": i,
            "cluster_id": int(cluster_ids[i]) if cluster_ids is not None else None,
            "points": int(fragment_sizes[i]) if fragment_sizes is not None else 0,
            "distance": float(d),
            "reward": float(r),
            "scored": i not in ev.skipped,
        })
    r_hat = ev.R_total / HUMAN_BASELINES[task] if task in HUMAN_BASELINES else None
    report = {
        "R_total": float(ev.R_total),
        "N_C": int(ev.N_C),
        "R_hat": r_hat,
        "task": task,
        "success_threshold": float(threshold),
        "num_goal_clouds": int(num_goal_clouds),
        "fragments": frags,
    }
    return validate_report(report)


def dataset_report(records: list, out_dir, run: RunConfig | None = None) -> list:
    """Render reward/fragment curves and write the numbers next to them.

    Produces rewards.png, fragments.png, and report.csv under out_dir;
    returns the written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    rows = [("episode", "cut", "reward", "clusters", "incomplete")]
    for e, rec in enumerate(records):
        counts = rec.cluster_counts()
        for c, t in enumerate(rec.tuples):
            rows.append((e, c + 1, repr(t.reward), counts[c + 1], int(rec.incomplete)))
    csv_path = os.path.join(out_dir, "report.csv")
    with open(csv_path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for e, rec in enumerate(records):
        rewards = [t.reward for t in rec.tuples]
        ax.plot(np.arange(1, len(rewards) + 1), rewards, marker="o",
                label=f"episode {e}")
    ax.set_xlabel("cut")
    ax.set_ylabel("total reward")
    ax.set_title("Reward per cut")
    if 0 < len(records) <= 12:
        ax.legend(fontsize=7)
    fig.tight_layout()
    rewards_png = os.path.join(out_dir, "rewards.png")
    fig.savefig(rewards_png, dpi=120)
    plt.close(fig)
    written.append(rewards_png)

    fig, ax = plt.subplots(figsize=(6, 4))
    for e, rec in enumerate(records):
        counts = rec.cluster_counts()
        ax.plot(np.arange(len(counts)), counts, marker="s", label=f"episode {e}")
    ax.set_xlabel("cut")
    ax.set_ylabel("fragments")
    ax.set_title("Fragment count per cut")
    if 0 < len(records) <= 12:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fragments_png = os.path.join(out_dir, "fragments.png")
    fig.savefig(fragments_png, dpi=120)
    plt.close(fig)
    written.append(fragments_png)
    return written
