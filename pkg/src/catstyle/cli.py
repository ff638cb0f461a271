"""Command-line interface: train, eval and embed.

Every command prints the config hash and seed it ran with, which together
reproduce the run. `embed --plot` renders a 2-D neighbor-embedding scatter
to support choosing the augmentation weight by eye.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click
import numpy as np

from .config import ExperimentConfig, config_hash, load_config
from .metrics import MetricsReport, evaluate, write_reports
from .nets import arch_hash, load_checkpoint
from .trainer import assign_clusters, load_dataset, train

EXIT_ARCH_MISMATCH = 3


def _print_report(name: str, rep: MetricsReport) -> None:
    click.echo(f"{name:>10s}  acc={rep.acc:.4f}  nmi={rep.nmi:.4f}  ari={rep.ari:.4f}")


@click.group()
def main():
    """Unsupervised image clustering with a category/style latent."""


@main.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", default=None, type=click.Path(file_okay=False))
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--strict-deterministic", is_flag=True, default=False)
@click.option("--device", default="cpu")
def cmd_train(config_path, out_dir, seed, strict_deterministic, device):
    """Train on the configured dataset; writes checkpoint + metrics log."""
    config = load_config(config_path)
    if seed is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "seed": seed})
    out = Path(out_dir) if out_dir else Path("runs") / config.dataset_name
    result = train(
        config,
        out,
        device=device,
        strict_deterministic=strict_deterministic,
        log_fn=click.echo,
    )
    write_reports(result.final_reports, out)
    click.echo(f"checkpoint: {result.checkpoint_path}")
    click.echo(f"metrics log: {result.metrics_path}")
    for name, rep in result.final_reports.items():
        _print_report(name, rep)


def _load_for_eval(checkpoint_path, config_path, data_path):
    payload = load_checkpoint(checkpoint_path)
    config = payload["config"]
    if config_path is not None:
        wanted = load_config(config_path)
        want_hash = arch_hash(wanted)
        if want_hash != payload["arch_hash"]:
            click.echo(
                f"checkpoint architecture {payload['arch_hash']} does not match "
                f"config architecture {want_hash}",
                err=True,
            )
            sys.exit(EXIT_ARCH_MISMATCH)
        config = wanted
    if data_path is not None:
        config.data_path = data_path
    click.echo(f"config hash {config_hash(config)}, seed {config.seed}, step {payload['step']}")
    return payload, config


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--data-path", default=None, type=click.Path())
@click.option("--kmeans", "with_kmeans", is_flag=True, default=False,
              help="Also cluster the latent slices with K-means.")
@click.option("--out-dir", default=None, type=click.Path(file_okay=False))
def cmd_eval(checkpoint, config_path, data_path, with_kmeans, out_dir):
    """Score a checkpoint against ground-truth labels."""
    payload, config = _load_for_eval(checkpoint, config_path, data_path)
    dataset = load_dataset(config)
    reports = evaluate(payload["encoder"], dataset, kmeans_slices=with_kmeans, seed=config.seed)
    for name, rep in reports.items():
        _print_report(name, rep)
    if out_dir:
        write_reports(reports, out_dir)
        click.echo(f"reports written to {out_dir}")


@main.command("embed")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--data-path", default=None, type=click.Path())
@click.option("--out-dir", default=".", type=click.Path(file_okay=False))
@click.option("--plot", is_flag=True, default=False, help="Also write a 2-D scatter image.")
@click.option("--reducer", type=click.Choice(["tsne", "pca"]), default="tsne")
@click.option("--max-plot-points", default=5000, type=int)
def cmd_embed(checkpoint, config_path, data_path, out_dir, plot, reducer, max_plot_points):
    """Dump latent vectors, assignments and labels to CSV."""
    from .nets import encode_dataset

    payload, config = _load_for_eval(checkpoint, config_path, data_path)
    dataset = load_dataset(config)
    encoder = payload["encoder"]
    z_c, z_s = encode_dataset(encoder, dataset.images)
    assignments = assign_clusters(encoder, dataset)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "embeddings.csv"
    chash = config_hash(config)
    header = (
        [f"z_c_{i}" for i in range(z_c.shape[1])]
        + [f"z_s_{i}" for i in range(z_s.shape[1])]
        + ["assignment", "label", "config_hash"]
    )
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i in range(len(dataset)):
            writer.writerow(
                [f"{v:.6g}" for v in z_c[i]]
                + [f"{v:.6g}" for v in z_s[i]]
                + [int(assignments[i]), int(dataset.labels[i]), chash]
            )
    click.echo(f"embeddings: {csv_path} ({len(dataset)} rows)")
    if plot:
        plot_path = out / "embeddings.png"
        _plot_embedding(z_c, z_s, assignments, dataset.labels, plot_path, reducer, max_plot_points)
        click.echo(f"plot: {plot_path}")


def _plot_embedding(z_c, z_s, assignments, labels, path, reducer, max_points):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    latent = np.concatenate([z_c, z_s], axis=1)
    if len(latent) > max_points:
        keep = np.random.default_rng(0).choice(len(latent), max_points, replace=False)
        latent, assignments, labels = latent[keep], assignments[keep], labels[keep]
    if reducer == "tsne":
        from sklearn.manifold import TSNE

        points = TSNE(n_components=2, init="pca", random_state=0).fit_transform(latent)
    else:
        from sklearn.decomposition import PCA

        points = PCA(n_components=2, random_state=0).fit_transform(latent)
    fig, axes = plt.subplots(1, 2, figsize=(11, 5))
    for ax, colors, title in (
        (axes[0], assignments, "by assignment"),
        (axes[1], labels, "by true label"),
    ):
        ax.scatter(points[:, 0], points[:, 1], c=colors, s=4, cmap="tab10")
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


if __name__ == "__main__":
    main()
