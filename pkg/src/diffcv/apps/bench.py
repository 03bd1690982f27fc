"""Sobel edge benchmark: median wall time over repeated batched runs."""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np

from ..autodiff import Tensor, get_num_threads, no_grad, set_num_threads
from ..filters import sobel_edges

CSV_FIELDS = ("batch", "threads", "median_ms", "p10", "p90")
DEFAULT_BATCHES = (1, 2, 4, 8, 16, 32)


def time_sobel(batch: int, resolution: tuple[int, int], reps: int, dtype=np.float32, seed: int = 0) -> np.ndarray:
    """Per-repetition wall times (ms) of ``sobel_edges`` on a random RGB batch."""
    h, w = resolution
    x = Tensor(np.random.default_rng(seed).random((batch, 3, h, w)).astype(dtype))
    times = np.empty(reps)
    with no_grad():
        sobel_edges(x)  # warm-up
        for i in range(reps):
            t0 = time.perf_counter()
            sobel_edges(x)
            times[i] = (time.perf_counter() - t0) * 1e3
    return times


def bench_sobel(batch_sizes=DEFAULT_BATCHES, resolution=(256, 256), reps: int = 500, threads=(1,),
                dtype=np.float32, seed: int = 0, csv_path=None, plot_path=None) -> list[dict]:
    """Run every (threads, batch) pair; append rows to ``csv_path`` and plot medians."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rows = []
    previous = get_num_threads()
    try:
        for t in threads:
            set_num_threads(t)
            for b in batch_sizes:
                times = time_sobel(b, resolution, reps, dtype, seed)
                rows.append({
                    "batch": int(b),
                    "threads": int(t),
                    "median_ms": float(np.median(times)),
                    "p10": float(np.percentile(times, 10)),
                    "p90": float(np.percentile(times, 90)),
                })
    finally:
        set_num_threads(previous)
    if csv_path is not None:
        write_csv(csv_path, rows)
    if plot_path is not None:
        plot_medians(plot_path, rows)
    return rows


def write_csv(path, rows: list[dict]) -> None:
    """Append rows, writing the header only when the file is new or empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if fresh:
            writer.writeheader()
        for r in rows:
            writer.writerow({k: (f"{r[k]:.6f}" if isinstance(r[k], float) else r[k]) for k in CSV_FIELDS})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"batch": int(r["batch"]), "threads": int(r["threads"]), "median_ms": float(r["median_ms"]),
             "p10": float(r["p10"]), "p90": float(r["p90"])}
            for r in csv.DictReader(fh)
        ]


def plot_medians(path, rows: list[dict]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for t in sorted({r["threads"] for r in rows}):
        sel = sorted((r for r in rows if r["threads"] == t), key=lambda r: r["batch"])
        ax.errorbar(
            [r["batch"] for r in sel],
            [r["median_ms"] for r in sel],
            yerr=[[r["median_ms"] - r["p10"] for r in sel], [r["p90"] - r["median_ms"] for r in sel]],
            marker="o", capsize=3, label=f"{t} thread{'s' if t > 1 else ''}",
        )
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("batch size")
    ax.set_ylabel("median time [ms]")
    ax.set_title("sobel_edges, 256x256 RGB")
    ax.legend()
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
