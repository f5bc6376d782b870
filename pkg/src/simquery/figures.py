"""Matplotlib renderers for sweep results, written next to the CSV output."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "plot_reduction_sweep",
    "plot_snr_sweep",
    "plot_fraction_sweep",
    "plot_csi_sweep",
    "plot_dimension_report",
]


def _series(summary, key_col, x_col, y_col, err_col=None):
    """Group summary rows into {key: (xs, ys, errs)} with sorted x."""
    groups = {}
    for row in summary:
        groups.setdefault(row[key_col], []).append(row)
    out = {}
    for key, rows in groups.items():
        rows.sort(key=lambda r: (math.inf if isinstance(r[x_col], float)
                                 and math.isinf(r[x_col]) else r[x_col]))
        xs = [r[x_col] for r in rows]
        ys = [r[y_col] for r in rows]
        errs = [r[err_col] for r in rows] if err_col is not None else None
        out[key] = (xs, ys, errs)
    return out


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_reduction_sweep(summary, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme, (xs, ys, errs) in _series(summary, 0, 1, 2, 3).items():
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=scheme)
    ax.set_xlabel("target removal fraction")
    ax.set_ylabel("query accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_snr_sweep(summary, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for mode, (xs, ys, errs) in _series(summary, 0, 1, 2, 3).items():
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=mode)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("query accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_fraction_sweep(summary, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for snr, (xs, ys, errs) in _series(summary, 0, 1, 2, 3).items():
        label = "no noise" if math.isinf(snr) else f"{snr:g} dB"
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=label)
    ax.set_xlabel("transmitted fraction of support set")
    ax.set_ylabel("query accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_csi_sweep(summary, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for train_snr, (xs, ys, errs) in _series(summary, 0, 1, 2, 3).items():
        label = ("trained noiseless" if math.isinf(train_snr)
                 else f"trained at {train_snr:g} dB")
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=label)
    ax.set_xlabel("evaluation SNR (dB)")
    ax.set_ylabel("query accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_dimension_report(rows, path) -> None:
    """Retained edges per order, one line per target fraction (trial 0)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    fractions = sorted({r[1] for r in rows})
    for fraction in fractions:
        pts = sorted((r[3], r[4]) for r in rows if r[0] == 0 and r[1] == fraction)
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    label=f"removal {fraction:g}")
    ax.set_xlabel("simplex order")
    ax.set_ylabel("retained edges")
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)
