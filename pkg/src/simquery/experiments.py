"""Experiment harness: seeded sweeps writing CSV results and sidecar configs.

All randomness flows from the master seed through numpy SeedSequence spawns,
so a given configuration always reproduces byte-identical CSV output.
"""
from __future__ import annotations

import csv
import json
import math
import os
import zlib
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .channel import Channel, ChannelConfig
from .complexes import SimplicialComplex, build_complex
from .corpus import BipartiteGraph, load_corpus, random_walk_sample, synth_corpus
from .protocol import accuracy, initial_knowledge, query_support, run_query
from .reduction import (LaplacianSet, minimize_edges, minimize_edges_fraction,
                        minimize_random, minimize_simplices,
                        threshold_for_fraction)
from .scae import (Hyperparams, ScaeModel, downsample_subcomplexes,
                   make_masked_batch, order_scales, train)

__all__ = [
    "ExperimentConfig",
    "Pipeline",
    "build_pipeline",
    "train_model",
    "evaluate_battery",
    "run_reduction_sweep",
    "run_snr_sweep",
    "run_fraction_sweep",
    "run_csi_sweep",
    "run_dimension_report",
]

MODES = {"local": 1.0, "remote": 0.0, "joint": 0.5}


@dataclass
class ExperimentConfig:
    corpus_path: str | None = None
    synth_authors: int = 120
    synth_papers: int = 400
    synth_max_coauthors: int = 5
    synth_cite_max: int = 10
    synth_community: int | None = 6
    walk_papers: int = 80
    cite_min: int = 1
    cite_max: int = 10
    schemes: list[str] = field(default_factory=lambda: [
        "edge-laplacian", "simplex-degree", "random-edge"])
    reduction_fractions: list[float] = field(default_factory=lambda: [
        0.0, 0.25, 0.5, 0.75, 0.9])
    snr_grid: list[float] = field(default_factory=lambda: [
        -10.0, -5.0, 0.0, 5.0, 10.0, 20.0])
    p_local_grid: list[float] = field(default_factory=lambda: [
        0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    csi_train_snrs: list[float] = field(default_factory=lambda: [0.0, 10.0])
    trials: int = 3
    seed: int = 0
    outdir: str = "results"
    n_queries: int = 60
    tau_acc: float = 0.25
    student_fraction: float = 0.5
    width: int = 8
    degree: int = 3
    epochs: int = 300
    learning_rate: float = 0.005
    mask_ratio: float = 0.3
    n_hop: int = 3
    subcomplexes: int = 30
    sub_size: int = 30
    plots: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        for grid in (self.schemes, self.reduction_fractions, self.snr_grid,
                     self.p_local_grid):
            if not grid:
                raise ValueError("all sweep grids must be non-empty")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls(**doc)

    def override(self, **kwargs) -> "ExperimentConfig":
        doc = asdict(self)
        doc.update({k: v for k, v in kwargs.items() if v is not None})
        return ExperimentConfig(**doc)


@dataclass
class Pipeline:
    """Everything derived from corpus + seed up to the trainable structure."""

    graph: BipartiteGraph
    complex: SimplicialComplex
    laplacians: LaplacianSet
    c_max: float


def build_pipeline(cfg: ExperimentConfig, seed: int) -> Pipeline:
    if cfg.corpus_path:
        corpus = load_corpus(cfg.corpus_path)
    else:
        corpus = synth_corpus(cfg.synth_authors, cfg.synth_papers,
                              cfg.synth_max_coauthors, cfg.synth_cite_max,
                              seed=seed, community_size=cfg.synth_community)
    sampled = random_walk_sample(corpus, cfg.walk_papers, cfg.cite_min,
                                 cfg.cite_max, seed=seed + 1)
    s = build_complex(sampled)
    ls = LaplacianSet.from_complex(s)
    c_max = max(float(c.max()) for c in s.cochains if c.size)
    return Pipeline(graph=sampled, complex=s, laplacians=ls, c_max=c_max)


def train_model(pipe: Pipeline, cfg: ExperimentConfig, seed: int,
                csi_snr_db: float | None = None) -> ScaeModel:
    hp = Hyperparams(width=cfg.width, degree=cfg.degree,
                     learning_rate=cfg.learning_rate, epochs=cfg.epochs,
                     mask_ratio=cfg.mask_ratio, n_hop=cfg.n_hop,
                     c_max=pipe.c_max)
    subs = downsample_subcomplexes(pipe.complex, cfg.subcomplexes,
                                   cfg.sub_size, seed=seed)
    batch = make_masked_batch(subs, cfg.mask_ratio, cfg.n_hop, pipe.c_max,
                              seed=seed + 1, scales=order_scales(pipe.complex))
    model = ScaeModel(pipe.complex.max_order, hp, seed=seed + 2)
    train(model, batch,
          csi_snr_db=None if csi_snr_db is None or math.isinf(csi_snr_db)
          else csi_snr_db,
          csi_seed=seed + 3, remask_seed=seed + 4)
    return model


def _query_pool(pipe: Pipeline, ls: LaplacianSet, rng: np.random.Generator,
                n_queries: int):
    """Sample query simplices that have a non-empty support set."""
    candidates = [sx for order in pipe.complex.simplices for sx in order
                  if query_support(pipe.complex, ls, sx)]
    if not candidates:
        raise ValueError("complex has no query with a non-empty support set")
    idx = rng.choice(len(candidates), size=min(n_queries, len(candidates)),
                     replace=False)
    return [candidates[i] for i in np.sort(idx)]


def evaluate_battery(pipe: Pipeline, model: ScaeModel, ls: LaplacianSet,
                     p_local: float, snr_db: float, cfg: ExperimentConfig,
                     seed: int) -> float:
    """Accuracy of a fresh-state query battery at one operating point."""
    rng = np.random.default_rng(seed)
    queries = _query_pool(pipe, ls, rng, cfg.n_queries)
    channel = Channel(ChannelConfig(snr_db=snr_db, seed=seed + 1))
    pairs = []
    for q in queries:
        state = initial_knowledge(pipe.complex, cfg.student_fraction,
                                  seed=int(rng.integers(2 ** 31)))
        trace = run_query(q, pipe.complex, ls, model, state, p_local, channel,
                          rng, tau_acc=cfg.tau_acc, update=False)
        pairs.append((trace.prediction, trace.truth))
    return accuracy(pairs, cfg.tau_acc)


def _reduced_structure(pipe: Pipeline, scheme: str, fraction: float, seed: int):
    """Masked LaplacianSet achieving roughly `fraction` off-diagonal removal."""
    ls = pipe.laplacians
    if fraction <= 0.0:
        return ls, None
    if scheme == "edge-laplacian":
        return minimize_edges_fraction(ls, fraction)
    if scheme == "simplex-degree":
        degs = []
        for L in ls.laplacians:
            d = np.asarray(L.diagonal(), dtype=float)
            if d.size:
                degs.extend((d / d.max()).tolist())
        degs.sort()
        idx = min(len(degs) - 1, math.ceil(fraction * len(degs)) - 1)
        return minimize_simplices(ls, degs[idx])
    if scheme == "random-edge":
        return minimize_random(ls, fraction, seed=seed)
    raise ValueError(f"unknown reduction scheme {scheme!r}")


def _write_csv(path, header, rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.6f}"
    return v


def _write_sidecar(path, cfg: ExperimentConfig, sweep: str) -> None:
    doc = {"sweep": sweep, "version": __version__, "config": asdict(cfg)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def _aggregate(rows, key_cols, value_col):
    """Mean and sample std of value_col grouped by key_cols."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        key = tuple(row[i] for i in key_cols)
        groups.setdefault(key, []).append(float(row[value_col]))
    out = []
    for key, vals in groups.items():
        mean = sum(vals) / len(vals)
        std = math.sqrt(sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)) \
            if len(vals) > 1 else 0.0
        out.append(list(key) + [mean, std])
    return out


def _trial_seeds(cfg: ExperimentConfig, label: str):
    tag = zlib.crc32(label.encode("utf-8"))
    ss = np.random.SeedSequence([cfg.seed, tag])
    return [int(s.generate_state(1)[0] % (2 ** 31)) for s in ss.spawn(cfg.trials)]


def run_reduction_sweep(cfg: ExperimentConfig, outdir: str | None = None) -> str:
    """Accuracy of each reduction scheme across target removal fractions."""
    outdir = outdir or cfg.outdir
    rows = []
    for trial, seed in enumerate(_trial_seeds(cfg, "reduction")):
        pipe = build_pipeline(cfg, seed)
        model = train_model(pipe, cfg, seed)
        for scheme in cfg.schemes:
            for fraction in cfg.reduction_fractions:
                masked, report = _reduced_structure(pipe, scheme, fraction, seed)
                acc = evaluate_battery(pipe, model, masked, p_local=0.5,
                                       snr_db=math.inf, cfg=cfg,
                                       seed=seed + 17)
                retained = report.retained_fraction if report else 1.0
                rows.append([scheme, fraction, trial, retained, acc])
    path = os.path.join(outdir, "reduction_sweep.csv")
    _write_csv(path, ["scheme", "target_fraction", "trial",
                      "retained_fraction", "accuracy"], rows)
    summary = _aggregate(rows, key_cols=(0, 1), value_col=4)
    _write_csv(os.path.join(outdir, "reduction_sweep_summary.csv"),
               ["scheme", "target_fraction", "accuracy_mean", "accuracy_std"],
               summary)
    _write_sidecar(os.path.join(outdir, "reduction_sweep.json"), cfg, "reduction")
    if cfg.plots:
        from .figures import plot_reduction_sweep
        plot_reduction_sweep(summary, os.path.join(outdir, "reduction_sweep.png"))
    return path


def run_snr_sweep(cfg: ExperimentConfig, outdir: str | None = None) -> str:
    """Accuracy of local/remote/joint query modes across the SNR grid."""
    outdir = outdir or cfg.outdir
    rows = []
    for trial, seed in enumerate(_trial_seeds(cfg, "snr")):
        pipe = build_pipeline(cfg, seed)
        model = train_model(pipe, cfg, seed)
        for mode, p_local in MODES.items():
            for snr_db in cfg.snr_grid:
                acc = evaluate_battery(pipe, model, pipe.laplacians, p_local,
                                       snr_db, cfg, seed=seed + 29)
                rows.append([mode, snr_db, trial, acc])
    path = os.path.join(outdir, "snr_sweep.csv")
    _write_csv(path, ["mode", "snr_db", "trial", "accuracy"], rows)
    summary = _aggregate(rows, key_cols=(0, 1), value_col=3)
    _write_csv(os.path.join(outdir, "snr_sweep_summary.csv"),
               ["mode", "snr_db", "accuracy_mean", "accuracy_std"], summary)
    _write_sidecar(os.path.join(outdir, "snr_sweep.json"), cfg, "snr")
    if cfg.plots:
        from .figures import plot_snr_sweep
        plot_snr_sweep(summary, os.path.join(outdir, "snr_sweep.png"))
    return path


def run_fraction_sweep(cfg: ExperimentConfig, outdir: str | None = None) -> str:
    """Accuracy versus fraction of the support set transmitted by the teacher."""
    outdir = outdir or cfg.outdir
    rows = []
    for trial, seed in enumerate(_trial_seeds(cfg, "fraction")):
        pipe = build_pipeline(cfg, seed)
        model = train_model(pipe, cfg, seed)
        for snr_db in cfg.snr_grid:
            for p_local in cfg.p_local_grid:
                acc = evaluate_battery(pipe, model, pipe.laplacians, p_local,
                                       snr_db, cfg, seed=seed + 43)
                rows.append([snr_db, 1.0 - p_local, trial, acc])
    path = os.path.join(outdir, "fraction_sweep.csv")
    _write_csv(path, ["snr_db", "transmitted_fraction", "trial", "accuracy"], rows)
    summary = _aggregate(rows, key_cols=(0, 1), value_col=3)
    _write_csv(os.path.join(outdir, "fraction_sweep_summary.csv"),
               ["snr_db", "transmitted_fraction", "accuracy_mean",
                "accuracy_std"], summary)
    _write_sidecar(os.path.join(outdir, "fraction_sweep.json"), cfg, "fraction")
    if cfg.plots:
        from .figures import plot_fraction_sweep
        plot_fraction_sweep(summary, os.path.join(outdir, "fraction_sweep.png"))
    return path


def run_csi_sweep(cfg: ExperimentConfig, outdir: str | None = None) -> str:
    """Channel-aware training versus the noiseless-trained baseline."""
    outdir = outdir or cfg.outdir
    train_snrs = list(cfg.csi_train_snrs) + [math.inf]
    rows = []
    for trial, seed in enumerate(_trial_seeds(cfg, "csi")):
        pipe = build_pipeline(cfg, seed)
        for train_snr in train_snrs:
            model = train_model(pipe, cfg, seed, csi_snr_db=train_snr)
            for snr_db in cfg.snr_grid:
                acc = evaluate_battery(pipe, model, pipe.laplacians,
                                       p_local=0.5, snr_db=snr_db, cfg=cfg,
                                       seed=seed + 57)
                rows.append([train_snr, snr_db, trial, acc])
    path = os.path.join(outdir, "csi_sweep.csv")
    _write_csv(path, ["train_snr_db", "eval_snr_db", "trial", "accuracy"], rows)
    summary = _aggregate(rows, key_cols=(0, 1), value_col=3)
    _write_csv(os.path.join(outdir, "csi_sweep_summary.csv"),
               ["train_snr_db", "eval_snr_db", "accuracy_mean",
                "accuracy_std"], summary)
    _write_sidecar(os.path.join(outdir, "csi_sweep.json"), cfg, "csi")
    if cfg.plots:
        from .figures import plot_csi_sweep
        plot_csi_sweep(summary, os.path.join(outdir, "csi_sweep.png"))
    return path


def run_dimension_report(cfg: ExperimentConfig, outdir: str | None = None) -> str:
    """Retained edge counts per order across edge-minimization thresholds."""
    outdir = outdir or cfg.outdir
    rows = []
    for trial, seed in enumerate(_trial_seeds(cfg, "dims")):
        pipe = build_pipeline(cfg, seed)
        for fraction in cfg.reduction_fractions:
            threshold = threshold_for_fraction(pipe.laplacians, fraction) \
                if fraction > 0 else 0.0
            _, report = minimize_edges(pipe.laplacians, threshold)
            for row in report.rows():
                rows.append([trial, fraction, row["threshold"], row["order"],
                             row["retained_edges"], row["original_edges"]])
    path = os.path.join(outdir, "dimension_report.csv")
    _write_csv(path, ["trial", "target_fraction", "threshold", "order",
                      "retained_edges", "original_edges"], rows)
    _write_sidecar(os.path.join(outdir, "dimension_report.json"), cfg, "dims")
    if cfg.plots:
        from .figures import plot_dimension_report
        plot_dimension_report(rows, os.path.join(outdir, "dimension_report.png"))
    return path
