"""Command-line interface: build structures, train models, run sweeps."""
from __future__ import annotations

import json
import math

import click
import numpy as np

from .channel import Channel, ChannelConfig
from .complexes import build_complex
from .corpus import load_corpus, random_walk_sample, save_corpus, synth_corpus
from .experiments import (ExperimentConfig, build_pipeline, run_csi_sweep,
                          run_dimension_report, run_fraction_sweep,
                          run_reduction_sweep, run_snr_sweep, train_model)
from .protocol import initial_knowledge, run_query
from .reduction import LaplacianSet
from .scae import ScaeModel


def _load_config(config_path, **overrides) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(config_path) if config_path \
        else ExperimentConfig()
    return cfg.override(**overrides)


@click.group()
def main():
    """Semantic query over minimal simplicial structures."""


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True),
              help="JSON Lines corpus; omit to synthesize one.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--walk-papers", type=int, default=None)
@click.option("--out", type=click.Path(), default="complex.json",
              show_default=True)
@click.option("--save-sample", type=click.Path(), default=None,
              help="Also write the sampled sub-corpus as JSON Lines.")
def build(corpus_path, config_path, seed, walk_papers, out, save_sample):
    """Sample a corpus and build its simplicial complex."""
    cfg = _load_config(config_path, corpus_path=corpus_path, seed=seed,
                       walk_papers=walk_papers)
    pipe = build_pipeline(cfg, cfg.seed)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(pipe.complex.to_json())
    if save_sample:
        save_corpus(pipe.graph, save_sample)
    counts = pipe.complex.counts()
    click.echo(f"papers: {len(pipe.graph)}  authors: {len(pipe.graph.authors)}")
    click.echo(f"simplices per order: {counts}  (total {sum(counts)})")
    click.echo(f"wrote {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--csi-snr", type=float, default=None,
              help="Inject channel noise at this SNR (dB) during training.")
@click.option("--model", "model_path", type=click.Path(), default="model.json",
              show_default=True)
def train(config_path, corpus_path, seed, epochs, learning_rate, csi_snr,
          model_path):
    """Train the masked autoencoder on a sampled complex."""
    cfg = _load_config(config_path, corpus_path=corpus_path, seed=seed,
                       epochs=epochs, learning_rate=learning_rate)
    pipe = build_pipeline(cfg, cfg.seed)
    model = train_model(pipe, cfg, cfg.seed, csi_snr_db=csi_snr)
    model.save(model_path)
    click.echo(f"trained {pipe.complex.size()}-simplex structure, "
               f"wrote {model_path}")


@main.group()
def sweep():
    """Experiment sweeps writing CSV, sidecar JSON, and figures."""


def _sweep_options(fn):
    fn = click.option("--config", "config_path",
                      type=click.Path(exists=True))(fn)
    fn = click.option("--corpus", "corpus_path",
                      type=click.Path(exists=True))(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--trials", type=int, default=None)(fn)
    fn = click.option("--outdir", type=click.Path(), default=None)(fn)
    fn = click.option("--no-plots", is_flag=True, default=False)(fn)
    return fn


def _run_sweep(runner, config_path, corpus_path, seed, trials, outdir,
               no_plots):
    cfg = _load_config(config_path, corpus_path=corpus_path, seed=seed,
                       trials=trials, outdir=outdir)
    if no_plots:
        cfg = cfg.override(plots=False)
    path = runner(cfg)
    click.echo(f"wrote {path}")


@sweep.command()
@_sweep_options
def reduction(**kwargs):
    """Query accuracy across structure-reduction schemes and levels."""
    _run_sweep(run_reduction_sweep, **kwargs)


@sweep.command()
@_sweep_options
def snr(**kwargs):
    """Query accuracy of local/remote/joint modes across SNR."""
    _run_sweep(run_snr_sweep, **kwargs)


@sweep.command()
@_sweep_options
def fraction(**kwargs):
    """Query accuracy across transmitted fractions of the support set."""
    _run_sweep(run_fraction_sweep, **kwargs)


@sweep.command()
@_sweep_options
def csi(**kwargs):
    """Channel-aware training versus noiseless baseline."""
    _run_sweep(run_csi_sweep, **kwargs)


@sweep.command()
@_sweep_options
def dims(**kwargs):
    """Retained edges per simplex order across reduction thresholds."""
    _run_sweep(run_dimension_report, **kwargs)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", type=click.Path(exists=True))
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--sigma", required=True,
              help="Comma-separated author ids of the query simplex.")
@click.option("--p-local", type=float, default=0.5, show_default=True)
@click.option("--snr", "snr_db", type=float, default=None,
              help="Channel SNR in dB; omit for a noiseless channel.")
@click.option("--seed", type=int, default=None)
def query(config_path, corpus_path, model_path, sigma, p_local, snr_db, seed):
    """Run one teacher/student query round and print its trace as JSON."""
    cfg = _load_config(config_path, corpus_path=corpus_path, seed=seed)
    pipe = build_pipeline(cfg, cfg.seed)
    model = ScaeModel.load(model_path)
    state = initial_knowledge(pipe.complex, cfg.student_fraction,
                              seed=cfg.seed + 101)
    channel = Channel(ChannelConfig(
        snr_db=math.inf if snr_db is None else snr_db, seed=cfg.seed + 102))
    rng = np.random.default_rng(cfg.seed + 103)
    sigma_q = tuple(part.strip() for part in sigma.split(",") if part.strip())
    trace = run_query(sigma_q, pipe.complex, pipe.laplacians, model, state,
                      p_local, channel, rng, tau_acc=cfg.tau_acc)
    click.echo(trace.to_json())


if __name__ == "__main__":
    main()
