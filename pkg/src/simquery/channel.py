"""AWGN channel over real-valued embedding payloads."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ChannelConfig", "Channel", "transmit", "csi_noise_inject"]


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float = math.inf
    seed: int = 0
    enabled: bool = True


def _add_noise(x: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add zero-mean Gaussian noise calibrated to the measured signal power."""
    power = float(np.mean(np.square(x)))
    if power == 0.0 or math.isinf(snr_db):
        return x.copy()
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    return x + sigma * rng.standard_normal(x.shape)


def transmit(x, cfg: ChannelConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Pass a payload through the channel; disabled or infinite SNR is identity."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("cannot transmit an empty payload")
    if not cfg.enabled:
        return x.copy()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    return _add_noise(x, cfg.snr_db, rng)


class Channel:
    """Stateful channel: sequential noise draws and symbol accounting."""

    def __init__(self, cfg: ChannelConfig):
        self.cfg = cfg
        self.symbols_sent = 0
        self.reset()

    def reset(self) -> None:
        self._rng = np.random.default_rng(self.cfg.seed)
        self.symbols_sent = 0

    def transmit(self, x) -> np.ndarray:
        y = transmit(x, self.cfg, self._rng)
        self.symbols_sent += y.size
        return y


def csi_noise_inject(hidden: np.ndarray, train_snr_db: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Channel-aware training: corrupt encoder output at the training SNR.

    The noise is treated as a constant in the backward pass, so gradients flow
    through unchanged.
    """
    hidden = np.asarray(hidden, dtype=float)
    if math.isinf(train_snr_db) or hidden.size == 0:
        return hidden.copy()
    return _add_noise(hidden, train_snr_db, rng)
