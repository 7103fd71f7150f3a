"""Deterministic stub backend for offline tests and pipeline dry runs.

Usable as ``--backend nver_extract.testing:stub``: embeds a waveform as a
seeded random projection of simple signal statistics, at the registry
width of the requested model. No checkpoints, no network, fully
reproducible.
"""

from __future__ import annotations

import numpy as np

from .registry import lookup


class StubBackend:
    def __init__(self, dim: int, seed: int = 0):
        self.dim = int(dim)
        rng = np.random.default_rng(seed)
        self._projection = rng.standard_normal((8, self.dim)).astype(np.float32)

    def embed(self, waveform: np.ndarray) -> np.ndarray:
        wave = np.asarray(waveform, dtype=np.float64).reshape(-1)
        if wave.size == 0:
            wave = np.zeros(1)
        n = len(wave)
        thirds = max(n // 3, 1)
        stats = np.array(
            [
                wave.mean(),
                wave.std(),
                np.abs(wave).mean(),
                wave[:thirds].mean(),
                wave[-thirds:].mean(),
                float(np.count_nonzero(np.diff(np.signbit(wave)))) / n,
                np.log1p(n) / 10.0,
                wave.max(initial=0.0) - wave.min(initial=0.0),
            ],
            dtype=np.float32,
        )
        return (stats @ self._projection).astype(np.float32)


def stub(fm_name: str) -> StubBackend:
    return StubBackend(lookup(fm_name).dim)
