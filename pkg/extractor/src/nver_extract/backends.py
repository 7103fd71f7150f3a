"""Inference backends that turn a waveform into one pooled embedding row.

A backend exposes ``dim`` and ``embed(waveform) -> float32[dim]``. The
huggingface backend wraps any transformers speech encoder: the frozen
model's last hidden state is average-pooled over time. State-space
(audio-mamba) checkpoints have no transformers implementation; their
entries resolve through a user-supplied plugin instead.
"""

from __future__ import annotations

import importlib
from typing import Protocol

import numpy as np

from .registry import ExtractorError, lookup

# shortest input the conv frontends of the supported encoders accept
MIN_SAMPLES = 400


class EmbeddingBackend(Protocol):
    dim: int

    def embed(self, waveform: np.ndarray) -> np.ndarray: ...


class HFBackend:
    """Average-pooled last hidden state of a frozen transformers encoder."""

    def __init__(self, model, feature_extractor, dim: int, sample_rate: int = 16_000):
        import torch

        self._torch = torch
        self.model = model.eval()
        for p in self.model.parameters():  # frozen: never updated
            p.requires_grad_(False)
        self.feature_extractor = feature_extractor
        self.dim = int(dim)
        self.sample_rate = sample_rate

    def embed(self, waveform: np.ndarray) -> np.ndarray:
        wave = np.asarray(waveform, dtype=np.float32).reshape(-1)
        if len(wave) < MIN_SAMPLES:  # degenerate clips: pad, never crash
            wave = np.pad(wave, (0, MIN_SAMPLES - len(wave)))
        features = self.feature_extractor(
            wave, sampling_rate=self.sample_rate, return_tensors="pt"
        )
        with self._torch.no_grad():
            hidden = self.model(features.input_values).last_hidden_state
        pooled = hidden.mean(dim=1).squeeze(0).cpu().numpy().astype(np.float32)
        if pooled.shape != (self.dim,):
            raise ExtractorError(
                f"model emitted dim {pooled.shape}, expected ({self.dim},)"
            )
        return pooled


def load_hf_backend(checkpoint: str, dim: int) -> HFBackend:
    from transformers import AutoFeatureExtractor, AutoModel

    try:
        model = AutoModel.from_pretrained(checkpoint)
        feature_extractor = AutoFeatureExtractor.from_pretrained(checkpoint)
    except Exception as exc:
        raise ExtractorError(
            f"cannot load checkpoint {checkpoint!r} "
            f"(is it cached locally / is the hub reachable?): {exc}"
        ) from exc
    return HFBackend(model, feature_extractor, dim)


def load_plugin_backend(spec: str, fm_name: str) -> EmbeddingBackend:
    """Resolve ``package.module:factory``; the factory receives the FM name."""
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise ExtractorError(f"backend spec must look like 'pkg.module:factory', got {spec!r}")
    try:
        module = importlib.import_module(module_name)
        factory = getattr(module, attr)
    except (ImportError, AttributeError) as exc:
        raise ExtractorError(f"cannot load backend {spec!r}: {exc}") from exc
    return factory(fm_name)


def resolve_backend(fm_name: str, plugin: str | None = None) -> EmbeddingBackend:
    """Pick the backend for a registered FM, validating its emitted width."""
    entry = lookup(fm_name)
    if plugin is not None:
        backend = load_plugin_backend(plugin, fm_name)
        if backend.dim != entry.dim:
            raise ExtractorError(
                f"backend for {fm_name} emits dim {backend.dim}, "
                f"registry requires {entry.dim}"
            )
        return backend
    if entry.family == "hf":
        return load_hf_backend(entry.checkpoint, entry.dim)
    raise ExtractorError(
        f"{fm_name} is a state-space model without a transformers port; "
        "install its runtime and pass --backend package.module:factory"
    )
