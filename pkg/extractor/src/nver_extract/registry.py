"""Known foundation models and the embedding widths they must emit."""

from __future__ import annotations

from dataclasses import dataclass


class ExtractorError(Exception):
    """Raised for unusable models, undecodable inputs, or dimension drift."""


@dataclass(frozen=True)
class ModelEntry:
    name: str
    dim: int
    family: str  # "hf" = huggingface transformers checkpoint, "mamba" = state-space
    checkpoint: str | None = None


REGISTRY: dict[str, ModelEntry] = {
    entry.name: entry
    for entry in (
        ModelEntry("wavlm-base", 768, "hf", "microsoft/wavlm-base"),
        ModelEntry("unispeech-sat-base", 768, "hf", "microsoft/unispeech-sat-base"),
        ModelEntry("wav2vec2-base", 768, "hf", "facebook/wav2vec2-base"),
        ModelEntry("hubert-base", 768, "hf", "facebook/hubert-base-ls960"),
        ModelEntry("audio-mamba-tiny", 960, "mamba"),
        ModelEntry("audio-mamba-small", 1920, "mamba"),
        ModelEntry("audio-mamba-base", 3840, "mamba"),
    )
}


def lookup(fm_name: str) -> ModelEntry:
    if fm_name not in REGISTRY:
        known = ", ".join(sorted(REGISTRY))
        raise ExtractorError(f"unknown foundation model {fm_name!r}; known: {known}")
    return REGISTRY[fm_name]
