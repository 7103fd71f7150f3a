"""Offline embedding extraction for the emotion-recognition engine."""

from .audio import load_waveform, prepare, resample
from .backends import HFBackend, load_hf_backend, resolve_backend
from .extract import ExtractionJob, ExtractionResult, extract_embeddings
from .registry import REGISTRY, ExtractorError, lookup

__version__ = "0.1.0"
