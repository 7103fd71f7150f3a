"""WAV decoding, mono mixdown, and resampling to the model rate."""

from __future__ import annotations

import math

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .registry import ExtractorError

TARGET_RATE = 16_000


def load_waveform(path) -> tuple[np.ndarray, int]:
    """Decode a WAV file to a float32 mono waveform in [-1, 1].

    Multi-channel audio is mixed down by averaging the channels.
    """
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise ExtractorError(f"cannot decode {path}: {exc}") from exc
    if data.size == 0:
        raise ExtractorError(f"cannot decode {path}: no samples")
    if data.dtype == np.uint8:
        wave = (data.astype(np.float32) - 128.0) / 128.0
    elif data.dtype == np.int16:
        wave = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        wave = data.astype(np.float32) / 2147483648.0
    else:  # float wav files already sit in [-1, 1]
        wave = data.astype(np.float32)
    if wave.ndim == 2:
        wave = wave.mean(axis=1)
    return np.ascontiguousarray(wave, dtype=np.float32), int(rate)


def resample(wave: np.ndarray, rate: int, target: int = TARGET_RATE) -> np.ndarray:
    """Polyphase resampling; single-sample inputs survive as single samples."""
    if rate == target:
        return wave
    if len(wave) < 2:
        # too short for filtering; duration is degenerate either way
        return wave.copy()
    g = math.gcd(target, rate)
    out = resample_poly(wave, target // g, rate // g)
    return np.ascontiguousarray(out, dtype=np.float32)


def prepare(path, target: int = TARGET_RATE) -> np.ndarray:
    """Full pipeline: decode, mixdown, resample."""
    wave, rate = load_waveform(path)
    return resample(wave, rate, target)
