"""Decoding, mixdown, and resampling behavior."""

import numpy as np
import pytest
from scipy.io import wavfile

from nver_extract.audio import load_waveform, prepare, resample
from nver_extract.registry import ExtractorError


class TestLoadWaveform:
    def test_int16_scaling(self, tmp_path):
        wavfile.write(tmp_path / "a.wav", 16000, np.array([0, 16384, -16384], dtype=np.int16))
        wave, rate = load_waveform(tmp_path / "a.wav")
        assert rate == 16000
        np.testing.assert_allclose(wave, [0.0, 0.5, -0.5], atol=1e-4)

    def test_stereo_mixdown_averages_channels(self, tmp_path):
        left = np.full(100, 0.5, dtype=np.float32)
        right = np.full(100, -0.25, dtype=np.float32)
        wavfile.write(tmp_path / "s.wav", 16000, np.stack([left, right], axis=1))
        wave, _ = load_waveform(tmp_path / "s.wav")
        np.testing.assert_allclose(wave, 0.125, atol=1e-6)

    def test_undecodable_raises(self, tmp_path):
        (tmp_path / "junk.wav").write_bytes(b"this is not audio")
        with pytest.raises(ExtractorError, match="cannot decode"):
            load_waveform(tmp_path / "junk.wav")

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(ExtractorError, match="cannot decode"):
            load_waveform(tmp_path / "ghost.wav")


class TestResample:
    def test_48k_to_16k_length(self):
        wave = np.random.default_rng(0).standard_normal(48000).astype(np.float32)
        out = resample(wave, 48000)
        assert len(out) == 16000

    def test_16k_passthrough(self):
        wave = np.ones(100, dtype=np.float32)
        assert resample(wave, 16000) is wave

    def test_single_sample_survives(self):
        out = resample(np.zeros(1, dtype=np.float32), 44100)
        assert len(out) == 1
        assert np.all(np.isfinite(out))

    def test_tone_frequency_preserved(self, tmp_path):
        rate = 32000
        t = np.arange(rate) / rate
        tone = (0.5 * np.sin(2 * np.pi * 400 * t)).astype(np.float32)
        wavfile.write(tmp_path / "t.wav", rate, (tone * 32767).astype(np.int16))
        wave = prepare(tmp_path / "t.wav")
        assert len(wave) == 16000
        spectrum = np.abs(np.fft.rfft(wave))
        peak_hz = np.fft.rfftfreq(len(wave), 1 / 16000)[spectrum.argmax()]
        assert abs(peak_hz - 400) < 5
