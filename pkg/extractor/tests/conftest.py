import csv

import numpy as np
import pytest
from scipy.io import wavfile


@pytest.fixture
def corpus(tmp_path):
    """A tiny wav corpus with a label map covering the common cases."""
    root = tmp_path / "audio"
    root.mkdir()
    rng = np.random.default_rng(0)

    def tone(freq, seconds, rate):
        t = np.arange(int(seconds * rate)) / rate
        return (0.4 * np.sin(2 * np.pi * freq * t)).astype(np.float32)

    clips = {
        "laugh_01.wav": (22050, tone(440, 0.25, 22050)),
        "cry_01.wav": (48000, tone(220, 0.3, 48000) + 0.01 * rng.standard_normal(14400).astype(np.float32)),
        "sigh_01.wav": (16000, tone(110, 0.2, 16000)),
    }
    for name, (rate, wave) in clips.items():
        wavfile.write(root / name, rate, (wave * 32767).astype(np.int16))
    # stereo clip: mixdown case
    stereo = np.stack([tone(330, 0.2, 16000), tone(550, 0.2, 16000)], axis=1)
    wavfile.write(root / "gasp_01.wav", 16000, (stereo * 32767).astype(np.int16))
    # degenerate single-sample silent clip
    wavfile.write(root / "blip_01.wav", 16000, np.zeros(1, dtype=np.int16))

    labels = tmp_path / "labels.csv"
    with open(labels, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["path", "label", "speaker", "dataset"])
        writer.writerow(["laugh_01.wav", "joy", "spk1", "toy"])
        writer.writerow(["cry_01.wav", "sadness", "spk2", "toy"])
        writer.writerow(["sigh_01.wav", "fatigue", "spk1", "toy"])
        writer.writerow(["gasp_01.wav", "surprise", "spk2", "toy"])
        writer.writerow(["blip_01.wav", "joy", "spk1", "toy"])
    return root, labels
