"""Signal-level augmentations: additive white noise at a target SNR and
reverberation by impulse-response convolution, plus the half-of-bonafides
random assignment policy.

Audio I/O is limited to 16-bit PCM mono WAV.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import convolve

from .manifest import ManifestEntry


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray  # float64 amplitudes, nominally in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise AudioError("audio must be a non-empty 1-D sample array")
        if self.sample_rate <= 0:
            raise AudioError("sample_rate must be > 0")


@dataclass(frozen=True)
class AugmentPolicy:
    snr_db: float = 25.0
    bonafide_fraction: float = 0.5
    ir_path: str | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.bonafide_fraction <= 1.0:
            raise ValueError("bonafide_fraction must be in [0, 1]")


def add_white_noise(audio: AudioBuffer, snr_db: float, seed: int) -> AudioBuffer:
    """Add zero-mean Gaussian noise scaled so that
    10*log10(P_signal / P_noise) == snr_db, with powers measured over the
    whole utterance. Deterministic per seed.
    """
    x = audio.samples
    p_signal = float(np.mean(x**2))
    if p_signal == 0.0:
        raise AudioError("all-zero input: SNR undefined")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(x.size)
    p_noise_target = p_signal * 10.0 ** (-snr_db / 10.0)
    noise *= math.sqrt(p_noise_target / float(np.mean(noise**2)))
    return AudioBuffer(x + noise, audio.sample_rate)


def convolve_ir(audio: AudioBuffer, ir: AudioBuffer) -> np.ndarray:
    """Full linear convolution with the impulse response, truncated to the
    input length. No normalization (linear in the audio argument)."""
    if audio.sample_rate != ir.sample_rate:
        raise AudioError(
            f"sample-rate mismatch: audio {audio.sample_rate} Hz, ir {ir.sample_rate} Hz"
        )
    return convolve(audio.samples, ir.samples, mode="full")[: audio.samples.size]


def reverberate(audio: AudioBuffer, ir: AudioBuffer) -> AudioBuffer:
    """Convolve with the impulse response and peak-normalize back to the
    input's peak amplitude, so reverberated files never clip."""
    wet = convolve_ir(audio, ir)
    peak_in = float(np.max(np.abs(audio.samples)))
    peak_out = float(np.max(np.abs(wet)))
    if peak_out > 0.0:
        wet = wet * (peak_in / peak_out)
    return AudioBuffer(wet, audio.sample_rate)


def apply_policy(
    manifest: list[ManifestEntry], policy: AugmentPolicy
) -> list[ManifestEntry]:
    """Tag round(bonafide_fraction * #bonafide) bonafide entries with one
    augmentation drawn uniformly from {noise, reverb}; spoof entries are
    never altered. Deterministic per policy seed; rounding is half-up.
    """
    bona_idx = [i for i, e in enumerate(manifest) if e.label == "bonafide"]
    k = math.floor(policy.bonafide_fraction * len(bona_idx) + 0.5)
    rng = np.random.default_rng(policy.seed)
    chosen = rng.choice(len(bona_idx), size=k, replace=False) if k else []
    kinds = rng.choice(["noise", "reverb"], size=k)
    out = list(manifest)
    for j, which in zip(chosen, kinds):
        i = bona_idx[j]
        out[i] = replace(out[i], augmentation=str(which))
    return out


def synthetic_impulse_response(
    sample_rate: int = 16000, duration: float = 0.3, decay: float = 20.0, seed: int = 7
) -> AudioBuffer:
    """Exponentially decaying noise burst, a stand-in room response for
    tests and demos (no external RIR download needed)."""
    n = int(duration * sample_rate)
    rng = np.random.default_rng(seed)
    t = np.arange(n) / sample_rate
    ir = rng.standard_normal(n) * np.exp(-decay * t)
    ir[0] = 1.0  # direct path
    ir /= np.max(np.abs(ir))
    return AudioBuffer(ir, sample_rate)


def read_wav(path) -> AudioBuffer:
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise AudioError(f"{path}: expected mono, got {wf.getnchannels()} channels")
        if wf.getsampwidth() != 2:
            raise AudioError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
        raw = wf.readframes(wf.getnframes())
        rate = wf.getframerate()
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, rate)


def write_wav(audio: AudioBuffer, path) -> None:
    clipped = np.clip(audio.samples, -1.0, 32767.0 / 32768.0)
    pcm = np.round(clipped * 32768.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate)
        wf.writeframes(pcm.tobytes())
