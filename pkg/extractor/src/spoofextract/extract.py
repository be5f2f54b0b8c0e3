"""Run a pretrained speech model over a manifest and dump framewise or
pooled embeddings to an SPB1 store.

The manifest is the primary toolkit's TSV format
(``trial_id\taudio_path\tlabel\tattack_id\tsource\taugmentation``);
audio is 16-bit PCM mono WAV. Inference runs in eval mode under
``torch.no_grad`` so extraction is deterministic given weights + audio.
"""

from __future__ import annotations

import logging
import wave
from pathlib import Path

import numpy as np
import torch

from .registry import ModelSpec
from .spb1 import write_spb1

log = logging.getLogger("spoofextract")

MANIFEST_HEADER = ("trial_id", "audio_path", "label", "attack_id", "source", "augmentation")


class ExtractError(ValueError):
    pass


def read_manifest(path) -> list[dict[str, str]]:
    """Minimal reader for the manifest TSV interface."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or tuple(lines[0].split("\t")) != MANIFEST_HEADER:
        raise ExtractError(f"{path}: bad or missing manifest header")
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        fields = raw.split("\t")
        if len(fields) != len(MANIFEST_HEADER):
            raise ExtractError(f"{path}:{lineno}: expected {len(MANIFEST_HEADER)} fields")
        rows.append(dict(zip(MANIFEST_HEADER, fields)))
    return rows


def read_wav(path) -> np.ndarray:
    """16-bit PCM mono WAV to float32 samples in [-1, 1)."""
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
            raise ExtractError(f"{path}: expected 16-bit PCM mono")
        raw = wf.readframes(wf.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0


def load_model(spec: ModelSpec, device: str = "cpu") -> torch.nn.Module:
    from transformers import AutoModel

    model = AutoModel.from_pretrained(spec.hf_name, revision=spec.revision)
    return model.to(device).eval()


def embed(model: torch.nn.Module, samples: np.ndarray, device: str = "cpu") -> np.ndarray:
    """Final-layer hidden states for one utterance, as a TxD float32 array."""
    with torch.no_grad():
        wav = torch.from_numpy(np.ascontiguousarray(samples)).to(device)[None, :]
        hidden = model(wav).last_hidden_state
    return hidden[0].cpu().numpy().astype(np.float32)


def extract(
    manifest_path,
    spec: ModelSpec,
    out_path,
    model: torch.nn.Module | None = None,
    audio_root=".",
    pool: bool = True,
    device: str = "cpu",
) -> list[str]:
    """Extract one record per manifest trial into ``out_path``.

    Unreadable audio files are skipped with their trial_id logged;
    the list of skipped trial_ids is returned so callers can exit
    nonzero. A dimension mismatch against the registry aborts outright.
    """
    rows = read_manifest(manifest_path)
    if model is None:
        model = load_model(spec, device)
    model.eval()

    audio_root = Path(audio_root)
    records: list[tuple[str, np.ndarray]] = []
    skipped: list[str] = []
    for row in rows:
        try:
            samples = read_wav(audio_root / row["audio_path"])
        except (OSError, wave.Error, ExtractError) as exc:
            log.error("skipping trial %r: %s", row["trial_id"], exc)
            skipped.append(row["trial_id"])
            continue
        frames = embed(model, samples, device)
        if frames.shape[1] != spec.dim:
            raise ExtractError(
                f"model {spec.model_id!r} produced dim {frames.shape[1]}, "
                f"registry declares {spec.dim}"
            )
        if pool:
            frames = frames.astype(np.float64).mean(axis=0, keepdims=True).astype(np.float32)
        records.append((row["trial_id"], frames))

    if not records:
        raise ExtractError("no trials extracted")
    write_spb1(records, out_path)
    return skipped
