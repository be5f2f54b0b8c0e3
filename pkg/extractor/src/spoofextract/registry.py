"""Model registry: the pretrained speech models the extractor knows how
to run, with their pinned checkpoint revisions and declared embedding
dimensions.

Base (LibriSpeech-pretrained) models are available by default; the
larger topline models are gated behind ``allow_restricted``.
"""

from __future__ import annotations

from dataclasses import dataclass


class RegistryError(KeyError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    model_id: str       # registry key
    hf_name: str        # Hugging Face hub repository
    dim: int            # declared embedding dimension (validated on output)
    revision: str       # pinned checkpoint revision
    restricted: bool = False


_MODELS = (
    ModelSpec("wav2vec2-base", "facebook/wav2vec2-base", 768, "main"),
    ModelSpec("wavlm-base", "microsoft/wavlm-base", 768, "main"),
    ModelSpec("hubert-base", "facebook/hubert-base-ls960", 768, "main"),
    ModelSpec("wav2vec2-large", "facebook/wav2vec2-large", 1024, "main", restricted=True),
    ModelSpec("wavlm-large", "microsoft/wavlm-large", 1024, "main", restricted=True),
    ModelSpec("hubert-large", "facebook/hubert-large-ll60k", 1024, "main", restricted=True),
    ModelSpec("wav2vec2-xls-r-2b", "facebook/wav2vec2-xls-r-2b", 1920, "main", restricted=True),
)

REGISTRY: dict[str, ModelSpec] = {m.model_id: m for m in _MODELS}


def resolve(model_id: str, allow_restricted: bool = False) -> ModelSpec:
    spec = REGISTRY.get(model_id)
    if spec is None:
        raise RegistryError(
            f"unknown model {model_id!r}; known: {', '.join(sorted(REGISTRY))}"
        )
    if spec.restricted and not allow_restricted:
        raise RegistryError(
            f"model {model_id!r} is restricted; pass allow_restricted to use it"
        )
    return spec
