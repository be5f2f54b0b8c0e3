from .extract import ExtractError, embed, extract, read_manifest, read_wav
from .registry import REGISTRY, ModelSpec, RegistryError, resolve
from .spb1 import Spb1Error, write_spb1

__version__ = "0.1.0"

__all__ = [
    "ExtractError",
    "ModelSpec",
    "REGISTRY",
    "RegistryError",
    "Spb1Error",
    "embed",
    "extract",
    "read_manifest",
    "read_wav",
    "resolve",
    "write_spb1",
]
