"""Dataset manifests: parsing, stratified sampling and multi-source mixing.

A manifest is a TSV file with header
``trial_id\taudio_path\tlabel\tattack_id\tsource\taugmentation``
(UTF-8, ``\n`` line endings, no quoting). All sampling is driven by
numpy's PCG64 generator so results are reproducible across platforms
for a fixed seed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

LABELS = ("bonafide", "spoof")
SOURCES = ("ASV5", "ASV19", "ASV21", "FoR", "ITW", "synthetic")
AUGMENTATIONS = ("none", "noise", "reverb")

HEADER = ("trial_id", "audio_path", "label", "attack_id", "source", "augmentation")

NO_ATTACK = "-"


class ManifestError(ValueError):
    """Malformed manifest content (bad token, duplicate id, bad header)."""

    def __init__(self, message: str, line: int | None = None, trial_id: str | None = None):
        super().__init__(message)
        self.line = line
        self.trial_id = trial_id


class StratumError(ValueError):
    """A sampling stratum cannot satisfy the requested count."""

    def __init__(self, stratum: str, requested: int, available: int):
        super().__init__(
            f"stratum {stratum!r}: requested {requested} entries, only {available} available"
        )
        self.stratum = stratum
        self.requested = requested
        self.available = available


@dataclass(frozen=True)
class ManifestEntry:
    trial_id: str
    audio_path: str
    label: str
    attack_id: str
    source: str
    augmentation: str = "none"

    def __post_init__(self):
        if self.label not in LABELS:
            raise ManifestError(f"unknown label {self.label!r}", trial_id=self.trial_id)
        if self.source not in SOURCES:
            raise ManifestError(f"unknown source {self.source!r}", trial_id=self.trial_id)
        if self.augmentation not in AUGMENTATIONS:
            raise ManifestError(
                f"unknown augmentation {self.augmentation!r}", trial_id=self.trial_id
            )
        if self.label == "bonafide" and self.attack_id != NO_ATTACK:
            raise ManifestError(
                f"bonafide entry {self.trial_id!r} must have attack_id '-', "
                f"got {self.attack_id!r}",
                trial_id=self.trial_id,
            )


@dataclass(frozen=True)
class MixRecipe:
    """Per-source sample counts plus an optional class-ratio target.

    ``ratio`` (spoof files per bonafide file) is honored by the pipeline
    for single-source recipes via stratified sampling; plain ``mix``
    samples each source uniformly.
    """

    counts: Mapping[str, int]
    ratio: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.counts:
            raise ValueError("recipe has no source counts")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("negative count in recipe")
        if all(c == 0 for c in self.counts.values()):
            raise ValueError("recipe requests zero samples")
        for source in self.counts:
            if source not in SOURCES:
                raise ValueError(f"unknown source {source!r} in recipe")

    @property
    def total(self) -> int:
        return sum(self.counts.values())


# Built-in dataset variants, expressed as recipes over user-provided pools.
PRESETS: dict[str, MixRecipe] = {
    "medium-27k": MixRecipe(counts={"ASV5": 27000}, ratio=8.0, seed=0),
    "augm-31k": MixRecipe(
        counts={"ASV5": 13000, "ASV19": 6100, "ASV21": 8600, "ITW": 1600, "FoR": 1800},
        seed=0,
    ),
    "augm-114k": MixRecipe(
        counts={"ASV5": 102000, "ASV19": 2900, "ASV21": 6800, "FoR": 1600, "ITW": 1600},
        seed=0,
    ),
}


def read_manifest(path) -> list[ManifestEntry]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_manifest(fh)


def parse_manifest(stream) -> list[ManifestEntry]:
    """Parse a manifest TSV from a text stream or string."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    lines = stream.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ManifestError("empty manifest: missing header", line=1)
    header = tuple(lines[0].split("\t"))
    if header != HEADER:
        raise ManifestError(f"bad header {header!r}", line=1)

    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        fields = raw.split("\t")
        if len(fields) != len(HEADER):
            raise ManifestError(
                f"expected {len(HEADER)} fields, got {len(fields)}", line=lineno
            )
        try:
            entry = ManifestEntry(*fields)
        except ManifestError as exc:
            raise ManifestError(str(exc), line=lineno, trial_id=fields[0]) from None
        if entry.trial_id in seen:
            raise ManifestError(
                f"duplicate trial_id {entry.trial_id!r}",
                line=lineno,
                trial_id=entry.trial_id,
            )
        seen.add(entry.trial_id)
        entries.append(entry)
    return entries


def serialize_manifest(entries: Iterable[ManifestEntry]) -> str:
    lines = ["\t".join(HEADER)]
    for e in entries:
        lines.append(
            "\t".join((e.trial_id, e.audio_path, e.label, e.attack_id, e.source, e.augmentation))
        )
    return "\n".join(lines) + "\n"


def write_manifest(entries: Iterable[ManifestEntry], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(serialize_manifest(entries))


def _sample_without_replacement(rng: np.random.Generator, items: list, k: int) -> list:
    idx = rng.choice(len(items), size=k, replace=False)
    return [items[i] for i in idx]


def stratified_sample(
    entries: list[ManifestEntry], total: int, ratio: float, seed: int
) -> list[ManifestEntry]:
    """Draw ``total`` entries at ``ratio`` spoof per bonafide, spoof split
    equally across attacks (remainder round-robin in attack_id order).

    Bonafide count is floor(total / (ratio + 1)); the remainder goes to
    spoof. Sampling is without replacement, deterministic per seed.
    """
    if ratio <= 0:
        raise ValueError("ratio must be > 0")
    if total <= 0:
        raise ValueError("total must be > 0")

    n_bona = math.floor(total / (ratio + 1))
    n_spoof = total - n_bona

    bona = [e for e in entries if e.label == "bonafide"]
    spoof_by_attack: dict[str, list[ManifestEntry]] = {}
    for e in entries:
        if e.label == "spoof":
            spoof_by_attack.setdefault(e.attack_id, []).append(e)

    if len(bona) < n_bona:
        raise StratumError("bonafide", n_bona, len(bona))
    if not spoof_by_attack and n_spoof > 0:
        raise StratumError("spoof", n_spoof, 0)

    attacks = sorted(spoof_by_attack)
    quota = {a: n_spoof // len(attacks) for a in attacks}
    for i in range(n_spoof % len(attacks)):
        quota[attacks[i % len(attacks)]] += 1
    for a in attacks:
        if len(spoof_by_attack[a]) < quota[a]:
            raise StratumError(a, quota[a], len(spoof_by_attack[a]))

    rng = np.random.default_rng(seed)
    out = _sample_without_replacement(rng, bona, n_bona)
    for a in attacks:
        out.extend(_sample_without_replacement(rng, spoof_by_attack[a], quota[a]))
    return out


def mix(
    recipe: MixRecipe, pools: Mapping[str, list[ManifestEntry]]
) -> list[ManifestEntry]:
    """Sample ``recipe.counts[source]`` entries from each pool, without
    replacement. Trial ids colliding across sources get a source prefix.
    """
    rng = np.random.default_rng(recipe.seed)
    out: list[ManifestEntry] = []
    seen: set[str] = set()
    for source in sorted(recipe.counts):
        want = recipe.counts[source]
        pool = pools.get(source, [])
        if len(pool) < want:
            raise StratumError(source, want, len(pool))
        for e in _sample_without_replacement(rng, pool, want):
            if e.trial_id in seen:
                e = replace(e, trial_id=f"{source}:{e.trial_id}")
            seen.add(e.trial_id)
            out.append(e)
    return out


def parse_recipe(text: str) -> MixRecipe:
    """Parse the flat key-value recipe grammar.

    Lines are ``key = value``; ``#`` starts a comment. Keys are
    ``<source>.count``, ``ratio`` and ``seed``.
    """
    counts: dict[str, int] = {}
    ratio: float | None = None
    seed = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"recipe line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "ratio":
            ratio = float(value)
        elif key == "seed":
            seed = int(value)
        elif key.endswith(".count"):
            counts[key[: -len(".count")]] = int(value)
        else:
            raise ValueError(f"recipe line {lineno}: unknown key {key!r}")
    return MixRecipe(counts=counts, ratio=ratio, seed=seed)


def serialize_recipe(recipe: MixRecipe) -> str:
    lines = [f"{source}.count = {count}" for source, count in sorted(recipe.counts.items())]
    if recipe.ratio is not None:
        lines.append(f"ratio = {recipe.ratio:g}")
    lines.append(f"seed = {recipe.seed}")
    return "\n".join(lines) + "\n"
