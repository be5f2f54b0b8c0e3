import numpy as np
import pytest

from spoofbench.manifest import ManifestEntry


def make_pool(n_bona, n_spoof, attacks=("A01",), source="ASV5", prefix=""):
    """Synthetic manifest pool with spoof entries spread over attacks."""
    entries = [
        ManifestEntry(f"{prefix}bona{i}", f"audio/{prefix}bona{i}.wav", "bonafide", "-", source)
        for i in range(n_bona)
    ]
    for i in range(n_spoof):
        attack = attacks[i % len(attacks)]
        entries.append(
            ManifestEntry(
                f"{prefix}spoof{i}", f"audio/{prefix}spoof{i}.wav", "spoof", attack, source
            )
        )
    return entries


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
