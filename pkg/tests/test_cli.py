import json

import numpy as np
import pytest

from spoofbench.cli import derive_seed, main
from spoofbench.embedding import EmbeddingRecord, EmbeddingStore, read_store, write_store
from spoofbench.manifest import read_manifest, write_manifest
from spoofbench.metrics import read_scores
from conftest import make_pool


def make_synthetic_system(rng, manifest, dim=6, gap=4.0):
    """Embedding store where class separation along axis 0 is ``gap``."""
    records = []
    for e in manifest:
        x = rng.standard_normal(dim)
        x[0] += (gap / 2.0) if e.label == "bonafide" else (-gap / 2.0)
        records.append(EmbeddingRecord(e.trial_id, x[None, :]))
    return EmbeddingStore(records)


@pytest.fixture
def workdir(tmp_path, rng):
    train = make_pool(40, 160, ("A01", "A02"), prefix="tr")
    dev = make_pool(30, 120, ("A01", "A02"), prefix="dv")
    write_manifest(train, tmp_path / "train.tsv")
    write_manifest(dev, tmp_path / "dev.tsv")
    store = EmbeddingStore(
        make_synthetic_system(rng, train).records + make_synthetic_system(rng, dev).records
    )
    write_store(store, tmp_path / "feats.spb")
    return tmp_path


def run(args):
    return main([str(a) for a in args])


def test_seed_derivation_stable():
    assert derive_seed(0, "sample") == derive_seed(0, "sample")
    assert derive_seed(0, "sample") != derive_seed(0, "mix")
    assert derive_seed(0, "sample") != derive_seed(1, "sample")


def test_manifest_sample_subcommand(workdir):
    out_dir = workdir / "run1"
    rc = run(["manifest", "sample", "--manifest", workdir / "train.tsv",
              "--total", 90, "--ratio", 8, "--out-dir", out_dir, "--out", "sampled.tsv"])
    assert rc == 0
    sampled = read_manifest(out_dir / "sampled.tsv")
    assert len(sampled) == 90
    assert sum(e.label == "bonafide" for e in sampled) == 10
    assert (out_dir / "run_config.json").exists()
    artifacts = json.loads((out_dir / "artifacts.json").read_text())
    assert str(out_dir / "sampled.tsv") in artifacts


def test_manifest_sample_error_exits_nonzero(workdir):
    rc = run(["manifest", "sample", "--manifest", workdir / "train.tsv",
              "--total", 100000, "--out-dir", workdir / "bad"])
    assert rc == 1


def test_train_score_eer_chain(workdir, capsys):
    out = workdir / "chain"
    assert run(["train", "--store", workdir / "feats.spb",
                "--manifest", workdir / "train.tsv", "--out-dir", out,
                "--out", "probe.spm"]) == 0
    assert run(["score", "--model", out / "probe.spm",
                "--store", workdir / "feats.spb", "--out-dir", out,
                "--out", "scores.tsv"]) == 0
    assert run(["eer", "--scores", out / "scores.tsv",
                "--manifest", workdir / "dev.tsv", "--out-dir", out]) == 1  # dev only covers dev trials
    # restrict scores to dev trials via a dev-only store
    store = read_store(workdir / "feats.spb")
    dev_store = EmbeddingStore([r for r in store if r.trial_id.startswith("dv")])
    write_store(dev_store, workdir / "dev.spb")
    assert run(["score", "--model", out / "probe.spm", "--store", workdir / "dev.spb",
                "--out-dir", out, "--out", "dev_scores.tsv"]) == 0
    assert run(["eer", "--scores", out / "dev_scores.tsv",
                "--manifest", workdir / "dev.tsv", "--out-dir", out]) == 0
    assert "EER:" in capsys.readouterr().out


def test_benchmark_orders_by_decreasing_eer(workdir, rng, capsys):
    train = read_manifest(workdir / "train.tsv")
    dev = read_manifest(workdir / "dev.tsv")
    everything = train + dev
    for name, gap in (("sep", 5.0), ("noise", 0.0)):
        write_store(make_synthetic_system(rng, everything, gap=gap), workdir / f"{name}.spb")
    out = workdir / "bench"
    rc = run(["benchmark", "--train-manifest", workdir / "train.tsv",
              "--dev-manifest", workdir / "dev.tsv",
              "--stores", workdir / "sep.spb", workdir / "noise.spb",
              "--systems", "sep", "noise", "--out-dir", out, "--out", "bench.tsv"])
    assert rc == 0
    rows = (out / "bench.tsv").read_text().strip().split("\n")[1:]
    parsed = [r.split("\t") for r in rows]
    assert parsed[0][0] == "noise"  # worst first
    assert float(parsed[0][1]) > float(parsed[1][1])
    assert float(parsed[1][1]) < 2.0


def test_benchmark_rerun_identical(workdir, rng):
    train = read_manifest(workdir / "train.tsv")
    dev = read_manifest(workdir / "dev.tsv")
    write_store(make_synthetic_system(rng, train + dev, gap=2.0), workdir / "sys.spb")
    args = ["benchmark", "--train-manifest", workdir / "train.tsv",
            "--dev-manifest", workdir / "dev.tsv", "--stores", workdir / "sys.spb",
            "--out-dir", workdir / "b1", "--out", "bench.tsv"]
    assert run(args) == 0
    first = (workdir / "b1" / "bench.tsv").read_bytes()
    assert run(args) == 0
    assert (workdir / "b1" / "bench.tsv").read_bytes() == first


def test_benchmark_missing_trials_fails_before_training(workdir, rng):
    train = read_manifest(workdir / "train.tsv")
    write_store(make_synthetic_system(rng, train[:5]), workdir / "partial.spb")
    rc = run(["benchmark", "--train-manifest", workdir / "train.tsv",
              "--dev-manifest", workdir / "dev.tsv",
              "--stores", workdir / "partial.spb", "--out-dir", workdir / "bx"])
    assert rc == 1
    assert not (workdir / "bx" / "benchmark.tsv").exists()


def test_pipeline_medium_preset(workdir, tmp_path):
    pool = make_pool(4000, 32000, tuple(f"A{k:02d}" for k in range(1, 9)))
    write_manifest(pool, tmp_path / "pool.tsv")
    out = tmp_path / "pipe"
    rc = run(["pipeline", "--preset", "medium-27k", "--pools", tmp_path / "pool.tsv",
              "--out-dir", out, "--out", "m27k.tsv", "--seed", 5])
    assert rc == 0
    entries = read_manifest(out / "m27k.tsv")
    assert len(entries) == 27000
    bona = sum(e.label == "bonafide" for e in entries)
    assert bona == 3000
    assert not (out / "m27k.tsv.partial").exists()


def test_pipeline_rerun_byte_identical(workdir, tmp_path):
    pool = make_pool(400, 3200, ("A01", "A02"))
    write_manifest(pool, tmp_path / "pool.tsv")
    out = tmp_path / "pipe2"
    (tmp_path / "small.recipe").write_text("ASV5.count = 900\nratio = 8\nseed = 0\n")
    args = ["pipeline", "--recipe", tmp_path / "small.recipe", "--pools", tmp_path / "pool.tsv",
            "--out-dir", out, "--out", "x.tsv", "--seed", 3]
    assert run(args) == 0
    first = (out / "x.tsv").read_bytes()
    assert run(args) == 0
    assert (out / "x.tsv").read_bytes() == first


def test_pool_subcommand(workdir, rng, tmp_path):
    store = EmbeddingStore(
        [EmbeddingRecord(f"t{i}", rng.standard_normal((4, 3))) for i in range(5)]
    )
    write_store(store, tmp_path / "frames.spb")
    out = tmp_path / "pool_run"
    assert run(["pool", "--store", tmp_path / "frames.spb", "--out-dir", out,
                "--out", "pooled.spb"]) == 0
    pooled = read_store(out / "pooled.spb")
    assert all(r.frames == 1 for r in pooled)


def test_fuse_train_apply_ablate(workdir, rng, tmp_path):
    from spoofbench.metrics import ScoreSet, write_scores
    from spoofbench.probe import sigmoid

    manifest = make_pool(50, 150)
    write_manifest(manifest, tmp_path / "m.tsv")
    ids = [e.trial_id for e in manifest]
    y = np.array([1.0 if e.label == "bonafide" else 0.0 for e in manifest])
    for name, q in (("good", 5.0), ("meh", 1.0)):
        scores = sigmoid(q * (2 * y - 1) + rng.standard_normal(y.size))
        write_scores(ScoreSet(ids, scores), tmp_path / f"{name}.tsv")

    out = tmp_path / "fuse"
    assert run(["fuse", "train", "--scores", tmp_path / "good.tsv", tmp_path / "meh.tsv",
                "--manifest", tmp_path / "m.tsv", "--systems", "good", "meh",
                "--out-dir", out, "--out", "fusion.txt"]) == 0
    assert run(["fuse", "apply", "--model", out / "fusion.txt",
                "--scores", tmp_path / "good.tsv", tmp_path / "meh.tsv",
                "--out-dir", out, "--out", "fused.tsv"]) == 0
    fused = read_scores(out / "fused.tsv")
    assert len(fused) == len(manifest)
    assert run(["fuse", "ablate",
                "--train-scores", tmp_path / "good.tsv", tmp_path / "meh.tsv",
                "--eval-scores", tmp_path / "good.tsv", tmp_path / "meh.tsv",
                "--train-manifest", tmp_path / "m.tsv", "--eval-manifest", tmp_path / "m.tsv",
                "--systems", "good", "meh", "--out-dir", out, "--out", "grid.tsv"]) == 0
    grid = (out / "grid.tsv").read_text().strip().split("\n")
    assert grid[0] == "systems\teer_percent"
    assert len(grid) == 1 + 3  # solo best, pair, all (pair == all for 2 systems)


def test_tsne_subcommand_writes_coords_and_plot(workdir, rng, tmp_path):
    manifest = make_pool(10, 10)
    write_manifest(manifest, tmp_path / "m.tsv")
    records = []
    for e in manifest:
        center = 0.0 if e.label == "bonafide" else 6.0
        records.append(EmbeddingRecord(e.trial_id, rng.normal(center, 0.5, (1, 4))))
    write_store(EmbeddingStore(records), tmp_path / "emb.spb")
    out = tmp_path / "proj"
    rc = run(["tsne", "--store", tmp_path / "emb.spb", "--manifest", tmp_path / "m.tsv",
              "--perplexity", 5, "--iterations", 200, "--out-dir", out,
              "--out", "coords.tsv", "--plot", out / "plot.svg"])
    assert rc == 0
    coords = (out / "coords.tsv").read_text().strip().split("\n")
    assert len(coords) == 20
    svg = (out / "plot.svg").read_text()
    assert "bonafide" in svg and "spoof" in svg


def test_augment_subcommand(workdir, rng, tmp_path):
    from spoofbench.augment import AudioBuffer, write_wav

    audio_root = tmp_path / "audio"
    audio_root.mkdir()
    manifest = make_pool(4, 4)
    for e in manifest:
        t = np.arange(800) / 16000.0
        write_wav(AudioBuffer(0.4 * np.sin(2 * np.pi * 300 * t), 16000),
                  audio_root / f"{e.trial_id}.wav")
    manifest = [
        type(e)(e.trial_id, f"{e.trial_id}.wav", e.label, e.attack_id, e.source)
        for e in manifest
    ]
    write_manifest(manifest, tmp_path / "m.tsv")
    out = tmp_path / "aug"
    rc = run(["augment", "--manifest", tmp_path / "m.tsv", "--audio-root", audio_root,
              "--bonafide-fraction", 1.0, "--out-dir", out, "--out", "augmented.tsv",
              "--seed", 2])
    assert rc == 0
    updated = read_manifest(out / "augmented.tsv")
    tagged = [e for e in updated if e.augmentation != "none"]
    assert len(tagged) == 4
    for e in tagged:
        assert e.audio_path.endswith(f".{e.augmentation}.wav")
        assert (audio_root / e.audio_path).exists()
