"""Command-line entry point.

Subcommands: ``manifest sample|mix``, ``augment``, ``pool``, ``train``,
``score``, ``eer``, ``fuse train|apply|ablate``, ``tsne``, ``benchmark``,
``pipeline``.

Every subcommand writes its fully resolved configuration and a hash
manifest of all artifacts it produced into the output directory, exits
nonzero on any error, and derives all stage randomness from the single
``--seed`` flag via sha256(seed, stage name).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import augment as aug
from . import embedding as emb
from . import fusion as fus
from . import manifest as man
from . import metrics as met
from . import probe as prb
from . import projection as prj

log = logging.getLogger("spoofbench")

THREADS_ENV = "SPOOFBENCH_THREADS"


def derive_seed(seed: int, stage: str) -> int:
    """Per-stage sub-seed: low 8 bytes of sha256(b"<seed>/<stage>")."""
    digest = hashlib.sha256(f"{seed}/{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects resolved config and written artifacts for one invocation."""

    def __init__(self, out_dir: Path, command: str, args: argparse.Namespace):
        self.out_dir = out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(args).items()
            if k != "func"
        }
        self.artifacts: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.artifacts.append(p)
        return p

    def add(self, path) -> Path:
        self.artifacts.append(Path(path))
        return Path(path)

    def finish(self) -> None:
        config_path = self.out_dir / "run_config.json"
        with open(config_path, "w", encoding="utf-8") as fh:
            json.dump({"command": self.command, **self.config}, fh, indent=2, sort_keys=True)
        listing = {str(p): _sha256(p) for p in self.artifacts if p.exists()}
        with open(self.out_dir / "artifacts.json", "w", encoding="utf-8") as fh:
            json.dump(listing, fh, indent=2, sort_keys=True)


def _load_pools(pool_paths: list[str]) -> dict[str, list[man.ManifestEntry]]:
    pools: dict[str, list[man.ManifestEntry]] = {}
    for p in pool_paths:
        for e in man.read_manifest(p):
            pools.setdefault(e.source, []).append(e)
    return pools


def _resolve_recipe(args) -> man.MixRecipe:
    if args.preset:
        base = man.PRESETS[args.preset]
        return man.MixRecipe(base.counts, base.ratio, args.seed)
    with open(args.recipe, "r", encoding="utf-8") as fh:
        return man.parse_recipe(fh.read())


# ---------------------------------------------------------------- manifest

def cmd_manifest_sample(args, run: Run) -> None:
    entries = man.read_manifest(args.manifest)
    sampled = man.stratified_sample(
        entries, args.total, args.ratio, derive_seed(args.seed, "sample")
    )
    man.write_manifest(sampled, run.path(args.out))


def cmd_manifest_mix(args, run: Run) -> None:
    recipe = _resolve_recipe(args)
    recipe = man.MixRecipe(recipe.counts, recipe.ratio, derive_seed(args.seed, "mix"))
    pools = _load_pools(args.pools)
    mixed = man.mix(recipe, pools)
    man.write_manifest(mixed, run.path(args.out))


# ----------------------------------------------------------------- augment

def cmd_augment(args, run: Run) -> None:
    entries = man.read_manifest(args.manifest)
    policy = aug.AugmentPolicy(
        snr_db=args.snr_db,
        bonafide_fraction=args.bonafide_fraction,
        ir_path=args.ir,
        seed=derive_seed(args.seed, "policy"),
    )
    tagged = aug.apply_policy(entries, policy)
    if args.ir:
        ir = aug.read_wav(args.ir)
    else:
        ir = None

    audio_root = Path(args.audio_root)
    out_entries = []
    for e in tagged:
        if e.augmentation == "none":
            out_entries.append(e)
            continue
        src = audio_root / e.audio_path
        audio = aug.read_wav(src)
        if e.augmentation == "noise":
            processed = aug.add_white_noise(
                audio, policy.snr_db, derive_seed(args.seed, f"noise/{e.trial_id}")
            )
        else:
            kernel = ir if ir is not None else aug.synthetic_impulse_response(audio.sample_rate)
            processed = aug.reverberate(audio, kernel)
        out_path = src.with_suffix(f".{e.augmentation}.wav")
        aug.write_wav(processed, out_path)
        run.add(out_path)
        rel = str(Path(e.audio_path).with_suffix(f".{e.augmentation}.wav"))
        out_entries.append(
            man.ManifestEntry(e.trial_id, rel, e.label, e.attack_id, e.source, e.augmentation)
        )
    man.write_manifest(out_entries, run.path(args.out))


# --------------------------------------------------------------- embeddings

def cmd_pool(args, run: Run) -> None:
    store = emb.read_store(args.store)
    emb.write_store(emb.pool_store(store), run.path(args.out))


# ------------------------------------------------------------------- probe

def _train_config(args) -> prb.TrainConfig:
    from dataclasses import replace

    cfg = prb.PRESETS[args.preset]
    overrides = {}
    if args.learning_rate is not None:
        overrides["learning_rate"] = args.learning_rate
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.inv_reg_c is not None:
        overrides["inv_reg_c"] = args.inv_reg_c
    overrides["seed"] = derive_seed(args.seed, "train")
    return replace(cfg, **overrides)


def cmd_train(args, run: Run) -> None:
    store = emb.read_store(args.store)
    manifest = man.read_manifest(args.manifest)
    model = prb.train_probe(store, manifest, _train_config(args), standardize=args.standardize)
    prb.write_model(model, run.path(args.out))


def cmd_score(args, run: Run) -> None:
    model = prb.read_model(args.model)
    store = emb.read_store(args.store)
    scores = prb.score(model, store)
    met.write_scores(scores, run.path(args.out))


def cmd_eer(args, run: Run) -> None:
    manifest = man.read_manifest(args.manifest)
    scores = met.read_scores(args.scores, manifest)
    value = met.eer(scores)
    print(f"EER: {100.0 * value:.2f}%")


# ------------------------------------------------------------------ fusion

def _read_score_sets(paths: list[str], manifest) -> list[met.ScoreSet]:
    return [met.read_scores(p, manifest) for p in paths]


def cmd_fuse_train(args, run: Run) -> None:
    manifest = man.read_manifest(args.manifest)
    sets = _read_score_sets(args.scores, manifest)
    matrix, labels, _ = fus.align(sets)
    system_ids = args.systems or [Path(p).stem for p in args.scores]
    cfg = prb.PRESETS["probe"]
    model = fus.train_fusion(matrix, labels, cfg, system_ids=system_ids,
                             logit_space=args.logit_space)
    fus.write_fusion_model(model, run.path(args.out))


def cmd_fuse_apply(args, run: Run) -> None:
    model = fus.read_fusion_model(args.model)
    sets = _read_score_sets(args.scores, None)
    fused = fus.apply_fusion(model, sets)
    met.write_scores(fused, run.path(args.out))


def cmd_fuse_ablate(args, run: Run) -> None:
    train_manifest = man.read_manifest(args.train_manifest)
    eval_manifest = man.read_manifest(args.eval_manifest)
    train_sets = _read_score_sets(args.train_scores, train_manifest)
    eval_sets = _read_score_sets(args.eval_scores, eval_manifest)
    system_ids = args.systems or [Path(p).stem for p in args.train_scores]
    rows = fus.ablation_grid(system_ids, train_sets, eval_sets,
                             all_subsets=args.all_subsets)
    with open(run.path(args.out), "w", encoding="utf-8", newline="") as fh:
        fh.write(fus.format_grid(rows, tsv=True))
    print(fus.format_grid(rows), end="")


# ------------------------------------------------------------------- t-SNE

def cmd_tsne(args, run: Run) -> None:
    store = emb.read_store(args.store)
    manifest = man.read_manifest(args.manifest)
    wanted = {e.trial_id for e in manifest}
    records = [r for r in store if r.trial_id in wanted]
    if args.sample and args.sample < len(records):
        rng = np.random.default_rng(derive_seed(args.seed, "tsne-sample"))
        idx = rng.choice(len(records), size=args.sample, replace=False)
        records = [records[i] for i in sorted(idx)]
    sub = emb.EmbeddingStore(records)
    ids = [r.trial_id for r in sub]
    config = prj.TsneConfig(
        perplexity=args.perplexity,
        iterations=args.iterations,
        learning_rate=args.learning_rate,
        seed=derive_seed(args.seed, "tsne"),
    )
    coords = prj.tsne(sub, config)
    prj.write_coordinates(ids, coords, run.path(args.out))
    if args.plot:
        entry_of = {e.trial_id: e for e in manifest}
        split_of = None
        if args.split_manifest:
            dev_ids = {e.trial_id for e in man.read_manifest(args.split_manifest)}
            split_of = {t: ("dev" if t in dev_ids else "train") for t in ids}
        groups = prj.plot_groups([entry_of[t] for t in ids], split_of)
        prj.render_plot(coords, groups, run.add(args.plot))


# --------------------------------------------------------------- benchmark

def cmd_benchmark(args, run: Run) -> None:
    train_manifest = man.read_manifest(args.train_manifest)
    dev_manifest = man.read_manifest(args.dev_manifest)
    system_ids = args.systems or [Path(p).stem for p in args.stores]
    if len(system_ids) != len(args.stores):
        raise ValueError("--systems must match the number of stores")

    # validate everything up front: no training starts on broken inputs
    stores = []
    for path in args.stores:
        store = emb.read_store(path)
        index = store.by_id()
        for e in train_manifest + dev_manifest:
            if e.trial_id not in index:
                raise ValueError(f"store {path}: missing trial {e.trial_id!r}")
        stores.append(store)

    results = []
    cfg = prb.PRESETS["probe"]
    for sid, store in zip(system_ids, stores):
        model = prb.train_probe(store, train_manifest, cfg)
        dev_store = emb.EmbeddingStore([store.by_id()[e.trial_id] for e in dev_manifest])
        scores = prb.score(model, dev_store, dev_manifest)
        results.append((sid, met.eer(scores)))

    results.sort(key=lambda r: -r[1])  # decreasing EER, worst first
    lines = ["system\teer_percent"]
    width = max(len(sid) for sid, _ in results)
    print(f"{'system':<{width}}  EER[%]")
    for sid, value in results:
        lines.append(f"{sid}\t{100 * value:.2f}")
        print(f"{sid:<{width}}  {100 * value:6.2f}")
    with open(run.path(args.out), "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------- pipeline

def cmd_pipeline(args, run: Run) -> None:
    marker = run.out_dir / f"{args.out}.partial"
    marker.touch()
    try:
        recipe = _resolve_recipe(args)
        pools = _load_pools(args.pools)
        if recipe.ratio is not None and len(recipe.counts) == 1:
            (source,) = recipe.counts
            stage = "pipeline/sample"
            mixed = man.stratified_sample(
                pools.get(source, []), recipe.counts[source], recipe.ratio,
                derive_seed(args.seed, stage),
            )
        else:
            mixed = man.mix(
                man.MixRecipe(recipe.counts, recipe.ratio, derive_seed(args.seed, "pipeline/mix")),
                pools,
            )
        policy = aug.AugmentPolicy(
            snr_db=args.snr_db,
            bonafide_fraction=args.bonafide_fraction,
            seed=derive_seed(args.seed, "pipeline/policy"),
        )
        tagged = aug.apply_policy(mixed, policy) if args.augment else mixed
        man.write_manifest(tagged, run.path(args.out))
    except Exception:
        raise
    else:
        marker.unlink()


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spoofbench")
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get(THREADS_ENV, "0")) or None,
                        help=f"worker threads (default: ${THREADS_ENV} or all)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="out"):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", type=Path, default=Path("runs"))
        p.add_argument("--out", default=out_default)

    p = sub.add_parser("manifest", help="sample or mix dataset manifests")
    msub = p.add_subparsers(dest="subcommand", required=True)

    ps = msub.add_parser("sample", help="stratified class/attack sampling")
    ps.add_argument("--manifest", required=True)
    ps.add_argument("--total", type=int, required=True)
    ps.add_argument("--ratio", type=float, default=8.0)
    common(ps, "sampled.tsv")
    ps.set_defaults(func=cmd_manifest_sample)

    pm = msub.add_parser("mix", help="mix per-source counts from pools")
    pm.add_argument("--recipe")
    pm.add_argument("--preset", choices=sorted(man.PRESETS))
    pm.add_argument("--pools", nargs="+", required=True)
    common(pm, "mixed.tsv")
    pm.set_defaults(func=cmd_manifest_mix)

    pa = sub.add_parser("augment", help="apply noise/reverb policy and write WAVs")
    pa.add_argument("--manifest", required=True)
    pa.add_argument("--audio-root", default=".")
    pa.add_argument("--snr-db", type=float, default=25.0)
    pa.add_argument("--bonafide-fraction", type=float, default=0.5)
    pa.add_argument("--ir", help="impulse response WAV (default: bundled synthetic)")
    common(pa, "augmented.tsv")
    pa.set_defaults(func=cmd_augment)

    pp = sub.add_parser("pool", help="average-pool a framewise store")
    pp.add_argument("--store", required=True)
    common(pp, "pooled.spb")
    pp.set_defaults(func=cmd_pool)

    pt = sub.add_parser("train", help="train the logistic-regression probe")
    pt.add_argument("--store", required=True)
    pt.add_argument("--manifest", required=True)
    pt.add_argument("--preset", choices=sorted(prb.PRESETS), default="probe")
    pt.add_argument("--learning-rate", type=float)
    pt.add_argument("--epochs", type=int)
    pt.add_argument("--batch-size", type=int)
    pt.add_argument("--inv-reg-c", type=float)
    pt.add_argument("--standardize", action="store_true")
    common(pt, "probe.spm")
    pt.set_defaults(func=cmd_train)

    psc = sub.add_parser("score", help="score a store with a trained probe")
    psc.add_argument("--model", required=True)
    psc.add_argument("--store", required=True)
    common(psc, "scores.tsv")
    psc.set_defaults(func=cmd_score)

    pe = sub.add_parser("eer", help="equal error rate of a score file")
    pe.add_argument("--scores", required=True)
    pe.add_argument("--manifest", required=True)
    common(pe)
    pe.set_defaults(func=cmd_eer)

    pf = sub.add_parser("fuse", help="late fusion over system scores")
    fsub = pf.add_subparsers(dest="subcommand", required=True)

    pft = fsub.add_parser("train")
    pft.add_argument("--scores", nargs="+", required=True)
    pft.add_argument("--manifest", required=True)
    pft.add_argument("--systems", nargs="+")
    pft.add_argument("--logit-space", action="store_true")
    common(pft, "fusion.txt")
    pft.set_defaults(func=cmd_fuse_train)

    pfa = fsub.add_parser("apply")
    pfa.add_argument("--model", required=True)
    pfa.add_argument("--scores", nargs="+", required=True)
    common(pfa, "fused_scores.tsv")
    pfa.set_defaults(func=cmd_fuse_apply)

    pfb = fsub.add_parser("ablate")
    pfb.add_argument("--train-scores", nargs="+", required=True)
    pfb.add_argument("--eval-scores", nargs="+", required=True)
    pfb.add_argument("--train-manifest", required=True)
    pfb.add_argument("--eval-manifest", required=True)
    pfb.add_argument("--systems", nargs="+")
    pfb.add_argument("--all-subsets", action="store_true")
    common(pfb, "ablation.tsv")
    pfb.set_defaults(func=cmd_fuse_ablate)

    px = sub.add_parser("tsne", help="2-D diagnostic projection")
    px.add_argument("--store", required=True)
    px.add_argument("--manifest", required=True)
    px.add_argument("--split-manifest", help="dev manifest for split coloring")
    px.add_argument("--sample", type=int)
    px.add_argument("--perplexity", type=float, default=30.0)
    px.add_argument("--iterations", type=int, default=1000)
    px.add_argument("--learning-rate", type=float, default=200.0)
    px.add_argument("--plot", help="SVG output path")
    common(px, "coords.tsv")
    px.set_defaults(func=cmd_tsne)

    pb = sub.add_parser("benchmark", help="probe several stores, report EERs")
    pb.add_argument("--train-manifest", required=True)
    pb.add_argument("--dev-manifest", required=True)
    pb.add_argument("--stores", nargs="+", required=True)
    pb.add_argument("--systems", nargs="+")
    common(pb, "benchmark.tsv")
    pb.set_defaults(func=cmd_benchmark)

    pl = sub.add_parser("pipeline", help="mix + policy in one deterministic run")
    pl.add_argument("--recipe")
    pl.add_argument("--preset", choices=sorted(man.PRESETS))
    pl.add_argument("--pools", nargs="+", required=True)
    pl.add_argument("--augment", action="store_true", help="tag bonafides for augmentation")
    pl.add_argument("--snr-db", type=float, default=25.0)
    pl.add_argument("--bonafide-fraction", type=float, default=0.5)
    common(pl, "pipeline.tsv")
    pl.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(message)s")
    command = args.command + (f" {args.subcommand}" if getattr(args, "subcommand", None) else "")
    run = Run(args.out_dir, command, args)
    try:
        args.func(args, run)
        run.finish()
    except Exception as exc:
        log.error("%s failed: %s", command, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
