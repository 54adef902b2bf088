"""Command-line entry point: ``codial <subcommand> ...``.

Exit status is 0 on success, 1 on runtime failure and 2 on bad usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .ablation import PAIR_GRID, Ablation, desk_config, fit_to_encoder, format_table
from .config import TrainConfig, load_config
from .data import SyntheticShapesSpec, gen_synthetic, load_dataset
from .evaluation import ProbeConfig, extract_features, final_features, knn_retrieve, cosine_similarities, linear_probe
from .losses import gaussian_mi
from .oracle import train_js_estimator
from .training import load_checkpoint, pretrain

log = logging.getLogger("codial")


def _split(data_dir) -> tuple:
    d = Path(data_dir)
    return load_dataset(d / "train.cdld"), load_dataset(d / "test.cdld")


def cmd_gen_data(args) -> int:
    spec = SyntheticShapesSpec(image_size=args.image_size, per_class=args.per_class, seed=args.seed,
                               position_jitter=args.position_jitter, color_jitter=args.color_jitter,
                               noise=args.noise, test_fraction=args.test_fraction)
    paths = gen_synthetic(spec, args.out)
    for split, p in paths.items():
        print(f"{split}: {p}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = load_config(args.config) if args.config else desk_config()
    overrides = {k: v for k, v in (("dataset", args.dataset), ("out_dir", args.out), ("epochs", args.epochs),
                                   ("seed", args.seed)) if v is not None}
    cfg = replace(cfg, **overrides).validate()
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    if not cfg.dataset:
        raise ValueError("no dataset given (set 'dataset' in the config or pass --dataset)")
    resume = load_checkpoint(args.resume) if args.resume else None
    if resume is not None:
        resume.config = cfg
    state = pretrain(cfg, resume=resume)
    print(f"trained {state.epoch} epochs; checkpoint at {Path(cfg.out_dir) / 'checkpoint.cdl'}")
    return 0


def cmd_probe(args) -> int:
    state = load_checkpoint(args.checkpoint)
    (xtr, ytr), (xte, yte) = _split(args.data)
    enc = state.model.encoder
    size = enc.cfg.input_size
    cfg = ProbeConfig(stage=args.stage, pooled_dim=args.pooled_dim, epochs=args.epochs, l2=args.l2, seed=args.seed)
    ftr = extract_features(enc, fit_to_encoder(xtr, size), cfg.stage, cfg.pooled_dim)
    fte = extract_features(enc, fit_to_encoder(xte, size), cfg.stage, cfg.pooled_dim)
    report = linear_probe(ftr, ytr, fte, yte, cfg).to_dict()
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    return 0


def cmd_retrieve(args) -> int:
    state = load_checkpoint(args.checkpoint)
    images, labels = load_dataset(args.dataset)
    if not 0 <= args.query < len(images):
        raise IndexError(f"query index {args.query} outside [0, {len(images)})")
    feats = final_features(state.model.encoder, fit_to_encoder(images, state.model.encoder.cfg.input_size))
    gallery = np.delete(feats, args.query, axis=0)
    ids = np.delete(np.arange(len(feats)), args.query)
    hits = knn_retrieve(feats[args.query], gallery, args.k)
    sims = cosine_similarities(feats[args.query], gallery)
    print(f"query {args.query} (label {labels[args.query]})")
    for rank, h in enumerate(hits, 1):
        print(f"{rank:3d}  index {ids[h]:5d}  label {labels[ids[h]]}  cos {sims[h]:.4f}")
    return 0


def cmd_ablate(args) -> int:
    base = load_config(args.config) if args.config else desk_config(epochs=args.epochs)
    if args.max_images:
        base = replace(base, max_images=args.max_images)
    print(json.dumps(base.to_dict(), indent=2, sort_keys=True))
    train, test = _split(args.data)
    ab = Ablation(base, train, test, ProbeConfig(stage=args.stage, epochs=args.probe_epochs), out_dir=args.out)
    lam = ab.lambda_sweep(args.seeds)
    pairs = ab.pair_sweep(args.seeds, args.ks)
    print(format_table(lam, pairs))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.json").write_text(json.dumps({"lambda": lam, "pairs": {str(k): v for k, v in pairs.items()},
                                                   "runs": [r.to_dict() for r in ab.rows()]}, indent=2) + "\n")
    return 0


def cmd_mi_oracle(args) -> int:
    print(f"{'rho':>6} {'seed':>4} {'analytic':>9} {'estimate':>9} {'js_bound':>9}")
    for rho in args.rho:
        for seed in args.seeds:
            r = train_js_estimator(rho, seed=seed, steps=args.steps)
            print(f"{rho:6.3f} {seed:4d} {gaussian_mi(rho):9.4f} {r.estimate:9.4f} {r.js_bound:9.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="codial", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write the synthetic-shapes train/test files")
    d = SyntheticShapesSpec()
    g.add_argument("--out", required=True)
    g.add_argument("--image-size", type=int, default=d.image_size)
    g.add_argument("--per-class", type=int, default=d.per_class)
    g.add_argument("--seed", type=int, default=d.seed)
    g.add_argument("--position-jitter", type=float, default=d.position_jitter)
    g.add_argument("--color-jitter", type=float, default=d.color_jitter)
    g.add_argument("--noise", type=float, default=d.noise)
    g.add_argument("--test-fraction", type=float, default=d.test_fraction)
    g.set_defaults(fn=cmd_gen_data)

    t = sub.add_parser("pretrain", help="pretrain from a JSON config (default: the 32px preset)")
    t.add_argument("--config")
    t.add_argument("--dataset")
    t.add_argument("--out")
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--resume", help="checkpoint to continue from")
    t.set_defaults(fn=cmd_pretrain)

    pr = sub.add_parser("probe", help="linear probe on frozen stage features")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--data", required=True, help="directory holding train.cdld and test.cdld")
    pr.add_argument("--stage", type=int, default=-1)
    pr.add_argument("--pooled-dim", type=int, default=1024)
    pr.add_argument("--epochs", type=int, default=500)
    pr.add_argument("--l2", type=float, default=1e-3)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", help="write the JSON report here")
    pr.set_defaults(fn=cmd_probe)

    r = sub.add_parser("retrieve", help="cosine nearest neighbours of one image")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--dataset", required=True)
    r.add_argument("--query", type=int, required=True)
    r.add_argument("--k", type=int, default=5)
    r.set_defaults(fn=cmd_retrieve)

    a = sub.add_parser("ablate", help="loss-weight and pair-count sweeps")
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--config")
    a.add_argument("--epochs", type=int, default=30)
    a.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    a.add_argument("--ks", type=int, nargs="+", default=list(PAIR_GRID))
    a.add_argument("--stage", type=int, default=1)
    a.add_argument("--probe-epochs", type=int, default=500)
    a.add_argument("--max-images", type=int, default=0)
    a.set_defaults(fn=cmd_ablate)

    m = sub.add_parser("mi-oracle", help="JS estimator on correlated Gaussians vs the analytic MI")
    m.add_argument("--rho", type=float, nargs="+", required=True)
    m.add_argument("--seeds", type=int, nargs="+", default=[0])
    m.add_argument("--steps", type=int, default=1500)
    m.set_defaults(fn=cmd_mi_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except (OSError, ValueError, IndexError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
