"""Pretraining loop, objective assembly and the checkpoint file format.

Checkpoint layout (little-endian)::

    "CDL1" | version u32 | manifest length u64 | UTF-8 JSON manifest
    | float32 blobs, contiguous, in manifest order
"""
from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numerics as nx
from .config import TrainConfig, config_from_dict
from .data import load_dataset
from .losses import beta_at, cls_loss, js_mi_lower_bound, mi_loss, mib_regularizer, total_loss
from .models import CodialModel
from .numerics import GaussianRepr, Optimizer, Tensor
from .pairing import draw_negatives, enumerate_pairs, sample_pair_subset
from .rng import stream
from .transforms import NUM_CLASSES, make_view_batch

log = logging.getLogger(__name__)

CKPT_MAGIC = b"CDL1"
CKPT_VERSION = 1
MI_KEYS = ("loss_mi", "mi_estimate", "kl_reg", "beta")


class CheckpointFormatError(ValueError):
    """Malformed checkpoint file."""


class NonFiniteLossError(RuntimeError):
    """The watchdog saw a NaN or infinite loss."""


# -- objective ----------------------------------------------------------------

def pair_indices(n_images: int, k: int, rng: np.random.Generator):
    """Row indices (anchor, positive, negative) into a (n_images*K, D) view matrix.

    Each image gets ``k`` fresh pairs and one cross-image negative per pair.
    """
    pairs = enumerate_pairs(NUM_CLASSES)
    a_idx, p_idx, n_idx = [], [], []
    for i in range(n_images):
        chosen = sample_pair_subset(pairs, k, rng)
        negs = draw_negatives(n_images, i, NUM_CLASSES, len(chosen), rng)
        for (y1, y2), (j, v) in zip(chosen, negs):
            a_idx.append(i * NUM_CLASSES + y1)
            p_idx.append(i * NUM_CLASSES + y2)
            n_idx.append(j * NUM_CLASSES + v)
    return np.array(a_idx), np.array(p_idx), np.array(n_idx)


def compute_objective(model: CodialModel, views, labels, n_images: int, cfg: TrainConfig, epoch: int,
                      rng: np.random.Generator) -> dict:
    """Forward pass of the full weighted objective on one batch of views.

    ``views`` holds K consecutive views per image. All sampling (pairs,
    negatives, reparameterization noise) comes from ``rng``.
    """
    _, feats = model.encode(views)
    logits = model.classify(feats)
    out = {"logits": logits, "loss_cls": cls_loss(logits, labels)}
    mi_term = None
    if cfg.weights.lambda_mi > 0:
        g = model.project_stochastic(feats)
        z = nx.reparam_sample(g, rng)
        a, p, n = pair_indices(n_images, cfg.pair_subset_k, rng)
        za = nx.take(z, a)
        mi = js_mi_lower_bound(model.critic, (za, nx.take(z, p)), (za, nx.take(z, n)))
        reg = mib_regularizer(
            GaussianRepr(nx.take(g.mean, a), nx.take(g.logvar, a)),
            GaussianRepr(nx.take(g.mean, p), nx.take(g.logvar, p)),
        )
        beta = beta_at(cfg.beta, epoch)
        mi_term = mi_loss(mi, reg, beta)
        out.update(mi_estimate=mi, kl_reg=reg, loss_mi=mi_term, beta=beta)
    out["loss_total"] = total_loss(out["loss_cls"], mi_term, cfg.weights)
    return out


# -- checkpoints ----------------------------------------------------------------

@dataclass
class TrainState:
    model: CodialModel
    optimizer: Optimizer
    config: TrainConfig
    epoch: int = 0
    history: list = field(default_factory=list)


def build_model(cfg: TrainConfig) -> CodialModel:
    return CodialModel(cfg.encoder, cfg.head, stream(cfg.seed, purpose="init"))


def new_state(cfg: TrainConfig) -> TrainState:
    model = build_model(cfg)
    return TrainState(model, Optimizer(model.parameters(), cfg.optimizer), cfg)


def _state_tensors(state: TrainState) -> list[tuple[str, np.ndarray]]:
    items = [(f"param/{n}", p.data) for n, p in state.model.named_parameters()]
    items += [(f"buffer/{n}", b) for n, b in state.model.named_buffers()]
    items += [(f"optim/{k}", v) for k, v in sorted(state.optimizer.state.items())]
    return items


def save_checkpoint(state: TrainState, path) -> None:
    tensors = []
    blobs = []
    offset = 0
    for name, arr in _state_tensors(state):
        buf = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(buf)
        offset += len(buf)
    # the output directory is where the run lives, not part of its state
    config = {k: v for k, v in state.config.to_dict().items() if k != "out_dir"}
    manifest = {
        "config": config,
        "epoch": state.epoch,
        "history": state.history,
        "optimizer_step": state.optimizer.t,
        "rng": {"kind": "keyed", "seed": state.config.seed, "next_epoch": state.epoch},
        "tensors": tensors,
    }
    mbytes = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(CKPT_MAGIC + struct.pack("<IQ", CKPT_VERSION, len(mbytes)))
        f.write(mbytes)
        for b in blobs:
            f.write(b)
    tmp.replace(path)


def load_checkpoint(path) -> TrainState:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise CheckpointFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != CKPT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {raw[:4]!r}")
    version, mlen = struct.unpack("<IQ", raw[4:16])
    if version != CKPT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    if 16 + mlen > len(raw):
        raise CheckpointFormatError(f"{path}: manifest truncated (need {16 + mlen} bytes, have {len(raw)})")
    try:
        manifest = json.loads(raw[16 : 16 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{path}: corrupt manifest ({e})") from e
    blob = raw[16 + mlen :]
    cfg = config_from_dict(manifest["config"])
    state = new_state(cfg)
    params = dict(state.model.named_parameters())
    buffers = dict(state.model.named_buffers())
    expected_end = 0
    for entry in manifest["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start, end = entry["offset"], entry["offset"] + 4 * count
        if end > len(blob):
            raise CheckpointFormatError(f"{path}: tensor {entry['name']} truncated (need {end}, have {len(blob)})")
        arr = np.frombuffer(blob[start:end], dtype="<f4").reshape(entry["shape"]).astype(np.float32)
        kind, name = entry["name"].split("/", 1)
        if kind == "param":
            if name not in params or params[name].shape != arr.shape:
                raise CheckpointFormatError(f"{path}: parameter {name} does not match the configured model")
            params[name].data = arr.copy()
        elif kind == "buffer":
            buffers[name][...] = arr
        elif kind == "optim":
            state.optimizer.state[name] = arr.copy()
        expected_end = max(expected_end, end)
    if expected_end != len(blob):
        raise CheckpointFormatError(f"{path}: {len(blob) - expected_end} trailing bytes after tensor data")
    state.optimizer.t = manifest["optimizer_step"]
    state.epoch = manifest["epoch"]
    state.history = manifest.get("history", [])
    return state


# -- loop -------------------------------------------------------------------------

def _epoch_batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    perm = stream(seed, epoch, 0, "shuffle").permutation(n)
    batches = [perm[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches.pop()
    return batches


def _dump_nan(out_dir: Path, epoch: int, batch: int, idx, terms: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "nan_dump.json"
    path.write_text(json.dumps({"epoch": epoch, "batch_index": batch, "image_indices": [int(i) for i in idx],
                                "terms": {k: float(v) for k, v in terms.items()}}, indent=2))
    return path


def train_epoch(state: TrainState, images: np.ndarray, out_dir: Path | None = None) -> dict:
    cfg = state.config
    epoch = state.epoch
    model, opt = state.model, state.optimizer
    model.train()
    sums: dict[str, float] = {}
    correct = total = 0
    batches = _epoch_batches(len(images), cfg.batch_size, cfg.seed, epoch)
    for b, idx in enumerate(batches):
        rngs = [stream(cfg.seed, epoch, int(i), "views") for i in idx]
        views, labels = make_view_batch(images[idx], cfg.aux, rngs)
        obj = compute_objective(model, views, labels, len(idx), cfg, epoch, stream(cfg.seed, epoch, b, "objective"))
        scalars = {k: float(v.data) if isinstance(v, Tensor) else float(v)
                   for k, v in obj.items() if k != "logits"}
        if not all(math.isfinite(v) for v in scalars.values()):
            dump = _dump_nan(out_dir or Path("."), epoch, b, idx, scalars)
            raise NonFiniteLossError(f"non-finite loss at epoch {epoch}, batch {b}; state dumped to {dump}")
        opt.zero_grad()
        nx.backward(obj["loss_total"])
        opt.step()
        for k, v in scalars.items():
            sums[k] = sums.get(k, 0.0) + v
        correct += int(np.sum(np.argmax(obj["logits"].data, axis=1) == labels))
        total += len(labels)
    nb = max(len(batches), 1)
    metrics = {"epoch": epoch}
    for key in ("loss_total", "loss_cls", *MI_KEYS):
        if key in sums:
            metrics[key] = sums[key] / nb
    metrics["pretext_acc"] = correct / max(total, 1)
    return metrics


def _metrics_line(m: dict) -> str:
    order = ("epoch", "loss_total", "loss_cls", *MI_KEYS, "pretext_acc")
    return json.dumps({k: m[k] for k in order if k in m}) + "\n"


def pretrain(cfg: TrainConfig, images: np.ndarray | None = None, resume: TrainState | None = None,
             write: bool = True, until_epoch: int | None = None) -> TrainState:
    """Run (or continue) pretraining; writes metrics.jsonl and checkpoint.cdl under ``out_dir``."""
    cfg.validate()
    if images is None:
        images, _ = load_dataset(cfg.dataset)
    if cfg.max_images:
        images = images[: cfg.max_images]
    state = resume if resume is not None else new_state(cfg)
    out_dir = Path(cfg.out_dir)
    metrics_path = out_dir / "metrics.jsonl"
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        # rewrite history so a resumed run yields the same file as an uninterrupted one
        metrics_path.write_text("".join(_metrics_line(m) for m in state.history))
    stop = cfg.epochs if until_epoch is None else min(until_epoch, cfg.epochs)
    while state.epoch < stop:
        m = train_epoch(state, images, out_dir)
        state.history.append(m)
        state.epoch += 1
        log.info("epoch %d: %s", m["epoch"], {k: round(v, 4) for k, v in m.items() if k != "epoch"})
        if write:
            with open(metrics_path, "a") as f:
                f.write(_metrics_line(m))
            if cfg.checkpoint_every and state.epoch % cfg.checkpoint_every == 0:
                save_checkpoint(state, out_dir / f"checkpoint_e{state.epoch}.cdl")
    if write:
        save_checkpoint(state, out_dir / "checkpoint.cdl")
    return state


def pretext_accuracy(model: CodialModel, images: np.ndarray, cfg: TrainConfig, seed: int = 12345,
                     batch_size: int = 32) -> float:
    """Transformation-classification accuracy on freshly generated views (eval mode)."""
    model.eval()
    correct = total = 0
    try:
        with nx.no_grad():
            for s in range(0, len(images), batch_size):
                idx = np.arange(s, min(s + batch_size, len(images)))
                views, labels = make_view_batch(images[idx], cfg.aux, [stream(seed, 0, int(i), "heldout") for i in idx])
                _, feats = model.encode(views)
                pred = np.argmax(model.classify(feats).data, axis=1)
                correct += int(np.sum(pred == labels))
                total += len(labels)
    finally:
        model.train()
    return correct / max(total, 1)
