"""Training/evaluation loops for the four variants, plus the transfer path."""

import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from ..augment import AugmentPolicy, apply as apply_augment, sample_spec
from ..backend import NAME as BACKEND_NAME
from ..dataset import (
    SOURCE_CLASSES,
    SynthConfig,
    class_weights,
    load_clip,
    normalize,
    split_manifest,
    synth_generate,
)
from ..model import build_variant, load_checkpoint, save_checkpoint
from ..tensor import AdamState, adam_step, cross_entropy
from .metrics import MetricsReport, compute_metrics

NORMALIZED_CACHE_BYTES = 3 << 30


def _limit_blas_threads():
    """Single-thread BLAS while the OpenMP kernels are hot; no-op otherwise."""
    if BACKEND_NAME != "ext":
        import contextlib

        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=1, user_api="blas")


@dataclass
class TrainConfig:
    variant: str = "I"
    epochs: int = 60
    batch_size: int = 4
    lr: float = 1e-3
    seed: int = 0
    freeze: tuple = ()
    class_weighting: bool = False
    checkpoint_in: str = ""
    checkpoint_out: str = ""
    augment_policy: AugmentPolicy = dc_field(default_factory=AugmentPolicy)

    def validate(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        return self

    @property
    def augment(self):
        # forced by variant: III/IV train augmented, I/II never do
        return self.variant in ("III", "IV")


class ClipStore:
    """Raw and normalized clip caches keyed by manifest record."""

    def __init__(self, manifest):
        self.manifest = manifest
        self.raw = {}
        self.norm = {}
        self.norm_bytes = 0

    def raw_clip(self, rec):
        clip = self.raw.get(rec.path)
        if clip is None:
            clip = load_clip(self.manifest.resolve(rec))
            self.raw[rec.path] = clip
        return clip

    def tensor(self, rec):
        t = self.norm.get(rec.path)
        if t is None:
            t = normalize(self.raw_clip(rec))
            if self.norm_bytes + t.nbytes <= NORMALIZED_CACHE_BYTES:
                self.norm[rec.path] = t
                self.norm_bytes += t.nbytes
        return t


def _model_from_config(config, manifest, input_shape):
    if config.checkpoint_in:
        model, _loaded = load_checkpoint(
            config.checkpoint_in,
            freeze=set(config.freeze),
            classes=manifest.classes,
            variant=config.variant,
            seed=config.seed,
        )
        if model.class_names != manifest.classes:
            raise ValueError(
                f"checkpoint classes {model.class_names} != manifest classes {manifest.classes}"
            )
        return model
    model = build_variant(config.variant, manifest.classes, input_shape, seed=config.seed)
    model.frozen = set(config.freeze)
    return model


def train(config, manifest, log=None):
    """Train one variant; returns (model, history).

    Deterministic for a fixed (config, manifest): data order per epoch is a
    seeded permutation, augmentation seeds derive from
    (run seed, epoch, manifest clip index), and validation is never augmented.
    """
    config.validate()
    train_recs = manifest.by_split("train")
    val_recs = manifest.by_split("val")
    if not train_recs or not val_recs:
        raise ValueError("manifest needs non-empty train and val splits")

    store = ClipStore(manifest)
    first = store.raw_clip(train_recs[0])
    input_shape = (first.channels, first.frame_count, first.height, first.width)
    model = _model_from_config(config, manifest, input_shape)

    weights = np.ones(len(manifest.classes))
    if config.class_weighting:
        weights = class_weights(manifest, "train")

    frozen = model.frozen_param_names()
    adam = AdamState.for_params(model.params, lr=config.lr)
    rec_index = {r.path: i for i, r in enumerate(manifest.records)}
    eye = np.eye(len(manifest.classes))

    # with a frozen trunk and no augmentation the trunk features are fixed,
    # so compute them once per clip
    cache_feats = model.trunk_frozen() and not config.augment
    feat_cache = {}

    history = []
    with _limit_blas_threads():
        for epoch in range(config.epochs):
            perm_rng = np.random.default_rng(
                np.random.SeedSequence([config.seed, 0xE10C, epoch])
            )
            order = perm_rng.permutation(len(train_recs))
            losses, hits = [], 0
            for start in range(0, len(order), config.batch_size):
                batch = order[start : start + config.batch_size]
                grad_sum = {}
                for j in batch:
                    rec = train_recs[j]
                    label = manifest.label_index(rec.label)
                    if config.augment:
                        spec = sample_spec(
                            config.augment_policy,
                            (config.seed, epoch, rec_index[rec.path]),
                            height=first.height,
                            width=first.width,
                        )
                        clip = apply_augment(spec, store.raw_clip(rec))
                        tensor = normalize(clip)
                    else:
                        tensor = store.tensor(rec)
                    if cache_feats:
                        feats = feat_cache.get(rec.path)
                        if feats is None:
                            feats = model.trunk_forward(tensor)[0]
                            feat_cache[rec.path] = feats
                        probs, cache = model.head_forward(feats, want_cache=True)
                        grads, _ = model.head_backward(cache, eye[label], weights[label])
                    else:
                        probs, cache = model.forward(tensor, want_cache=True)
                        grads = model.backward(cache, eye[label], weights[label])
                    losses.append(weights[label] * cross_entropy(probs, eye[label]))
                    hits += int(np.argmax(probs) == label)
                    for name, g in grads.items():
                        if name in grad_sum:
                            grad_sum[name] += g
                        else:
                            grad_sum[name] = g.copy()
                inv = 1.0 / len(batch)
                for g in grad_sum.values():
                    g *= inv
                adam_step(model.params, grad_sum, adam, frozen=frozen)
            val_hits = 0
            for rec in val_recs:
                tensor = store.tensor(rec)
                if cache_feats:
                    feats = feat_cache.get(rec.path)
                    if feats is None:
                        feats = model.trunk_forward(tensor)[0]
                        feat_cache[rec.path] = feats
                    probs = model.head_forward(feats)
                else:
                    probs = model.forward(tensor)
                val_hits += int(np.argmax(probs) == manifest.label_index(rec.label))
            entry = {
                "epoch": epoch,
                "train_loss": float(np.mean(losses)),
                "train_acc": hits / len(train_recs),
                "val_acc": val_hits / len(val_recs),
            }
            history.append(entry)
            if log:
                log(entry)

    if config.checkpoint_out:
        save_checkpoint(model, config.checkpoint_out)
    return model, history


def evaluate(model, manifest, split="test", store=None):
    """MetricsReport over one split; never augments."""
    recs = manifest.by_split(split)
    if not recs:
        raise ValueError(f"split {split!r} is empty")
    store = store or ClipStore(manifest)
    truth, pred = [], []
    with _limit_blas_threads():
        for rec in recs:
            probs = model.forward(store.tensor(rec))
            truth.append(manifest.label_index(rec.label))
            pred.append(int(np.argmax(probs)))
    return compute_metrics(truth, pred, manifest.classes)


def evaluation_pairs(model, manifest, split="test", store=None):
    """(truth, pred) integer lists, for metric cross-checks."""
    recs = manifest.by_split(split)
    store = store or ClipStore(manifest)
    truth, pred = [], []
    with _limit_blas_threads():
        for rec in recs:
            probs = model.forward(store.tensor(rec))
            truth.append(manifest.label_index(rec.label))
            pred.append(int(np.argmax(probs)))
    return truth, pred


def cross_validate(config, manifest, k=5):
    """Stratified k-fold over train+val; test split stays held out."""
    if k < 2:
        raise ValueError("k must be >= 2")
    pool = [r for r in manifest.records if r.split in ("train", "val")]
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xF01D]))
    folds = [[] for _ in range(k)]
    for label in manifest.classes:
        members = [r for r in pool if r.label == label]
        order = rng.permutation(len(members))
        for slot, j in enumerate(order):
            folds[slot % k].append(members[j])
    saved = {id(r): r.split for r in pool}
    reports = []
    try:
        for fold in folds:
            fold_ids = {id(r) for r in fold}
            for r in pool:
                r.split = "val" if id(r) in fold_ids else "train"
            model, hist = train(config, manifest)
            report = evaluate(model, manifest, "val")
            report.history = hist
            reports.append(report)
    finally:
        for r in pool:
            r.split = saved[id(r)]
    accs = [r.accuracy for r in reports]
    return {
        "folds": reports,
        "mean_accuracy": float(np.mean(accs)),
        "std_accuracy": float(np.std(accs)),
    }


def pretrain_source(out_path, workdir, seed=0, clips_per_class=30, epochs=10,
                    lr=1e-3, batch_size=4, log=None):
    """Train the trunk on the source task and save a trunk-only checkpoint.

    The source corpus uses different appearance parameters and five different
    motion classes; the saved transfer set excludes all head parameters.
    """
    workdir = Path(workdir)
    cfg = SynthConfig(
        seed=seed,
        clips_per_class=clips_per_class,
        classes=SOURCE_CLASSES,
        unsafe=(),
        appearance="source",
    )
    manifest = synth_generate(cfg, workdir / "source_corpus")
    split_manifest(manifest, seed=seed)
    tc = TrainConfig(
        variant="I", epochs=epochs, batch_size=batch_size, lr=lr, seed=seed
    )
    model, history = train(tc, manifest, log=log)
    save_checkpoint(model, out_path, param_filter=lambda n: n.startswith("backbone."))
    return Path(out_path), history
