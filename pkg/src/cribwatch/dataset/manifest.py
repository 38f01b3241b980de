"""JSON-lines dataset index.

First line is a header object {"classes": [...], "unsafe": [...]}; every
following line is one record {path, label, split, frames, fps, source}.
Record paths are relative to the manifest file's directory.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

SPLITS = ("train", "val", "test")


@dataclass
class ClipRecord:
    path: str
    label: str
    split: str
    frames: int
    fps: float
    source: str = "synthetic"


@dataclass
class Manifest:
    classes: list
    unsafe: list = field(default_factory=list)
    records: list = field(default_factory=list)
    base_dir: Path = field(default_factory=Path)

    def resolve(self, record):
        return (self.base_dir / record.path).resolve()

    def by_split(self, split):
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [r for r in self.records if r.split == split]

    def label_index(self, label):
        return self.classes.index(label)

    def validate(self):
        names = set(self.classes)
        for rec in self.records:
            if rec.label not in names:
                raise ValueError(f"label {rec.label!r} not in declared class list")
            if rec.split not in SPLITS:
                raise ValueError(f"record split {rec.split!r} invalid")
            if not self.resolve(rec).exists():
                raise FileNotFoundError(f"clip missing: {self.resolve(rec)}")
        return self


def save_manifest(manifest, path):
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(json.dumps({"classes": manifest.classes, "unsafe": manifest.unsafe}) + "\n")
        for rec in manifest.records:
            fh.write(json.dumps(asdict(rec)) + "\n")


def load_manifest(path):
    path = Path(path)
    records = []
    classes = None
    unsafe = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "classes" in obj and "path" not in obj:
                classes = obj["classes"]
                unsafe = obj.get("unsafe", [])
                continue
            records.append(ClipRecord(**obj))
    if classes is None:
        classes = sorted({r.label for r in records})
    return Manifest(classes, unsafe, records, path.parent)


def split_manifest(manifest, ratios=(0.7, 0.15, 0.15), seed=0):
    """Assign stratified train/val/test splits; returns the same manifest.

    Per class: seeded shuffle, then largest-remainder apportionment, so
    per-class counts stay within one clip of the exact ratios.
    """
    if len(ratios) != len(SPLITS):
        raise ValueError("need exactly three ratios (train, val, test)")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5F17]))
    for label in manifest.classes:
        members = [r for r in manifest.records if r.label == label]
        order = rng.permutation(len(members))
        n = len(members)
        base = [int(np.floor(r * n)) for r in ratios]
        rem = n - sum(base)
        fracs = sorted(
            range(len(ratios)),
            key=lambda i: (-(ratios[i] * n - base[i]), i),
        )
        for i in fracs[:rem]:
            base[i] += 1
        cursor = 0
        for split_name, count in zip(SPLITS, base):
            for j in order[cursor : cursor + count]:
                members[j].split = split_name
            cursor += count
    return manifest


def class_weights(manifest, split=None):
    """total / (K * count_k) per class; zero-count classes are an error."""
    records = manifest.records if split is None else manifest.by_split(split)
    counts = np.array(
        [sum(1 for r in records if r.label == c) for c in manifest.classes], dtype=float
    )
    if (counts == 0).any():
        empty = [c for c, n in zip(manifest.classes, counts) if n == 0]
        raise ValueError(f"classes with zero clips: {empty}")
    total = counts.sum()
    return total / (len(manifest.classes) * counts)
