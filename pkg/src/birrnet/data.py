"""Dataset scanning, deterministic stratified splitting, batch loading, and a
synthetic banknote-image generator for desk-scale experiments.

Directory layout: ``root/<class-code>/<image file>``. Manifests and splits
are plain text, one record per line, tab-separated, in a stable order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .augment import AugmentConfig, apply_affine, sample_affine
from .errors import ConfigError, DatasetError, DecodeError, ItemLoadError
from .labels import DEFAULT_LABELS, ClassLabel, OTHER_CODE, codes_to_ids, save_labels
from .preprocess import ImageBuffer, decode_image, encode_png, normalize, resize_bilinear
from .rng import make_rng

Entry = tuple[str, int]  # (path relative to root, class id)

SPLIT_NAMES = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)


@dataclass
class DatasetManifest:
    root: Path
    entries: list[Entry]
    class_counts: dict[int, int]
    unknown_dirs: list[str] = field(default_factory=list)
    undecodable: list[str] = field(default_factory=list)


@dataclass
class SplitManifest:
    root: Path
    train: list[Entry]
    val: list[Entry]
    test: list[Entry]
    seed: int
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS

    def subset(self, name: str) -> list[Entry]:
        if name not in SPLIT_NAMES:
            raise ConfigError(f"unknown split {name!r}, expected one of {SPLIT_NAMES}")
        return getattr(self, name)


def scan_dataset(root, labels=DEFAULT_LABELS) -> DatasetManifest:
    """Index every decodable image under ``root/<class-code>/``.

    Unknown subdirectories and undecodable files are skipped and reported on
    the manifest. Ordering is lexicographic, so rescanning an unchanged tree
    reproduces the manifest exactly.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    ids = codes_to_ids(labels)
    entries: list[Entry] = []
    counts: dict[int, int] = {lab.id: 0 for lab in labels}
    unknown: list[str] = []
    undecodable: list[str] = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if sub.name not in ids:
            unknown.append(sub.name)
            continue
        class_id = ids[sub.name]
        for f in sorted(p for p in sub.iterdir() if p.is_file()):
            rel = f"{sub.name}/{f.name}"
            try:
                decode_image(f.read_bytes())
            except DecodeError:
                undecodable.append(rel)
                continue
            entries.append((rel, class_id))
            counts[class_id] += 1
    if not entries:
        raise DatasetError(f"no decodable images found under {root}")
    return DatasetManifest(root=root, entries=entries, class_counts=counts,
                           unknown_dirs=unknown, undecodable=undecodable)


def _allocate_counts(n: int, fractions, deficits: list[float]) -> list[int]:
    """Largest-remainder allocation of n items over the split fractions,
    steered by the running per-split deficit so totals across classes land on
    the global targets."""
    ideals = [f * n for f in fractions]
    counts = [int(math.floor(v)) for v in ideals]
    leftover = n - sum(counts)
    order = sorted(range(len(fractions)),
                   key=lambda s: (-(ideals[s] - counts[s] + deficits[s]), s))
    for s in order[:leftover]:
        counts[s] += 1
    for s in range(len(fractions)):
        deficits[s] += ideals[s] - counts[s]
    return counts


def split_dataset(manifest: DatasetManifest, fractions=DEFAULT_FRACTIONS,
                  seed: int = 0) -> SplitManifest:
    """Stratified split: per class, shuffle with a seeded generator and cut.

    Per class and per split the size is within one of fraction * class_total,
    and the same (manifest, seed) pair always produces an identical split.
    """
    if len(fractions) != len(SPLIT_NAMES):
        raise ConfigError(f"expected {len(SPLIT_NAMES)} fractions, got {len(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {fractions}")
    by_class: dict[int, list[Entry]] = {}
    for entry in manifest.entries:
        by_class.setdefault(entry[1], []).append(entry)
    for class_id, group in sorted(by_class.items()):
        if len(group) < 3:
            raise DatasetError(
                f"class {class_id} has only {len(group)} images; at least 3 are "
                "needed to populate train/val/test")

    rng = make_rng(seed)
    parts: dict[str, list[Entry]] = {name: [] for name in SPLIT_NAMES}
    deficits = [0.0] * len(SPLIT_NAMES)
    for class_id in sorted(by_class):
        group = by_class[class_id]
        perm = rng.permutation(len(group))
        shuffled = [group[i] for i in perm]
        counts = _allocate_counts(len(group), fractions, deficits)
        pos = 0
        for name, count in zip(SPLIT_NAMES, counts):
            parts[name].extend(shuffled[pos:pos + count])
            pos += count
    return SplitManifest(root=manifest.root, train=parts["train"], val=parts["val"],
                         test=parts["test"], seed=seed,
                         fractions=tuple(fractions))


def write_split_file(split: SplitManifest, path) -> None:
    """One record per line: path, class id, split tag (tab-separated)."""
    lines = []
    for name in SPLIT_NAMES:
        for rel, class_id in split.subset(name):
            lines.append(f"{rel}\t{class_id}\t{name}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_split_file(path, root, seed: int = -1,
                    fractions=DEFAULT_FRACTIONS) -> SplitManifest:
    parts: dict[str, list[Entry]] = {name: [] for name in SPLIT_NAMES}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3 or fields[2] not in SPLIT_NAMES:
            raise DatasetError(f"{path}:{lineno}: malformed split record {line!r}")
        parts[fields[2]].append((fields[0], int(fields[1])))
    return SplitManifest(root=Path(root), train=parts["train"], val=parts["val"],
                         test=parts["test"], seed=seed, fractions=tuple(fractions))


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

# base RGB per denomination; any two differ by well over 40 in some channel
PALETTE = {
    0: (214, 125, 62),   # ETB_5
    1: (96, 160, 96),    # ETB_10
    2: (72, 104, 192),   # ETB_50
    3: (168, 72, 144),   # ETB_100
    4: (200, 176, 64),   # ETB_200
}


def _synth_note(rng: np.random.Generator, size: int, class_id: int) -> ImageBuffer:
    base = np.array(PALETTE[class_id], dtype=np.float64)
    brightness = rng.uniform(0.80, 1.20)
    img = np.full((size, size, 3), base * brightness, dtype=np.float64)
    stripe_color = base * brightness * 0.45
    n_stripes = class_id + 1
    thickness = max(1, size // 16)
    for s in range(n_stripes):
        y = int(round((s + 1) / (n_stripes + 1) * size))
        y0 = max(0, y - thickness // 2)
        img[y0:y0 + thickness, :, :] = stripe_color
    img += rng.normal(0.0, 12.0, size=img.shape)
    return ImageBuffer(size, size, np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8))


def _synth_other(rng: np.random.Generator, size: int) -> ImageBuffer:
    img = np.full((size, size, 3), rng.integers(0, 256, size=3), dtype=np.float64)
    for _ in range(int(rng.integers(2, 6))):
        color = rng.integers(0, 256, size=3).astype(np.float64)
        cx, cy = rng.integers(0, size, size=2)
        half = int(rng.integers(size // 8, size // 2))
        if rng.random() < 0.5:
            img[max(0, cy - half):cy + half, max(0, cx - half):cx + half, :] = color
        else:
            yy, xx = np.ogrid[:size, :size]
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= half ** 2
            img[mask] = color
    img += rng.normal(0.0, 12.0, size=img.shape)
    return ImageBuffer(size, size, np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8))


def synth_generate(out_root, per_class: int, resolution: int = 48,
                   seed: int = 0, labels=DEFAULT_LABELS) -> DatasetManifest:
    """Write a deterministic synthetic corpus: per class, ``per_class`` PNG
    images under ``out_root/<code>/``, plus a labels.json. The same seed
    produces bitwise-identical files."""
    if per_class < 3:
        raise ConfigError(f"per_class must be >= 3, got {per_class}")
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    for lab in labels:
        class_dir = out_root / lab.code
        class_dir.mkdir(parents=True, exist_ok=True)
        for idx in range(per_class):
            rng = make_rng(seed, lab.id, idx)
            if lab.code == OTHER_CODE:
                img = _synth_other(rng, resolution)
            else:
                img = _synth_note(rng, resolution, lab.id)
            (class_dir / f"{lab.code.lower()}_{idx:04d}.png").write_bytes(encode_png(img))
    save_labels(labels, out_root / "labels.json")
    return scan_dataset(out_root, labels)


# ---------------------------------------------------------------------------
# batch loading
# ---------------------------------------------------------------------------

def load_item(root, entry: Entry, resolution: int,
              augment: AugmentConfig | None = None, rng=None) -> np.ndarray:
    """decode -> augment (optional) -> resize -> normalize, for one entry."""
    rel, _ = entry
    path = Path(root) / rel
    try:
        img = decode_image(path.read_bytes())
    except (OSError, DecodeError) as exc:
        raise ItemLoadError(f"failed to load {path}: {exc}") from exc
    if augment is not None and augment.enabled:
        img = apply_affine(img, sample_affine(augment, img.width, img.height, rng))
    img = resize_bilinear(img, resolution, resolution)
    return normalize(img)


def batch_loader(entries: list[Entry], root, batch_size: int, shuffle_seed,
                 augment: AugmentConfig | None, resolution: int
                 ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (batch tensor, label ids) over one seeded-shuffle epoch.

    The final partial batch is emitted. Per-item augmentation streams are
    derived from (shuffle seed, epoch position), so results do not depend on
    batch boundaries or worker count.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    keys = shuffle_seed if isinstance(shuffle_seed, (tuple, list)) else (shuffle_seed,)
    order = make_rng(*keys).permutation(len(entries))
    for start in range(0, len(entries), batch_size):
        chunk = order[start:start + batch_size]
        tensors = []
        labels = []
        for pos, idx in enumerate(chunk, start=start):
            entry = entries[idx]
            item_rng = make_rng(*keys, pos) if augment is not None else None
            tensors.append(load_item(root, entry, resolution, augment, item_rng))
            labels.append(entry[1])
        yield np.concatenate(tensors, axis=0), np.asarray(labels, dtype=np.int64)


def batches_for(split: SplitManifest, name: str, batch_size: int, shuffle_seed,
                augment: AugmentConfig | None, resolution: int):
    """Split-aware loader: augmentation is only ever applied to the train split."""
    if augment is not None and augment.enabled and name != "train":
        raise ConfigError(f"augmentation requested for the {name!r} split; "
                          "only the train split may be augmented")
    return batch_loader(split.subset(name), split.root, batch_size, shuffle_seed,
                        augment, resolution)
