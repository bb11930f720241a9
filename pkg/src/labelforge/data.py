"""Dataset loading, stratified splitting, and labeling-set subsampling.

All functions are pure: they return new Dataset objects and never mutate
their inputs, so they are safe to use concurrently.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

LABELING = "labeling"
DEMO = "demo"
TEST = "test"
UNASSIGNED = "unassigned"

SPLIT_TAGS = (LABELING, DEMO, TEST, UNASSIGNED)


class DatasetError(ValueError):
    """Raised for malformed files, invalid records, or invalid split specs."""


@dataclass(frozen=True)
class LabeledSentence:
    """One input text with its 1-based class id and split tag."""

    text: str
    class_id: int
    split: str = UNASSIGNED

    def __post_init__(self):
        if not self.text.strip():
            raise DatasetError("sentence text is empty")
        if self.class_id < 1:
            raise DatasetError(f"class id must be >= 1, got {self.class_id}")
        if self.split not in SPLIT_TAGS:
            raise DatasetError(f"unknown split tag {self.split!r}")


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of labeled sentences over classes 1..num_classes."""

    sentences: tuple[LabeledSentence, ...]
    num_classes: int
    gold_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise DatasetError(f"need at least 2 classes, got {self.num_classes}")
        seen = {s.class_id for s in self.sentences}
        if seen != set(range(1, self.num_classes + 1)):
            missing = sorted(set(range(1, self.num_classes + 1)) - seen)
            raise DatasetError(f"classes missing from dataset: {missing}")
        if self.gold_labels is not None and len(self.gold_labels) != self.num_classes:
            raise DatasetError("gold_labels length must equal num_classes")

    def sentences_in(self, split: str) -> list[LabeledSentence]:
        """Sentences carrying the given split tag, in dataset order."""
        return [s for s in self.sentences if s.split == split]

    def class_counts(self, split: str | None = None) -> dict[int, int]:
        counts = {c: 0 for c in range(1, self.num_classes + 1)}
        for s in self.sentences:
            if split is None or s.split == split:
                counts[s.class_id] += 1
        return counts


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for (labeling, demo, test) plus the shuffle seed."""

    fractions: tuple[float, float, float] = (0.25, 0.25, 0.5)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3:
            raise DatasetError("fractions must be a (labeling, demo, test) triple")
        if not all(0.0 < f < 1.0 for f in self.fractions):
            raise DatasetError(f"each fraction must lie in (0, 1), got {self.fractions}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise DatasetError(f"fractions must sum to 1, got {sum(self.fractions)}")


def load_dataset(path, format: str | None = None) -> Dataset:
    """Load a JSONL ({"text", "class"}) or CSV (text,class header) dataset.

    Sentences keep file order with split=unassigned; the class count is
    inferred as the maximum class id seen.
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format not in ("jsonl", "csv"):
        raise DatasetError(f"unknown dataset format {format!r}")

    records = _read_jsonl(path) if format == "jsonl" else _read_csv(path)
    if not records:
        raise DatasetError(f"{path}: dataset file is empty")
    sentences = tuple(records)
    num_classes = max(s.class_id for s in sentences)
    return Dataset(sentences=sentences, num_classes=num_classes)


def _read_jsonl(path: Path) -> list[LabeledSentence]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({e})") from e
            if not isinstance(obj, dict) or "text" not in obj or "class" not in obj:
                raise DatasetError(f"{path}:{lineno}: record needs 'text' and 'class' fields")
            out.append(_make_sentence(obj["text"], obj["class"], path, lineno))
    return out


def _read_csv(path: Path) -> list[LabeledSentence]:
    out = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"text", "class"} <= set(reader.fieldnames):
            raise DatasetError(f"{path}: CSV header must contain 'text' and 'class'")
        for lineno, row in enumerate(reader, start=2):
            out.append(_make_sentence(row.get("text"), row.get("class"), path, lineno))
    return out


def _make_sentence(text, class_value, path, lineno) -> LabeledSentence:
    if not isinstance(text, str) or not text.strip():
        raise DatasetError(f"{path}:{lineno}: empty or non-string text")
    try:
        class_id = int(class_value)
    except (TypeError, ValueError):
        raise DatasetError(f"{path}:{lineno}: class must be an integer, got {class_value!r}")
    if class_id < 1:
        raise DatasetError(f"{path}:{lineno}: class must be >= 1, got {class_id}")
    return LabeledSentence(text=text.strip(), class_id=class_id)


def largest_remainder_counts(n: int, fractions) -> list[int]:
    """Apportion n items over fractions; leftovers go to the largest
    fractional remainders, earlier position winning ties."""
    ideal = [n * f for f in fractions]
    base = [int(np.floor(x)) for x in ideal]
    left = n - sum(base)
    order = sorted(range(len(fractions)), key=lambda i: (-(ideal[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def split_dataset(ds: Dataset, spec: SplitSpec) -> Dataset:
    """Assign labeling/demo/test tags stratified per class.

    Within each class the members are shuffled with the spec seed and
    partitioned by largest-remainder rounding of the fractions, so the
    same (dataset, spec) always yields identical tags.
    """
    rng = np.random.default_rng(spec.seed)
    tags: dict[int, str] = {}
    for class_id in range(1, ds.num_classes + 1):
        members = [i for i, s in enumerate(ds.sentences) if s.class_id == class_id]
        counts = largest_remainder_counts(len(members), spec.fractions)
        if any(c == 0 for c in counts):
            raise DatasetError(
                f"class {class_id} has {len(members)} members, too few to "
                f"stratify under fractions {spec.fractions}"
            )
        order = rng.permutation(len(members))
        shuffled = [members[j] for j in order]
        bounds = np.cumsum(counts)
        for pos, idx in enumerate(shuffled):
            if pos < bounds[0]:
                tags[idx] = LABELING
            elif pos < bounds[1]:
                tags[idx] = DEMO
            else:
                tags[idx] = TEST
    new_sentences = tuple(
        replace(s, split=tags[i]) for i, s in enumerate(ds.sentences)
    )
    return replace(ds, sentences=new_sentences)


def subset_classes(ds: Dataset, keep) -> Dataset:
    """Keep only the given classes, reindexed to 1..len(keep) in keep order.

    Split tags are preserved.
    """
    keep = list(keep)
    if len(keep) < 2:
        raise DatasetError("must keep at least 2 classes")
    if len(set(keep)) != len(keep):
        raise DatasetError("duplicate class ids in keep list")
    unknown = [c for c in keep if not 1 <= c <= ds.num_classes]
    if unknown:
        raise DatasetError(f"unknown class ids: {unknown}")
    remap = {old: new for new, old in enumerate(keep, start=1)}
    new_sentences = tuple(
        replace(s, class_id=remap[s.class_id])
        for s in ds.sentences
        if s.class_id in remap
    )
    gold = None
    if ds.gold_labels is not None:
        gold = tuple(ds.gold_labels[c - 1] for c in keep)
    return Dataset(sentences=new_sentences, num_classes=len(keep), gold_labels=gold)


def sample_labeling(ds: Dataset, k: int, seed: int) -> list[LabeledSentence]:
    """First k items of one fixed seeded shuffle of the labeling split.

    Samples are nested: the k=10 sample is a prefix of the k=20 sample for
    the same seed, so a K sweep reuses smaller samples verbatim.
    """
    pool = ds.sentences_in(LABELING)
    if k < 1:
        raise DatasetError(f"k must be >= 1, got {k}")
    if k > len(pool):
        raise DatasetError(f"k={k} exceeds labeling split size {len(pool)}")
    order = np.random.default_rng(seed).permutation(len(pool))
    return [pool[j] for j in order[:k]]


def write_split_manifest(ds: Dataset, path) -> None:
    """Write one {"index", "split"} JSON object per sentence."""
    with open(path, "w", encoding="utf-8") as f:
        for i, s in enumerate(ds.sentences):
            f.write(json.dumps({"index": i, "split": s.split}) + "\n")


def apply_split_manifest(ds: Dataset, path) -> Dataset:
    """Re-apply split tags recorded by write_split_manifest."""
    tags = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            tags[int(obj["index"])] = obj["split"]
    if set(tags) != set(range(len(ds.sentences))):
        raise DatasetError(f"{path}: manifest does not cover every sentence exactly once")
    new_sentences = tuple(replace(s, split=tags[i]) for i, s in enumerate(ds.sentences))
    return replace(ds, sentences=new_sentences)
