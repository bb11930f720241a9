"""Walk through dataset loading, stratified splits, and nested K sampling.

Run with: python3 demos/01_splits_and_sampling.py
"""

import json
import tempfile
from pathlib import Path

from labelforge import SplitSpec, load_dataset, sample_labeling, split_dataset, subset_classes
from labelforge.data import DEMO, LABELING, TEST

# Write a small 5-class corpus in the JSONL format the loader expects:
# one {"text", "class"} object per line, classes 1-based.
workdir = Path(tempfile.mkdtemp())
path = workdir / "sentiment.jsonl"
with open(path, "w") as f:
    for i in range(1000):
        record = {"text": f"sample sentence number {i:04d}", "class": 1 + i % 5}
        f.write(json.dumps(record) + "\n")

ds = load_dataset(path)
print(f"loaded {len(ds.sentences)} sentences over {ds.num_classes} classes")
print("per-class counts:", ds.class_counts())

# Keep three of the five classes; ids are renumbered 1..3 in keep order.
three_way = subset_classes(ds, [3, 4, 5])
print(f"\n3-way subset: {len(three_way.sentences)} sentences,"
      f" classes now {sorted(set(s.class_id for s in three_way.sentences))}")

# The 25/25/50 split is stratified per class and fully determined by the seed.
split = split_dataset(three_way, SplitSpec(fractions=(0.25, 0.25, 0.5), seed=7))
for tag in (LABELING, DEMO, TEST):
    print(f"{tag:>9}: {sum(split.class_counts(tag).values()):>4} sentences "
          f"{split.class_counts(tag)}")

# Labeling samples are nested: the K=10 sample is a prefix of the K=20 one,
# so a K sweep reuses the smaller samples verbatim.
ten = sample_labeling(split, 10, seed=11)
twenty = sample_labeling(split, 20, seed=11)
print("\nK=10 sample is a prefix of K=20:", twenty[:10] == ten)
print("first three labeling texts:")
for s in ten[:3]:
    print(f"  class {s.class_id}: {s.text}")
