"""Prompt assembly, restricted-argmax prediction, and the N-shot sweep.

Run with: python3 demos/04_icl_sweep.py
"""

import tempfile
from pathlib import Path

from labelforge import (
    DEFAULT_TEMPLATE,
    Dataset,
    LabelAssignment,
    LabeledSentence,
    SplitSpec,
    SyntheticConfig,
    build_prompt,
    fetch_vocabulary,
    make_synthetic_provider,
    predict,
    read_records,
    run_sweep,
    split_dataset,
)
from labelforge.data import DEMO, TEST

ds = Dataset(
    tuple(LabeledSentence(f"sweepable text {i:03d}", 1 + i % 3) for i in range(240)), 3
)
ds = split_dataset(ds, SplitSpec(seed=5))
cfg = SyntheticConfig(num_classes=3, vocab_size=25, planted_gold=(2, 9, 19),
                      signal_strength=1.0, noise_scale=0.4, seed=8)
provider = make_synthetic_provider(cfg, {s.text: s.class_id for s in ds.sentences})
vocab = fetch_vocabulary(provider, "Ġ")

gold = LabelAssignment(tuple(cfg.planted_gold), vocab.provider_fingerprint)
demos = ds.sentences_in(DEMO)[:2]
query = ds.sentences_in(TEST)[0]

# A prompt is demonstrations joined by the separator, then the query ending
# at the label cue; the next token after "Category:" is what gets scored.
prompt = build_prompt(demos, query, gold, DEFAULT_TEMPLATE, vocab)
print("--- prompt ---")
print(prompt)
print("--------------")
print("predicted class:", predict(provider, prompt, gold, vocab),
      "| true class:", query.class_id)

# A sweep walks label sets x N values x runs. Records stream to JSONL as
# they complete, so an interrupted sweep resumes where it stopped.
weaker = LabelAssignment((0, 1, 3), vocab.provider_fingerprint)
label_sets = [("gold", 100, gold), ("random", 10, weaker)]
results = Path(tempfile.mkdtemp()) / "records.jsonl"
records = run_sweep(
    provider, label_sets, ds.sentences_in(DEMO), ds.sentences_in(TEST),
    ns=[0, 2, 4], runs=3, seed=13, template=DEFAULT_TEMPLATE, vocab=vocab,
    results_path=results,
)
print(f"\nsweep wrote {len(records)} records to {results}")
for rec in records[:6]:
    print(f"  {rec.label_set_id:>6} N={rec.n_shots} run={rec.run}: {rec.accuracy:.3f}")

# Re-running is a no-op: every cell is already present in the file.
again = run_sweep(
    provider, label_sets, ds.sentences_in(DEMO), ds.sentences_in(TEST),
    ns=[0, 2, 4], runs=3, seed=13, template=DEFAULT_TEMPLATE, vocab=vocab,
    results_path=results,
)
print("resume found all cells complete:", len(again) == len(read_records(results)))
