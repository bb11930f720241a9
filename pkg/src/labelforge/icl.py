"""N-shot prompt construction and the accuracy sweep protocol.

Prediction is a restricted argmax over the C assigned label tokens at the
label position, never free generation. Demonstrations are resampled per
run from the demo split with seeded randomness, and the same demo sample
is shared by every test query in that run (and by every label set, which
relabels the same demonstrations rather than drawing new ones).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .optimize import LabelAssignment
from .prompts import PromptTemplate
from .providers import CandidateVocabulary, ProviderError, score_label_position


class SweepError(RuntimeError):
    """One or more sweep cells failed; completed cells were persisted."""


@dataclass(frozen=True)
class ShotSpec:
    n_shots: int
    run_index: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n_shots < 0:
            raise ValueError("n_shots must be >= 0")
        if self.run_index < 0:
            raise ValueError("run_index must be >= 0")


@dataclass(frozen=True)
class AccuracyRecord:
    """One (label set, N, run) accuracy observation."""

    label_set_id: str
    k: int
    n_shots: int
    run: int
    accuracy: float
    n_test: int

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        scaled = self.accuracy * self.n_test
        if abs(scaled - round(scaled)) > 1e-9:
            raise ValueError(f"accuracy {self.accuracy} is not a count / {self.n_test}")

    def to_dict(self) -> dict:
        return {
            "label_set_id": self.label_set_id,
            "K": self.k,
            "n_shots": self.n_shots,
            "run": self.run,
            "accuracy": self.accuracy,
            "n_test": self.n_test,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AccuracyRecord":
        return cls(
            label_set_id=str(obj["label_set_id"]),
            k=int(obj["K"]),
            n_shots=int(obj["n_shots"]),
            run=int(obj["run"]),
            accuracy=float(obj["accuracy"]),
            n_test=int(obj["n_test"]),
        )


def build_prompt(demos, query, assignment: LabelAssignment, template: PromptTemplate,
                 vocab: CandidateVocabulary) -> str:
    """Join the rendered demonstrations and the rendered query.

    Demo labels come from the assignment while keeping each demonstration's
    original class, and are rendered without the boundary marker (the
    pattern supplies the space before the label).
    """
    if assignment.vocab_fingerprint != vocab.provider_fingerprint:
        raise ValueError("assignment was built under a different vocabulary")
    parts = []
    for d in demos:
        if d.text == query.text:
            raise ValueError("query must not appear among the demonstrations")
        label = vocab.label_text(assignment.labels[d.class_id - 1])
        parts.append(template.render_demo(d.text, label))
    parts.append(template.render_query(query.text))
    return template.separator.join(parts)


def predict(provider, prompt: str, assignment: LabelAssignment,
            vocab: CandidateVocabulary) -> int:
    """Argmax class over the assigned label tokens; ties go to the lowest
    class id."""
    if assignment.vocab_fingerprint != vocab.provider_fingerprint:
        raise ValueError("assignment was built under a different vocabulary")
    candidates = [vocab.tokens[i] for i in assignment.labels]
    logits = score_label_position(provider, prompt, candidates)
    return int(np.argmax(logits)) + 1


def sample_demos(demo_split, n_shots: int, seed: int, run_index: int) -> list:
    """Uniform without-replacement demo sample for one run.

    The permutation depends only on (seed, run_index), so samples are
    nested across N within a run and shared across label sets.
    """
    if n_shots == 0:
        return []
    if n_shots > len(demo_split):
        raise ValueError(f"n_shots={n_shots} exceeds demo split size {len(demo_split)}")
    order = np.random.default_rng([seed, run_index]).permutation(len(demo_split))
    return [demo_split[j] for j in order[:n_shots]]


def evaluate_nshot(provider, assignment: LabelAssignment, demo_split, test_split,
                   spec: ShotSpec, template: PromptTemplate, vocab: CandidateVocabulary,
                   label_set_id: str = "", k: int = 0) -> AccuracyRecord:
    """Accuracy of one (N, run) cell over the whole test split."""
    if not test_split:
        raise ValueError("test split is empty")
    demos = sample_demos(demo_split, spec.n_shots, spec.seed, spec.run_index)
    correct = 0
    for query in test_split:
        prompt = build_prompt(demos, query, assignment, template, vocab)
        if predict(provider, prompt, assignment, vocab) == query.class_id:
            correct += 1
    return AccuracyRecord(
        label_set_id=label_set_id,
        k=k,
        n_shots=spec.n_shots,
        run=spec.run_index,
        accuracy=correct / len(test_split),
        n_test=len(test_split),
    )


def read_records(path) -> list[AccuracyRecord]:
    records = []
    path = Path(path)
    if not path.exists():
        return records
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(AccuracyRecord.from_dict(json.loads(line)))
    return records


def run_sweep(provider, label_sets, demo_split, test_split, ns, runs: int, seed: int,
              template: PromptTemplate, vocab: CandidateVocabulary,
              results_path=None) -> list[AccuracyRecord]:
    """Full factorial over label sets x N values x runs.

    N=0 collapses to a single run (it is deterministic). With a results
    path, each record is appended as soon as its cell completes, and cells
    already present in the file are skipped, so an interrupted sweep can be
    resumed and converges to the same record set as an uninterrupted one.
    Cell failures are collected and reported together at the end; completed
    cells stay persisted.
    """
    ns = list(ns)
    if ns != sorted(ns):
        raise ValueError("ns must be sorted ascending")
    if runs < 1:
        raise ValueError("runs must be >= 1")

    done: dict[tuple, AccuracyRecord] = {}
    for rec in read_records(results_path) if results_path else []:
        done[(rec.label_set_id, rec.n_shots, rec.run)] = rec

    out = list(done.values())
    failures = []
    sink = open(results_path, "a", encoding="utf-8") if results_path else None
    try:
        for label_set_id, k, assignment in label_sets:
            for n in ns:
                for run in range(1 if n == 0 else runs):
                    key = (label_set_id, n, run)
                    if key in done:
                        continue
                    spec = ShotSpec(n_shots=n, run_index=run, seed=seed)
                    try:
                        rec = evaluate_nshot(
                            provider, assignment, demo_split, test_split, spec,
                            template, vocab, label_set_id=label_set_id, k=k,
                        )
                    except ProviderError as e:
                        failures.append((key, str(e)))
                        continue
                    out.append(rec)
                    if sink is not None:
                        sink.write(json.dumps(rec.to_dict()) + "\n")
                        sink.flush()
    finally:
        if sink is not None:
            sink.close()

    if failures:
        cells = ", ".join(f"{key}: {msg}" for key, msg in failures[:5])
        raise SweepError(f"{len(failures)} sweep cells failed ({cells})")
    out.sort(key=lambda r: (r.label_set_id, r.n_shots, r.run))
    return out


def write_sweep_manifest(path, seed: int, template: PromptTemplate,
                         vocab: CandidateVocabulary, model_id: str) -> None:
    manifest = {
        "seed": seed,
        "template_fingerprint": template.fingerprint,
        "vocab_fingerprint": vocab.provider_fingerprint,
        "model_id": model_id,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
