"""Search for class-label tokens that maximize the labeling-set objective.

The objective is the summed log-softmax score of each labeling sentence's
correct class, where the softmax runs over the C currently assigned label
tokens. Hill climbing replaces one class's token at a time, accepting only
strict improvements; multi-restart selection keeps the best of several
seeded starts. A brute-force enumerator serves as the exact oracle on small
instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .cache import LogitMatrix

DEFAULT_MAX_ITERATIONS = 100
DEFAULT_RESTARTS = 10
BRUTE_FORCE_GUARD = 1_000_000


@dataclass(frozen=True)
class LabelAssignment:
    """Map from class index (position) to a vocabulary token index."""

    labels: tuple[int, ...]
    vocab_fingerprint: str

    def __post_init__(self):
        if len(self.labels) < 1:
            raise ValueError("an assignment needs at least 1 class")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"label tokens must be pairwise distinct: {self.labels}")
        if any(t < 0 for t in self.labels):
            raise ValueError("token indices must be >= 0")

    @property
    def num_classes(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class FitResult:
    assignment: LabelAssignment
    objective: float
    trace: tuple[tuple[int, float], ...]
    restarts_run: int
    seed: int


def _check_inputs(matrix: LogitMatrix, classes, assignment: LabelAssignment) -> np.ndarray:
    classes = np.asarray(classes, dtype=np.int64)
    if classes.shape != (matrix.num_rows,):
        raise ValueError(f"need one class per row: {classes.shape} vs {matrix.num_rows} rows")
    c = assignment.num_classes
    if classes.min() < 1 or classes.max() > c:
        raise ValueError(f"class ids must lie in [1, {c}]")
    if assignment.vocab_fingerprint != matrix.vocab_fingerprint:
        raise ValueError(
            "assignment and matrix were built under different vocabularies "
            f"({assignment.vocab_fingerprint[:12]} vs {matrix.vocab_fingerprint[:12]})"
        )
    if max(assignment.labels) >= matrix.num_tokens:
        raise ValueError("assignment references tokens outside the matrix")
    return classes


def objective(matrix: LogitMatrix, classes, assignment: LabelAssignment) -> float:
    """Sum over rows of (correct-label logit minus log-sum-exp of the C
    assigned logits). Always <= 0; invariant under per-row constant shifts."""
    classes = _check_inputs(matrix, classes, assignment)
    sub = matrix.values[:, list(assignment.labels)]
    correct = sub[np.arange(sub.shape[0]), classes - 1]
    peak = sub.max(axis=1)
    lse = peak + np.log(np.exp(sub - peak[:, None]).sum(axis=1))
    return float(np.sum(correct - lse))


def _swap_objectives(values: np.ndarray, classes0: np.ndarray, labels: list[int],
                     swap_class: int) -> np.ndarray:
    """Objective value for every possible replacement of swap_class's token,
    as a vector over the whole vocabulary."""
    others = [t for c, t in enumerate(labels) if c != swap_class]
    sub = values[:, others]
    peak = sub.max(axis=1)
    fixed_lse = peak + np.log(np.exp(sub - peak[:, None]).sum(axis=1))
    lse = np.logaddexp(fixed_lse[:, None], values)  # (K, V)

    in_class = classes0 == swap_class
    fixed_correct = 0.0
    if (~in_class).any():
        rows = np.nonzero(~in_class)[0]
        cols = np.asarray(labels, dtype=np.int64)[classes0[rows]]
        fixed_correct = float(values[rows, cols].sum())
    var_correct = values[in_class].sum(axis=0)
    return fixed_correct + var_correct - lse.sum(axis=0)


def hill_climb(matrix: LogitMatrix, classes, initial: LabelAssignment,
               max_iterations: int = DEFAULT_MAX_ITERATIONS, seed: int = 0) -> FitResult:
    """Coordinate ascent over classes.

    Each sweep walks the classes in order; at the first class where some
    unassigned token strictly improves the objective, the best such token
    (lowest index on ties) is adopted and the sweep restarts. Terminates
    when a full sweep finds no improvement or after max_iterations sweeps.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    classes = _check_inputs(matrix, classes, initial)
    classes0 = classes - 1
    values = matrix.values
    labels = list(initial.labels)
    best = objective(matrix, classes, initial)
    trace = [(0, best)]

    for sweep in range(1, max_iterations + 1):
        improved = False
        for c in range(len(labels)):
            totals = _swap_objectives(values, classes0, labels, c)
            totals[labels] = -np.inf  # keep the assignment injective
            candidate = int(np.argmax(totals))
            if totals[candidate] > best:
                labels[c] = candidate
                best = float(totals[candidate])
                trace.append((sweep, best))
                improved = True
                break
        if not improved:
            break

    result_assignment = LabelAssignment(tuple(labels), matrix.vocab_fingerprint)
    return FitResult(
        assignment=result_assignment,
        objective=best,
        trace=tuple(trace),
        restarts_run=1,
        seed=seed,
    )


def random_assignment(matrix: LogitMatrix, num_classes: int, rng) -> LabelAssignment:
    """Uniform injective assignment of num_classes tokens."""
    if num_classes > matrix.num_tokens:
        raise ValueError("more classes than candidate tokens")
    picks = rng.permutation(matrix.num_tokens)[:num_classes]
    return LabelAssignment(tuple(int(t) for t in picks), matrix.vocab_fingerprint)


def optimize_labels(matrix: LogitMatrix, classes, restarts: int = DEFAULT_RESTARTS,
                    seed: int = 0, max_iterations: int = DEFAULT_MAX_ITERATIONS,
                    num_classes: int | None = None) -> FitResult:
    """Best-of-restarts hill climbing from independent seeded random starts.

    Ties between restarts keep the earliest one, so reruns with the same
    seed reproduce the same assignment. num_classes may exceed the classes
    present in the rows (a small labeling sample can miss a class; its
    token still participates through the softmax denominator); it defaults
    to the largest class id seen.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if num_classes is None:
        num_classes = int(np.max(np.asarray(classes)))
    elif num_classes < int(np.max(np.asarray(classes))):
        raise ValueError("num_classes is smaller than the largest class id in the rows")
    rng = np.random.default_rng(seed)
    best: FitResult | None = None
    for _ in range(restarts):
        initial = random_assignment(matrix, num_classes, rng)
        result = hill_climb(matrix, classes, initial, max_iterations=max_iterations, seed=seed)
        if best is None or result.objective > best.objective:
            best = result
    return replace(best, restarts_run=restarts, seed=seed)


def brute_force_optimum(matrix: LogitMatrix, classes) -> FitResult:
    """Exact maximizer over all injective assignments, for small instances.

    Ties resolve to the lexicographically smallest token tuple. Guarded so
    the enumeration stays within memory and time budgets.
    """
    classes = np.asarray(classes, dtype=np.int64)
    if classes.shape != (matrix.num_rows,):
        raise ValueError("need one class per row")
    num_classes = int(classes.max())
    nv = matrix.num_tokens
    if nv < num_classes:
        raise ValueError(f"{nv} tokens cannot name {num_classes} classes injectively")
    count = 1
    for i in range(num_classes):
        count *= nv - i
    if count > BRUTE_FORCE_GUARD:
        raise ValueError(
            f"{count} ordered assignments exceeds the brute-force guard "
            f"({BRUTE_FORCE_GUARD}); use hill climbing"
        )

    values = matrix.values
    shape = (nv,) * num_classes

    def axis_view(vec: np.ndarray, axis: int) -> np.ndarray:
        view_shape = [1] * num_classes
        view_shape[axis] = nv
        return vec.reshape(view_shape)

    total = np.zeros(shape)
    for c in range(num_classes):
        per_token = values[classes == c + 1].sum(axis=0)
        total = total + axis_view(per_token, c)

    for k in range(matrix.num_rows):
        row = values[k]
        acc = axis_view(row, 0)
        for c in range(1, num_classes):
            acc = np.logaddexp(acc, axis_view(row, c))
        total -= acc

    idx = np.arange(nv)
    for c1 in range(num_classes):
        for c2 in range(c1 + 1, num_classes):
            total = np.where(axis_view(idx, c1) == axis_view(idx, c2), -np.inf, total)

    flat_best = int(np.argmax(total))
    labels = np.unravel_index(flat_best, shape)
    assignment = LabelAssignment(tuple(int(t) for t in labels), matrix.vocab_fingerprint)
    return FitResult(
        assignment=assignment,
        objective=float(total[labels]),
        trace=((0, float(total[labels])),),
        restarts_run=0,
        seed=0,
    )


def export_fit_result(result: FitResult, vocab, k: int, path) -> dict:
    """Write the label-set JSON file: token texts and ids, the objective,
    and the search settings that produced it."""
    payload = {
        "labels": [vocab.tokens[i].text for i in result.assignment.labels],
        "token_ids": [vocab.tokens[i].token_id for i in result.assignment.labels],
        "objective": result.objective,
        "K": k,
        "seed": result.seed,
        "restarts": result.restarts_run,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)
        f.write("\n")
    return payload


def load_fit_export(path, vocab) -> tuple[LabelAssignment, dict]:
    """Rebuild a LabelAssignment from an exported label-set file, verifying
    that the token ids and texts still resolve in the given vocabulary."""
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    indices = []
    for token_id, text in zip(payload["token_ids"], payload["labels"]):
        i = vocab.index_of_token_id(int(token_id))
        if vocab.tokens[i].text != text:
            raise ValueError(
                f"{path}: token id {token_id} now maps to {vocab.tokens[i].text!r}, "
                f"file says {text!r}; vocabulary changed since fitting"
            )
        indices.append(i)
    assignment = LabelAssignment(tuple(indices), vocab.provider_fingerprint)
    return assignment, payload
