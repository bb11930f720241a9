"""Precomputed label-position logit matrices and their on-disk cache.

Once the K x |V| matrix of zero-shot logits is built, hill climbing is pure
numeric work, so the matrix is worth persisting. The cache file is a
versioned container: one JSON header line (version, fingerprints,
dimensions, checksum, sentence references) followed by the raw row-major
float64 values. Full precision is kept so reloading never perturbs argmax
decisions near ties.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .prompts import PromptTemplate
from .providers import CandidateVocabulary, ProviderError, score_label_position

CACHE_VERSION = 1


class CacheError(ValueError):
    """Unreadable, corrupt, or wrong-version cache files."""


class CacheMismatchError(CacheError):
    """Cache was built under a different vocabulary or template."""


@dataclass(frozen=True)
class LogitMatrix:
    """Row k holds the zero-shot label-position logits of sentence k over
    the whole candidate vocabulary."""

    values: np.ndarray
    sentence_index: tuple[str, ...]
    vocab_fingerprint: str
    template_fingerprint: str

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        if self.values.shape[0] != len(self.sentence_index):
            raise ValueError(
                f"{self.values.shape[0]} rows vs {len(self.sentence_index)} sentences"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("logit matrix contains non-finite entries")

    @property
    def num_rows(self) -> int:
        return self.values.shape[0]

    @property
    def num_tokens(self) -> int:
        return self.values.shape[1]


def build_logit_matrix(provider, sentences, template: PromptTemplate,
                       vocab: CandidateVocabulary) -> LogitMatrix:
    """Score every sentence's zero-shot prompt against the full vocabulary,
    one scoring call per sentence.

    Calls may run concurrently up to the provider's max_concurrency; each
    row lands in its preassigned slot, so the result does not depend on
    completion order.
    """
    sentences = list(sentences)
    if not sentences:
        raise ValueError("sentences must be non-empty")
    if len(vocab) == 0:
        raise ValueError("vocabulary must be non-empty")
    candidates = list(vocab.tokens)
    values = np.empty((len(sentences), len(candidates)), dtype=np.float64)

    def score_row(k: int) -> None:
        prompt = template.render_query(sentences[k].text)
        try:
            values[k, :] = score_label_position(provider, prompt, candidates)
        except ProviderError as e:
            raise ProviderError(f"row {k} ({sentences[k].text[:40]!r}): {e}") from e

    workers = min(provider.capabilities().max_concurrency, len(sentences))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for future in [pool.submit(score_row, k) for k in range(len(sentences))]:
                future.result()
    else:
        for k in range(len(sentences)):
            score_row(k)

    return LogitMatrix(
        values=values,
        sentence_index=tuple(s.text for s in sentences),
        vocab_fingerprint=vocab.provider_fingerprint,
        template_fingerprint=template.fingerprint,
    )


def cache_path(directory, vocab_fingerprint: str, template_fingerprint: str, k: int) -> Path:
    return Path(directory) / f"{vocab_fingerprint[:12]}-{template_fingerprint[:12]}-K{k}.bin"


def save_cache(matrix: LogitMatrix, path) -> None:
    """Write the versioned header line plus raw float64 values."""
    raw = np.ascontiguousarray(matrix.values, dtype="<f8").tobytes()
    header = {
        "version": CACHE_VERSION,
        "vocab_fingerprint": matrix.vocab_fingerprint,
        "template_fingerprint": matrix.template_fingerprint,
        "rows": matrix.num_rows,
        "cols": matrix.num_tokens,
        "checksum": hashlib.sha256(raw).hexdigest(),
        "sentences": list(matrix.sentence_index),
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, ensure_ascii=False).encode("utf-8") + b"\n")
        f.write(raw)


def load_cache(path, vocab: CandidateVocabulary | None = None,
               template: PromptTemplate | None = None) -> LogitMatrix:
    """Load a cache file, verifying version and checksum.

    When a vocabulary or template is supplied, their fingerprints must match
    the header; refusing mismatches prevents silently reusing logits
    computed under a different prompt or token set.
    """
    with open(path, "rb") as f:
        header_line = f.readline()
        raw = f.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CacheError(f"{path}: unreadable cache header ({e})") from e
    if header.get("version") != CACHE_VERSION:
        raise CacheError(
            f"{path}: cache version {header.get('version')} != {CACHE_VERSION}"
        )
    if hashlib.sha256(raw).hexdigest() != header["checksum"]:
        raise CacheError(f"{path}: checksum mismatch, file is corrupt")
    if vocab is not None and header["vocab_fingerprint"] != vocab.provider_fingerprint:
        raise CacheMismatchError(
            f"{path}: cache built under vocabulary {header['vocab_fingerprint'][:12]}, "
            f"requested {vocab.provider_fingerprint[:12]}"
        )
    if template is not None and header["template_fingerprint"] != template.fingerprint:
        raise CacheMismatchError(
            f"{path}: cache built under template {header['template_fingerprint'][:12]}, "
            f"requested {template.fingerprint[:12]}"
        )
    rows, cols = int(header["rows"]), int(header["cols"])
    values = np.frombuffer(raw, dtype="<f8")
    if values.size != rows * cols:
        raise CacheError(f"{path}: expected {rows * cols} values, found {values.size}")
    return LogitMatrix(
        values=values.reshape(rows, cols).astype(np.float64),
        sentence_index=tuple(header["sentences"]),
        vocab_fingerprint=header["vocab_fingerprint"],
        template_fingerprint=header["template_fingerprint"],
    )
