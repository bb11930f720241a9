"""Logit providers and the restricted candidate vocabulary.

A provider answers two questions: which tokens exist (filtered by a
word-boundary marker such as "Ġ"), and what next-token logit each candidate
token gets immediately after a prompt. Real models sit behind the HTTP wire
protocol; the synthetic provider is a deterministic stand-in whose planted
structure makes correctness checkable.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
import requests
from scipy.special import ndtri

ENDPOINT_ENV_VAR = "LABELFORGE_ENDPOINT"
DEFAULT_BOUNDARY_MARKER = "Ġ"  # "Ġ"

# How far from the prompt end the query sentence may start; covers the label
# cue and any trailing template text after the sentence.
_QUERY_TAIL_SLACK = 256

_EMBED_DIM = 64


class ProviderError(RuntimeError):
    """Transport failures, unknown tokens, or invalid backend responses."""


@dataclass(frozen=True)
class TokenEntry:
    token_id: int
    text: str

    def __post_init__(self):
        if self.token_id < 0:
            raise ValueError(f"token_id must be >= 0, got {self.token_id}")
        if not self.text:
            raise ValueError("token text is empty")


@dataclass(frozen=True)
class ProviderCapabilities:
    model_id: str
    max_concurrency: int = 1
    deterministic: bool = False

    def __post_init__(self):
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")


@dataclass(frozen=True)
class CandidateVocabulary:
    """The restricted token set label search runs over."""

    tokens: tuple[TokenEntry, ...]
    boundary_marker: str = DEFAULT_BOUNDARY_MARKER
    provider_fingerprint: str = ""

    def __post_init__(self):
        texts = [t.text for t in self.tokens]
        if len(set(texts)) != len(texts):
            raise ValueError("duplicate token texts in vocabulary")
        ids = [t.token_id for t in self.tokens]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate token ids in vocabulary")
        bad = [t.text for t in self.tokens if not t.text.startswith(self.boundary_marker)]
        if bad:
            raise ValueError(f"tokens missing boundary marker: {bad[:5]}")

    def __len__(self) -> int:
        return len(self.tokens)

    def label_text(self, index: int) -> str:
        """Surface form with the boundary marker stripped, for use in demo text."""
        return self.tokens[index].text[len(self.boundary_marker):]

    def index_of_token_id(self, token_id: int) -> int:
        try:
            return self._id_index()[token_id]
        except KeyError:
            raise ProviderError(f"token id {token_id} not in vocabulary") from None

    def _id_index(self) -> dict[int, int]:
        # object.__setattr__ because the dataclass is frozen; pure cache.
        cached = getattr(self, "_id_index_cache", None)
        if cached is None:
            cached = {t.token_id: i for i, t in enumerate(self.tokens)}
            object.__setattr__(self, "_id_index_cache", cached)
        return cached


def vocabulary_fingerprint(model_id: str, marker: str, tokens) -> str:
    payload = json.dumps(
        {"model_id": model_id, "marker": marker, "tokens": [[t.token_id, t.text] for t in tokens]},
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def fetch_vocabulary(provider, boundary_marker: str = DEFAULT_BOUNDARY_MARKER) -> CandidateVocabulary:
    """All and only the provider's tokens starting with boundary_marker,
    in stable token-id order, with a content fingerprint."""
    if not boundary_marker:
        raise ValueError("boundary marker must be non-empty")
    tokens = sorted(provider.vocab(boundary_marker), key=lambda t: t.token_id)
    if not tokens:
        raise ProviderError(f"no tokens start with marker {boundary_marker!r}")
    bad = [t for t in tokens if not t.text.startswith(boundary_marker)]
    if bad:
        raise ProviderError(f"provider returned tokens without the marker: {bad[:5]}")
    fp = vocabulary_fingerprint(provider.capabilities().model_id, boundary_marker, tokens)
    return CandidateVocabulary(
        tokens=tuple(tokens), boundary_marker=boundary_marker, provider_fingerprint=fp
    )


def score_label_position(provider, prompt: str, candidates) -> np.ndarray:
    """Next-token logits for each candidate immediately after the prompt.

    Returns a float64 vector aligned with candidates. Non-finite logits are
    hard errors: clamping them would silently corrupt the search objective.
    """
    if not prompt:
        raise ValueError("prompt must be non-empty")
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidates must be non-empty")
    logits = np.asarray(provider.score(prompt, candidates), dtype=np.float64)
    if logits.shape != (len(candidates),):
        raise ProviderError(
            f"provider returned {logits.shape} logits for {len(candidates)} candidates"
        )
    finite = np.isfinite(logits)
    if not finite.all():
        i = int(np.argmin(finite))
        raise ProviderError(
            f"non-finite logit {logits[i]} for candidate {candidates[i].text!r} (index {i})"
        )
    return logits


@dataclass(frozen=True)
class SyntheticConfig:
    """Planted-structure scoring model: class c's gold token is exactly
    aligned with class c's embedding, everything else is random."""

    num_classes: int
    vocab_size: int
    planted_gold: tuple[int, ...]
    signal_strength: float = 1.0
    noise_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if len(self.planted_gold) != self.num_classes:
            raise ValueError("planted_gold must have one token index per class")
        if len(set(self.planted_gold)) != len(self.planted_gold):
            raise ValueError("planted_gold entries must be distinct")
        if not all(0 <= g < self.vocab_size for g in self.planted_gold):
            raise ValueError("planted_gold entries must lie in [0, vocab_size)")
        if self.signal_strength <= 0:
            raise ValueError("signal_strength must be > 0")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")


class SyntheticProvider:
    """Deterministic logit backend driven by a SyntheticConfig.

    The logit of token t for a prompt ending in sentence x is
    signal_strength * dot(e_class(x), u_t) plus seeded noise that is a pure
    function of (x, t, seed), so repeated and concurrent scoring is
    order-independent and bitwise reproducible. The query sentence must be
    registered in class_of and must end within a few hundred characters of
    the prompt end (it is located as the last registered sentence occurring
    in the prompt).
    """

    def __init__(self, cfg: SyntheticConfig, class_of: dict[str, int]):
        bad = {t: c for t, c in class_of.items() if not 1 <= c <= cfg.num_classes}
        if bad:
            raise ValueError(f"class_of has out-of-range classes: {list(bad.items())[:3]}")
        self.cfg = cfg
        self._class_of = dict(class_of)
        rng = np.random.default_rng(cfg.seed)
        e = rng.standard_normal((cfg.num_classes, _EMBED_DIM))
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        u = rng.standard_normal((cfg.vocab_size, _EMBED_DIM))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        for c, g in enumerate(cfg.planted_gold):
            u[g] = e[c]
        self.class_embeddings = e
        self.token_embeddings = u
        self._base = cfg.signal_strength * (e @ u.T)  # (C, V)
        self._max_sentence_len = max((len(t) for t in class_of), default=0)
        self._tail_cache: dict[str, str] = {}
        digest = hashlib.sha256(
            json.dumps(
                [cfg.num_classes, cfg.vocab_size, list(cfg.planted_gold),
                 cfg.signal_strength, cfg.noise_scale, cfg.seed],
                sort_keys=True,
            ).encode()
        ).hexdigest()[:12]
        self._model_id = f"synthetic-c{cfg.num_classes}v{cfg.vocab_size}-{digest}"

    def capabilities(self) -> ProviderCapabilities:
        return ProviderCapabilities(
            model_id=self._model_id, max_concurrency=4, deterministic=True
        )

    def vocab(self, prefix: str) -> list[TokenEntry]:
        return [TokenEntry(i, f"{prefix}tok{i}") for i in range(self.cfg.vocab_size)]

    def score(self, prompt: str, candidates) -> np.ndarray:
        sentence = self._resolve_query(prompt)
        c = self._class_of[sentence]
        ids = []
        for t in candidates:
            if not 0 <= t.token_id < self.cfg.vocab_size:
                raise ProviderError(f"unknown token id {t.token_id}")
            ids.append(t.token_id)
        logits = self._base[c - 1, ids].copy()
        if self.cfg.noise_scale > 0:
            logits += self.cfg.noise_scale * np.array(
                [_hash_normal(self.cfg.seed, sentence, i) for i in ids]
            )
        return logits

    def _resolve_query(self, prompt: str) -> str:
        tail = prompt[-(self._max_sentence_len + _QUERY_TAIL_SLACK):]
        hit = self._tail_cache.get(tail)
        if hit is not None:
            return hit
        best_end, best = -1, None
        for text in self._class_of:
            pos = tail.rfind(text)
            if pos < 0:
                continue
            end = pos + len(text)
            if end > best_end or (end == best_end and len(text) > len(best)):
                best_end, best = end, text
        if best is None:
            raise ProviderError(
                "no registered sentence found near the prompt end; "
                "was the query passed to make_synthetic_provider?"
            )
        self._tail_cache[tail] = best
        return best


def _hash_normal(seed: int, sentence: str, token_id: int) -> float:
    """Standard-normal draw that is a pure function of its arguments."""
    h = hashlib.sha256(f"{seed}|{token_id}|{sentence}".encode("utf-8")).digest()
    v = int.from_bytes(h[:8], "big")
    u = ((v >> 11) + 0.5) * 2.0**-53  # strictly inside (0, 1)
    return float(ndtri(u))


def make_synthetic_provider(cfg: SyntheticConfig, class_of: dict[str, int]) -> SyntheticProvider:
    return SyntheticProvider(cfg, class_of)


class HttpProvider:
    """Client for the sidecar wire protocol (GET /v1/info, GET /v1/vocab,
    POST /v1/score). The base URL comes from the argument or the
    LABELFORGE_ENDPOINT environment variable."""

    def __init__(self, base_url: str | None = None, timeout: float = 120.0,
                 max_concurrency: int = 1, deterministic: bool = False):
        base_url = base_url or os.environ.get(ENDPOINT_ENV_VAR)
        if not base_url:
            raise ProviderError(
                f"no endpoint: pass base_url or set {ENDPOINT_ENV_VAR}"
            )
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._max_concurrency = max_concurrency
        self._deterministic = deterministic
        self._session = requests.Session()
        self._info: dict | None = None

    def _get(self, path: str, **kwargs) -> dict:
        try:
            resp = self._session.get(self.base_url + path, timeout=self.timeout, **kwargs)
            resp.raise_for_status()
            return resp.json()
        except requests.RequestException as e:
            raise ProviderError(f"GET {path} failed: {e}") from e

    def info(self) -> dict:
        if self._info is None:
            self._info = self._get("/v1/info")
        return self._info

    def capabilities(self) -> ProviderCapabilities:
        return ProviderCapabilities(
            model_id=str(self.info()["model_id"]),
            max_concurrency=self._max_concurrency,
            deterministic=self._deterministic,
        )

    def vocab(self, prefix: str) -> list[TokenEntry]:
        payload = self._get("/v1/vocab", params={"prefix": prefix})
        return [TokenEntry(int(t["id"]), str(t["text"])) for t in payload["tokens"]]

    def score(self, prompt: str, candidates) -> np.ndarray:
        body = {"prompt": prompt, "candidates": [t.text for t in candidates]}
        try:
            resp = self._session.post(
                self.base_url + "/v1/score", json=body, timeout=self.timeout
            )
        except requests.RequestException as e:
            raise ProviderError(f"POST /v1/score failed: {e}") from e
        if resp.status_code == 400:
            detail = resp.json()
            raise ProviderError(
                f"unknown token at index {detail.get('index')}: {detail.get('error')}"
            )
        try:
            resp.raise_for_status()
        except requests.RequestException as e:
            raise ProviderError(f"POST /v1/score failed: {e}") from e
        logits = resp.json()["logits"]
        if len(logits) != len(candidates):
            raise ProviderError(
                f"backend returned {len(logits)} logits for {len(candidates)} candidates"
            )
        return np.asarray(logits, dtype=np.float64)
