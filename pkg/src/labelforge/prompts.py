"""Prompt templates for demonstrations and the scored query."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass


@dataclass(frozen=True)
class PromptTemplate:
    """Patterns for one demonstration block and the trailing query block.

    query_pattern must end at the label cue with no trailing space: the
    scored label tokens carry the word-boundary marker, which supplies the
    space. A trailing space here would double it and shift every logit.
    """

    demo_pattern: str = "Sentence: {text}\nCategory: {label}"
    query_pattern: str = "Sentence: {text}\nCategory:"
    separator: str = "\n\n"

    def __post_init__(self):
        if self.demo_pattern.count("{text}") != 1 or self.demo_pattern.count("{label}") != 1:
            raise ValueError("demo_pattern needs {text} and {label} exactly once")
        if self.query_pattern.count("{text}") != 1:
            raise ValueError("query_pattern needs {text} exactly once")
        if "{label}" in self.query_pattern:
            raise ValueError("query_pattern must not contain {label}")
        if self.query_pattern != self.query_pattern.rstrip(" \t"):
            raise ValueError("query_pattern must not end with whitespace")

    @property
    def fingerprint(self) -> str:
        payload = json.dumps([self.demo_pattern, self.query_pattern, self.separator])
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def render_demo(self, text: str, label: str) -> str:
        # Substitute the label first so sentence text containing a literal
        # "{label}" cannot be rewritten.
        return self.demo_pattern.replace("{label}", label).replace("{text}", text)

    def render_query(self, text: str) -> str:
        return self.query_pattern.replace("{text}", text)


DEFAULT_TEMPLATE = PromptTemplate()
