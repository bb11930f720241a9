"""The deterministic synthetic scoring backend and its planted structure.

Run with: python3 demos/02_synthetic_scoring.py
"""

import numpy as np

from labelforge import (
    LabeledSentence,
    SyntheticConfig,
    fetch_vocabulary,
    make_synthetic_provider,
    score_label_position,
)

sentences = [LabeledSentence(f"demo text {i:03d}", 1 + i % 3) for i in range(30)]
class_of = {s.text: s.class_id for s in sentences}

# Token 4 is planted as class 1's name, token 11 as class 2's, 17 as class 3's.
cfg = SyntheticConfig(
    num_classes=3, vocab_size=20, planted_gold=(4, 11, 17),
    signal_strength=1.0, noise_scale=0.0, seed=42,
)
provider = make_synthetic_provider(cfg, class_of)

# The candidate vocabulary is everything starting with the boundary marker.
vocab = fetch_vocabulary(provider, "Ġ")
print(f"vocabulary: {len(vocab)} tokens, fingerprint {vocab.provider_fingerprint[:12]}")
print("first tokens:", [t.text for t in vocab.tokens[:4]])

# With zero noise the planted token always wins the label position.
for s in sentences[:3]:
    logits = score_label_position(provider, f"Sentence: {s.text}\nCategory:", list(vocab.tokens))
    print(f"class {s.class_id}: argmax token = {int(np.argmax(logits))} "
          f"(planted {cfg.planted_gold[s.class_id - 1]})")

# With noise, scoring stays a pure function of (sentence, token, seed):
# the same request gives bitwise-identical logits on every call.
noisy = make_synthetic_provider(
    SyntheticConfig(num_classes=3, vocab_size=20, planted_gold=(4, 11, 17),
                    signal_strength=1.0, noise_scale=0.8, seed=42),
    class_of,
)
prompt = "Sentence: demo text 000\nCategory:"
a = score_label_position(noisy, prompt, list(vocab.tokens))
b = score_label_position(noisy, prompt, list(vocab.tokens))
print("\nnoisy logits replay bitwise-identically:", a.tobytes() == b.tobytes())
print("sample logits:", np.round(a[:5], 4))
