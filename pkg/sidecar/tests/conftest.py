import pytest
import torch
from fastapi.testclient import TestClient
from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

from labelforge_sidecar import SidecarConfig, create_app

WORDS = ["alpha", "beta", "gamma", "delta", "omega", "happy", "angry", "fear"]


def build_tokenizer():
    """Tiny byte-level BPE trained on a repetitive corpus so the test words
    merge into single word-initial tokens."""
    corpus = [f"the {a} and the {b} sentence" for a in WORDS for b in WORDS] * 4
    tok = Tokenizer(models.BPE(unk_token=None))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=500,
        special_tokens=["<pad>"],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train_from_iterator(corpus, trainer)
    return PreTrainedTokenizerFast(tokenizer_object=tok, pad_token="<pad>")


def build_model(vocab_size):
    torch.manual_seed(0)
    config = GPT2Config(
        vocab_size=vocab_size,
        n_positions=256,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=None,
        eos_token_id=None,
    )
    model = GPT2LMHeadModel(config)
    model.eval()
    return model


@pytest.fixture(scope="session")
def tokenizer():
    return build_tokenizer()


@pytest.fixture(scope="session")
def model(tokenizer):
    return build_model(len(tokenizer.get_vocab()))


@pytest.fixture(scope="session")
def sidecar_config():
    return SidecarConfig(model_id="tiny-random-gpt2", max_prompt_length=200)


@pytest.fixture(scope="session")
def app(model, tokenizer, sidecar_config):
    return create_app(model, tokenizer, sidecar_config)


@pytest.fixture()
def client(app):
    return TestClient(app)
