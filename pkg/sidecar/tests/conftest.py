import threading
import time

import pytest

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
WORDS = [
    "the", "a", "an", "closed", "book", "books", "shelf", "library", "desk",
    "lamp", "cover", "read", "reading", "mystery", "secret", "secrets",
    "past", "his", "her", "she", "he", "put", "placed", "on", "of", "to",
    "was", "is", "remains", "everyone", "nobody", "old", "dusty", "wooden",
    "corner", "it", "and", "in", "that", "this", "window", "light", "room",
    "paper", "quiet", "found", "left", "back", "still", "one", "two",
    "un", "##happiness", "##s", "##ing", "##ed", ".", ",", ";", "'",
]


@pytest.fixture(scope="session")
def checkpoint_path(tmp_path_factory) -> str:
    """A tiny randomly-initialized BERT checkpoint saved to disk: real
    WordPiece tokenizer, real attention, real MLM head."""
    import torch
    from transformers import BertConfig, BertForMaskedLM, BertTokenizer

    path = tmp_path_factory.mktemp("tiny-bert")
    vocab = SPECIALS + WORDS
    (path / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(path / "vocab.txt"), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(1234)
    model = BertForMaskedLM(config)
    model.eval()
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def bundle(checkpoint_path):
    from mlm_sidecar.model import ModelBundle

    return ModelBundle(checkpoint_path)


@pytest.fixture(scope="session")
def api(bundle):
    from fastapi.testclient import TestClient

    from mlm_sidecar.service import create_app

    return TestClient(create_app(bundle))


@pytest.fixture(scope="session")
def live_url(bundle):
    """The service on a real socket, for wire-level conformance tests."""
    import uvicorn

    from mlm_sidecar.service import create_app

    config = uvicorn.Config(create_app(bundle), host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 30
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("sidecar server did not start")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)
