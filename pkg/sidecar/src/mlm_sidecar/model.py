"""Checkpoint wrapper: the model-facing half of the sidecar.

The hidden state returned for a mask position is the encoder's final hidden
vector, i.e. exactly the tensor the model's own MLM head consumes.  The
output-head endpoint applies that full head (including its internal transform
and layer norm) to any caller-supplied vector, so composing the two endpoints
reproduces the model's native mask prediction bit-for-bit; an integration
test asserts this.

BERT-family checkpoints (model_type == "bert") are supported; model access is
serialized with a lock so concurrent requests are safe.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import torch


class SidecarError(Exception):
    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


def invalid(message: str) -> SidecarError:
    return SidecarError("invalid_input", message, 400)


@dataclass(frozen=True)
class ServiceInfo:
    checkpoint: str
    hidden_size: int
    vocab_size: int
    max_tokens: int
    mask_id: int
    mask_surface: str

    def as_dict(self) -> dict:
        return {
            "checkpoint": self.checkpoint,
            "hidden_size": self.hidden_size,
            "vocab_size": self.vocab_size,
            "max_tokens": self.max_tokens,
            "mask_id": self.mask_id,
            "mask_surface": self.mask_surface,
        }


class ModelBundle:
    def __init__(self, checkpoint: str):
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        # eager attention: the SDPA kernels do not expose attention weights,
        # which the /attention endpoint needs
        self.model = AutoModelForMaskedLM.from_pretrained(checkpoint, attn_implementation="eager")
        self.model.eval()
        config = self.model.config
        if config.model_type != "bert":
            raise SidecarError(
                "unsupported_model",
                f"model_type {config.model_type!r} is not supported (BERT-family only)",
                500,
            )
        self._encoder = self.model.bert
        self._head = self.model.cls  # transform + decoder: the full MLM head
        self._lock = threading.Lock()
        self.info = ServiceInfo(
            checkpoint=checkpoint,
            hidden_size=int(config.hidden_size),
            vocab_size=int(config.vocab_size),
            max_tokens=int(config.max_position_embeddings) - 2,  # [CLS]/[SEP] overhead
            mask_id=int(self.tokenizer.mask_token_id),
            mask_surface=self.tokenizer.mask_token,
        )

    # -- request validation ---------------------------------------------------

    def _check_sequence(self, ids: list[int], mask_positions: list[int]) -> None:
        if not ids:
            raise invalid("ids must be non-empty")
        if len(ids) > self.info.max_tokens:
            raise SidecarError(
                "oversized_input",
                f"sequence of {len(ids)} tokens exceeds the limit of {self.info.max_tokens}",
                413,
            )
        if any(not 0 <= t < self.info.vocab_size for t in ids):
            raise invalid("token id out of vocabulary range")
        if not mask_positions:
            raise invalid("mask_positions must be non-empty")
        for pos in mask_positions:
            if not 0 <= pos < len(ids):
                raise invalid(f"mask position {pos} out of range")
            if ids[pos] != self.info.mask_id:
                raise invalid(f"position {pos} does not hold the mask token")

    # -- model calls ------------------------------------------------------------

    def tokenize(self, text: str) -> dict:
        if not text or not text.strip():
            raise invalid("cannot tokenize empty text")
        encoded = self.tokenizer(text, add_special_tokens=False)
        ids = list(encoded["input_ids"])
        surfaces = self.tokenizer.convert_ids_to_tokens(ids)
        return {
            "ids": ids,
            "surfaces": surfaces,
            "is_subword": [s.startswith("##") for s in surfaces],
        }

    def _forward(self, ids: list[int], need_attention: bool = False):
        input_ids = torch.tensor(
            [[self.tokenizer.cls_token_id, *ids, self.tokenizer.sep_token_id]], dtype=torch.long
        )
        with self._lock, torch.no_grad():
            out = self._encoder(input_ids=input_ids, output_attentions=need_attention)
        return out

    def hidden_states(self, ids: list[int], mask_positions: list[int]) -> dict:
        self._check_sequence(ids, mask_positions)
        hidden = self._forward(ids).last_hidden_state[0]
        return {"vectors": [hidden[pos + 1].tolist() for pos in mask_positions]}

    def output_head(self, vector: list[float], k: int = 50) -> dict:
        if len(vector) != self.info.hidden_size:
            raise SidecarError(
                "dimension_mismatch",
                f"expected vector of length {self.info.hidden_size}, got {len(vector)}",
                400,
            )
        if k < 1:
            raise invalid("k must be >= 1")
        v = torch.tensor(vector, dtype=self.model.dtype).view(1, 1, -1)
        with self._lock, torch.no_grad():
            logits = self._head(v)[0, 0]
        probs = torch.softmax(logits.double(), dim=-1).numpy()
        order = np.lexsort((np.arange(len(probs)), -probs))[: min(k, len(probs))]
        surfaces = self.tokenizer.convert_ids_to_tokens([int(i) for i in order])
        entries = [[int(i), s, float(probs[i])] for i, s in zip(order, surfaces)]
        return {"entries": entries, "full_sum": float(probs.sum())}

    def log_probs(self, ids: list[int], mask_positions: list[int], targets: list[int]) -> dict:
        self._check_sequence(ids, mask_positions)
        if len(targets) != len(mask_positions):
            raise invalid("targets and mask_positions must have equal length")
        if any(not 0 <= t < self.info.vocab_size for t in targets):
            raise invalid("target id out of vocabulary range")
        hidden = self._forward(ids).last_hidden_state
        with self._lock, torch.no_grad():
            logits = self._head(hidden)[0]
        log_probs = torch.log_softmax(logits.double(), dim=-1)
        values = [
            min(0.0, float(log_probs[pos + 1, target]))
            for pos, target in zip(mask_positions, targets)
        ]
        return {"log_probs": values}

    def attention(self, ids: list[int], mask_positions: list[int]) -> dict:
        self._check_sequence(ids, mask_positions)
        out = self._forward(ids, need_attention=True)
        last = out.attentions[-1][0]  # (heads, seq, seq)
        queries = [pos + 1 for pos in mask_positions]
        rows = last[:, queries, :].mean(dim=(0, 1))  # mean over heads and mask queries
        weights = rows[1 : len(ids) + 1]  # drop [CLS]/[SEP] columns
        return {"weights": [float(w) for w in weights]}

    def native_mask_distribution(self, ids: list[int], position: int) -> np.ndarray:
        """The model's own mask-filling distribution (for composition checks)."""
        self._check_sequence(ids, [position])
        hidden = self._forward(ids).last_hidden_state
        with self._lock, torch.no_grad():
            logits = self._head(hidden)[0, position + 1]
        return torch.softmax(logits.double(), dim=-1).numpy()
