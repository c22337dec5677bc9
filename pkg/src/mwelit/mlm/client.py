"""HTTP client for the inference sidecar.

Wire protocol (JSON over HTTP): POST /tokenize, /hidden_states, /output_head,
/log_probs, /attention and GET /info.  Requests carry token id lists and mask
position lists; vectors travel as JSON arrays of numbers.  Calls are
serialized on one pooled connection, so a single client instance is safe to
share between pipeline workers.
"""

from __future__ import annotations

import threading
from typing import Sequence

import numpy as np
import requests

from ..errors import BackendError, DimensionMismatch, InvalidInput
from .base import MaskedLanguageBackend, TokenSeq, TopKDistribution

_ERROR_TYPES = {
    "invalid_input": InvalidInput,
    "dimension_mismatch": DimensionMismatch,
}


class SidecarClient(MaskedLanguageBackend):
    def __init__(self, base_url: str, timeout: float = 120.0):
        self._base = base_url.rstrip("/")
        self._timeout = timeout
        self._session = requests.Session()
        self._lock = threading.Lock()
        info = self._request("GET", "/info")
        self.checkpoint = info["checkpoint"]
        self.hidden_size = int(info["hidden_size"])
        self.vocab_size = int(info["vocab_size"])
        self.max_tokens = int(info["max_tokens"])
        self.mask_id = int(info["mask_id"])
        self.mask_surface = info["mask_surface"]

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        with self._lock:
            try:
                resp = self._session.request(
                    method, self._base + path, json=payload, timeout=self._timeout
                )
            except requests.RequestException as exc:
                raise BackendError(f"sidecar request {path} failed: {exc}") from exc
        if resp.status_code != 200:
            try:
                err = resp.json()["error"]
                exc_type = _ERROR_TYPES.get(err.get("code"), BackendError)
                raise exc_type(f"sidecar {path}: {err.get('message', resp.text)}")
            except (ValueError, KeyError):
                raise BackendError(f"sidecar {path}: HTTP {resp.status_code}: {resp.text[:200]}")
        return resp.json()

    def tokenize(self, text: str) -> TokenSeq:
        if not text or not text.strip():
            raise InvalidInput("cannot tokenize empty text")
        obj = self._request("POST", "/tokenize", {"text": text})
        return TokenSeq(tuple(obj["ids"]), tuple(obj["surfaces"]), tuple(obj["is_subword"]))

    def mask_hidden_states(self, tokens: TokenSeq) -> list[np.ndarray]:
        positions = tokens.mask_positions(self.mask_id)
        if not positions:
            raise InvalidInput("sequence contains no mask token")
        obj = self._request(
            "POST", "/hidden_states", {"ids": list(tokens.ids), "mask_positions": list(positions)}
        )
        return [np.asarray(v, dtype=np.float64) for v in obj["vectors"]]

    def apply_output_head(self, vector: np.ndarray, k: int = 50) -> TopKDistribution:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.hidden_size,):
            raise DimensionMismatch(
                f"expected vector of length {self.hidden_size}, got shape {vector.shape}"
            )
        obj = self._request("POST", "/output_head", {"vector": vector.tolist(), "k": k})
        entries = tuple((int(i), s, float(p)) for i, s, p in obj["entries"])
        return TopKDistribution(entries=entries, k=k, full_sum=float(obj["full_sum"]))

    def token_log_probs(
        self, tokens: TokenSeq, mask_positions: Sequence[int], targets: Sequence[int]
    ) -> list[float]:
        if len(mask_positions) != len(targets):
            raise InvalidInput("mask_positions and targets must have equal length")
        obj = self._request(
            "POST",
            "/log_probs",
            {
                "ids": list(tokens.ids),
                "mask_positions": list(mask_positions),
                "targets": list(targets),
            },
        )
        return [float(x) for x in obj["log_probs"]]

    def attention_to_masks(self, tokens: TokenSeq) -> np.ndarray:
        positions = tokens.mask_positions(self.mask_id)
        if not positions:
            raise InvalidInput("sequence contains no mask token")
        obj = self._request(
            "POST", "/attention", {"ids": list(tokens.ids), "mask_positions": list(positions)}
        )
        return np.asarray(obj["weights"], dtype=np.float64)
