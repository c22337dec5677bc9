"""Backend contract checks, shared by the mock test suite and the sidecar
integration profile.

``run_contract_checks(backend, text)`` asserts every behavioural guarantee
the pipeline relies on: shapes, softmax normalization, ordering and tie
rules, determinism, and the consistency of /hidden_states -> /output_head
composition with the masked-token log-probabilities.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

from ..errors import DimensionMismatch, InvalidInput
from .base import MaskedLanguageBackend, masked_span_seq


@contextmanager
def _expect(exc_type):
    try:
        yield
    except exc_type:
        return
    raise AssertionError(f"expected {exc_type.__name__} to be raised")


def run_contract_checks(backend: MaskedLanguageBackend, text: str, span: tuple[int, int]) -> None:
    """Assert the full backend contract using ``text`` with an MWE-like ``span``."""
    assert backend.hidden_size >= 1
    assert backend.vocab_size >= 2

    # tokenize: parallel fields, empty input rejected
    tokens = backend.tokenize(text)
    assert len(tokens) >= 1
    assert len(tokens.ids) == len(tokens.surfaces) == len(tokens.is_subword)
    with _expect(InvalidInput):
        backend.tokenize("")
    with _expect(InvalidInput):
        backend.tokenize("   ")

    # hidden states: one vector per mask, in order, byte-stable
    seq1, _ = masked_span_seq(backend, text, span, 1)
    vecs = backend.mask_hidden_states(seq1)
    assert len(vecs) == 1
    assert vecs[0].shape == (backend.hidden_size,)
    assert np.all(np.isfinite(vecs[0]))
    again = backend.mask_hidden_states(seq1)
    assert vecs[0].tobytes() == again[0].tobytes(), "hidden states must be deterministic"

    seq2, _ = masked_span_seq(backend, text, span, 2)
    vecs2 = backend.mask_hidden_states(seq2)
    assert len(vecs2) == 2

    # output head: top-k ordering, probabilities, normalization
    dist = backend.apply_output_head(vecs[0], k=10)
    assert len(dist.entries) == min(10, backend.vocab_size)
    probs = [p for _, _, p in dist.entries]
    assert all(0.0 < p <= 1.0 for p in probs)
    for (i1, _, p1), (i2, _, p2) in zip(dist.entries, dist.entries[1:]):
        assert p1 > p2 or (p1 == p2 and i1 < i2), "entries must descend with id tie-break"
    assert abs(dist.full_sum - 1.0) <= 1e-4
    with _expect(DimensionMismatch):
        backend.apply_output_head(np.zeros(backend.hidden_size + 1))

    # head accepts caller-averaged vectors (the cross-sentence averaging is client-side)
    avg = (vecs[0] + vecs2[0]) / 2.0
    dist_avg = backend.apply_output_head(avg, k=5)
    assert len(dist_avg.entries) == min(5, backend.vocab_size)

    # log-probs: <= 0, position order, consistent with head composition
    mask_pos = seq1.mask_positions(backend.mask_id)
    top = dist.entries[: min(3, len(dist.entries))]
    lps = backend.token_log_probs(seq1, [mask_pos[0]] * len(top), [i for i, _, _ in top])
    assert len(lps) == len(top)
    assert all(lp <= 0.0 for lp in lps)
    for (_, _, p_head), lp in zip(top, lps):
        assert abs(math.exp(lp) - p_head) <= 1e-4, "head(hidden) must match native mask prediction"

    both = seq2.mask_positions(backend.mask_id)
    lp2 = backend.token_log_probs(seq2, list(both), [top[0][0]] * 2)
    assert len(lp2) == 2

    # attention: one non-negative weight per position
    att = backend.attention_to_masks(seq2)
    assert att.shape == (len(seq2),)
    assert np.all(att >= 0.0)
    assert np.all(np.isfinite(att))
    att_again = backend.attention_to_masks(seq2)
    assert att.tobytes() == att_again.tobytes()
