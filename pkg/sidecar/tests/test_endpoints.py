from conftest import SPECIALS, WORDS


class TestInfoEndpoint:
    def test_info(self, api):
        resp = api.get("/info")
        assert resp.status_code == 200
        body = resp.json()
        assert body["hidden_size"] == 32
        assert body["vocab_size"] == len(SPECIALS) + len(WORDS)
        assert body["mask_surface"] == "[MASK]"


def masked_request(api, text="she put the book on the shelf", word="book"):
    tok = api.post("/tokenize", json={"text": text}).json()
    pos = tok["surfaces"].index(word)
    ids = list(tok["ids"])
    mask_id = api.get("/info").json()["mask_id"]
    ids[pos] = mask_id
    return ids, pos


class TestScalarEndpoints:
    def test_tokenize(self, api):
        resp = api.post("/tokenize", json={"text": "the closed book"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["surfaces"] == ["the", "closed", "book"]
        assert body["is_subword"] == [False, False, False]

    def test_tokenize_empty_is_structured_error(self, api):
        resp = api.post("/tokenize", json={"text": " "})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "invalid_input"

    def test_hidden_states_deterministic_bytes(self, api):
        ids, pos = masked_request(api)
        payload = {"ids": ids, "mask_positions": [pos]}
        first = api.post("/hidden_states", json=payload)
        second = api.post("/hidden_states", json=payload)
        assert first.status_code == 200
        assert first.content == second.content

    def test_output_head(self, api):
        ids, pos = masked_request(api)
        vec = api.post("/hidden_states", json={"ids": ids, "mask_positions": [pos]}).json()[
            "vectors"
        ][0]
        resp = api.post("/output_head", json={"vector": vec, "k": 7})
        body = resp.json()
        assert len(body["entries"]) == 7
        assert abs(body["full_sum"] - 1.0) <= 1e-4

    def test_log_probs_nonpositive(self, api):
        ids, pos = masked_request(api)
        resp = api.post(
            "/log_probs", json={"ids": ids, "mask_positions": [pos], "targets": [9]}
        )
        assert resp.status_code == 200
        assert resp.json()["log_probs"][0] <= 0.0

    def test_attention_nonnegative(self, api):
        ids, pos = masked_request(api)
        resp = api.post("/attention", json={"ids": ids, "mask_positions": [pos]})
        weights = resp.json()["weights"]
        assert len(weights) == len(ids)
        assert all(w >= 0.0 for w in weights)

    def test_oversized_input_413(self, api):
        mask_id = api.get("/info").json()["mask_id"]
        ids = [mask_id] * 63
        resp = api.post("/hidden_states", json={"ids": ids, "mask_positions": [0]})
        assert resp.status_code == 413
        assert resp.json()["error"]["code"] == "oversized_input"

    def test_non_mask_position_400(self, api):
        ids, pos = masked_request(api)
        resp = api.post("/hidden_states", json={"ids": ids, "mask_positions": [pos - 1]})
        assert resp.status_code == 400


class TestBatchEndpoints:
    def test_batch_hidden_states_maps_scalar(self, api):
        ids1, p1 = masked_request(api)
        ids2, p2 = masked_request(api, "the library was quiet and old", "library")
        reqs = [
            {"ids": ids1, "mask_positions": [p1]},
            {"ids": ids2, "mask_positions": [p2]},
        ]
        batch = api.post("/batch/hidden_states", json={"requests": reqs}).json()["responses"]
        singles = [api.post("/hidden_states", json=r).json() for r in reqs]
        assert batch == singles

    def test_batch_log_probs_maps_scalar(self, api):
        ids, pos = masked_request(api)
        reqs = [
            {"ids": ids, "mask_positions": [pos], "targets": [7]},
            {"ids": ids, "mask_positions": [pos], "targets": [9]},
        ]
        batch = api.post("/batch/log_probs", json={"requests": reqs}).json()["responses"]
        singles = [api.post("/log_probs", json=r).json() for r in reqs]
        assert batch == singles
