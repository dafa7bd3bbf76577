import hashlib
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from model_adapter.app import create_app
from model_adapter.config import AdapterConfig

GOLDEN = Path(__file__).resolve().parent.parent / "golden"


@pytest.fixture()
def client():
    config = AdapterConfig(
        mode="fixture",
        lexicon_path=str(GOLDEN / "lexicon.tsv"),
        translations_path=str(GOLDEN / "translations.jsonl"),
    )
    return TestClient(create_app(config))


def post_raw(client, endpoint, body: bytes):
    return client.post(
        endpoint, content=body, headers={"Content-Type": "application/json"}
    )


GOLDEN_CASES = [
    ("/unmask", "unmask_basic"),
    ("/unmask", "unmask_truncate"),
    ("/unmask", "unmask_no_padding"),
    ("/translate", "translate_single"),
    ("/translate", "translate_batch"),
]


class TestGoldenConformance:
    @pytest.mark.parametrize("endpoint,name", GOLDEN_CASES)
    def test_byte_exact(self, client, endpoint, name):
        request_bytes = (GOLDEN / f"{name}.request.json").read_bytes()
        expected = (GOLDEN / f"{name}.response.json").read_bytes()
        response = post_raw(client, endpoint, request_bytes)
        assert response.status_code == 200
        assert response.content == expected

    @pytest.mark.parametrize("endpoint,name", GOLDEN_CASES)
    def test_repeat_requests_hash_identically(self, client, endpoint, name):
        request_bytes = (GOLDEN / f"{name}.request.json").read_bytes()
        digests = {
            hashlib.sha256(post_raw(client, endpoint, request_bytes).content).hexdigest()
            for _ in range(3)
        }
        assert len(digests) == 1


class TestUnmaskValidation:
    def test_mask_index_out_of_range(self, client):
        response = client.post(
            "/unmask", json={"tokens": ["a", "b"], "mask_index": 5, "n": 3}
        )
        assert response.status_code == 400

    def test_negative_mask_index(self, client):
        response = client.post(
            "/unmask", json={"tokens": ["a"], "mask_index": -1, "n": 3}
        )
        assert response.status_code == 400

    def test_missing_field(self, client):
        response = client.post("/unmask", json={"tokens": ["a"]})
        assert response.status_code == 400

    def test_non_json_body(self, client):
        response = post_raw(client, "/unmask", b"this is not json")
        assert response.status_code == 400

    def test_n_below_one(self, client):
        response = client.post(
            "/unmask", json={"tokens": ["a"], "mask_index": 0, "n": 0}
        )
        assert response.status_code == 400

    def test_unknown_token_yields_empty_candidates(self, client):
        response = client.post(
            "/unmask", json={"tokens": ["zzz"], "mask_index": 0, "n": 3}
        )
        assert response.status_code == 200
        assert response.json() == {"candidates": []}

    def test_scores_non_increasing_and_single_tokens(self, client):
        response = client.post(
            "/unmask", json={"tokens": ["John"], "mask_index": 0, "n": 4}
        )
        body = response.json()
        scores = [c["score"] for c in body["candidates"]]
        assert scores == sorted(scores, reverse=True)
        assert all(" " not in c["token"] for c in body["candidates"])
        assert len(body["candidates"]) <= 4


class TestTranslateValidation:
    def test_empty_texts(self, client):
        response = client.post("/translate", json={"texts": []})
        assert response.status_code == 400

    def test_unknown_source(self, client):
        response = client.post("/translate", json={"texts": ["never seen"]})
        assert response.status_code == 400

    def test_results_in_order(self, client):
        response = client.post(
            "/translate",
            json={"texts": ["good morning", "John 's wife is a journalist ."]},
        )
        body = response.json()
        assert len(body["results"]) == 2
        assert body["results"][0]["translation"] == "guten Morgen"

    def test_logprobs_omitted_when_absent(self, client):
        response = client.post(
            "/translate", json={"texts": ["John 's wife is a journalist ."]}
        )
        assert "logprobs" not in response.json()["results"][0]


class TestModelModeUnavailable:
    def test_endpoints_answer_503_without_models(self):
        config = AdapterConfig(mode="model")  # no model names configured
        client = TestClient(create_app(config))
        response = client.post(
            "/unmask", json={"tokens": ["a"], "mask_index": 0, "n": 1}
        )
        assert response.status_code == 503
        response = client.post("/translate", json={"texts": ["a"]})
        assert response.status_code == 503

    def test_health_reports_readiness(self):
        config = AdapterConfig(mode="model")
        client = TestClient(create_app(config))
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["mode"] == "model"
        assert body["unmask_ready"] is False
        assert body["translate_ready"] is False


class TestHealthFixtureMode:
    def test_ready_with_fixtures(self, client):
        body = client.get("/health").json()
        assert body == {
            "status": "ok",
            "mode": "fixture",
            "unmask_ready": True,
            "translate_ready": True,
        }


class TestConfig:
    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            AdapterConfig(mode="imaginary")

    def test_prompt_template_needs_placeholder(self):
        with pytest.raises(ValueError):
            AdapterConfig(prompt_template="translate stuff")

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("MODEL_ADAPTER_MODE", "fixture")
        monkeypatch.setenv("MODEL_ADAPTER_LEXICON", "/some/lexicon.tsv")
        monkeypatch.setenv(
            "MODEL_ADAPTER_PROMPT_TEMPLATE",
            "Translate this into German: <English_input>.",
        )
        config = AdapterConfig.from_env()
        assert config.mode == "fixture"
        assert config.lexicon_path == "/some/lexicon.tsv"
        assert "<English_input>" in config.prompt_template
