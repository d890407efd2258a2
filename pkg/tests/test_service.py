import pytest
from fastapi.testclient import TestClient

from biasmeter.service import create_app


@pytest.fixture()
def client(tiny_scorer):
    return TestClient(create_app(tiny_scorer, meta={"stage": "test"}))


def _req(**kw):
    base = {
        "id": "q1",
        "tokens": ["she", "is", "a", "doctor"],
        "masked_positions": [0],
        "targets": {"0": "he"},
        "want_attention": True,
        "protocol": "PROBE",
    }
    base.update(kw)
    return base


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_model_info(client, tiny_scorer):
    info = client.get("/model").json()
    assert info["backend"] == tiny_scorer.backend_id
    assert info["vocab_size"] == len(tiny_scorer.vocab_words())
    assert info["meta"] == {"stage": "test"}


def test_protocols_listed(client):
    assert "AULA" in client.get("/protocols").json()["protocols"]


def test_score_matches_direct_backend(client, tiny_scorer):
    resp = client.post("/score", json=_req())
    assert resp.status_code == 200
    body = resp.json()
    from biasmeter.scoring import ScoreRequest
    direct = tiny_scorer.score(ScoreRequest(
        id="q1", tokens=("she", "is", "a", "doctor"),
        masked_positions=(0,), targets={0: "he"}, want_attention=True))
    assert body["logprobs"]["0"] == pytest.approx(direct.logprobs[0])
    assert body["attention"] == pytest.approx(list(direct.attention))
    assert body["backend"] == tiny_scorer.backend_id
    assert sum(body["attention"]) == pytest.approx(1.0, abs=1e-6)


def test_batch_scoring(client):
    resp = client.post("/score/batch", json=[_req(), _req(id="q2")])
    assert resp.status_code == 200
    ids = [r["id"] for r in resp.json()]
    assert ids == ["q1", "q2"]


def test_malformed_body_is_422(client):
    assert client.post("/score", json={"id": "x"}).status_code == 422
    assert client.post("/score", json=_req(tokens=[])).status_code == 422


def test_out_of_range_position_is_422(client):
    resp = client.post("/score", json=_req(masked_positions=[99]))
    assert resp.status_code == 422
    assert "out of range" in resp.json()["detail"]


def test_unknown_protocol_is_422(client):
    assert client.post("/score", json=_req(protocol="XXX")).status_code == 422


def test_oov_target_is_400(client):
    resp = client.post("/score", json=_req(targets={"0": "zebra"}))
    assert resp.status_code == 400
    assert "zebra" in resp.json()["detail"]
