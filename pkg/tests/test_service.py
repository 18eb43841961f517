import io
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import dictionary_event
from siac import codec, dsp, encoder, service, synth


def wav_of(samples):
    return codec.wav_bytes(dsp.Pcm(np.asarray(samples, np.float32)))


def wait_ready(client, sid, timeout=120.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        doc = client.get(f"/sessions/{sid}").json()
        if doc["status"] in ("ready", "error"):
            return doc
        time.sleep(0.05)
    raise TimeoutError("session never became ready")


def decode_wav(resp):
    assert resp.status_code == 200
    assert resp.headers["content-type"].startswith("audio/wav")
    return codec.read_wav_bytes(resp.content).samples


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    app = service.create_app(
        data_dir=str(tmp_path_factory.mktemp("svc")), preset="fast")
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def mixture(bank):
    """Three dictionary events spread across two seconds."""
    cfg = encoder.EncoderConfig.fast()
    x = np.zeros(2 * dsp.SAMPLE_RATE, dtype=np.float32)
    for onset, f0_index in [(10, 2), (90, 7), (160, 10)]:
        ev = dictionary_event(cfg, f0_index, onset)
        x += synth.render_event(ev, bank=bank)[: len(x)]
    return x


@pytest.fixture(scope="module")
def ready_session(client, mixture):
    resp = client.post("/sessions?steps=5", content=wav_of(mixture))
    assert resp.status_code == 200
    sid = resp.json()["id"]
    doc = wait_ready(client, sid)
    assert doc["status"] == "ready", doc
    return sid, doc


class TestUpload:
    def test_silence_produces_no_events(self, client):
        resp = client.post("/sessions?steps=3",
                           content=wav_of(np.zeros(22050)))
        sid = resp.json()["id"]
        doc = wait_ready(client, sid)
        assert doc["status"] == "ready"
        assert doc["events"] == []

    def test_three_events_near_true_onsets(self, ready_session, mixture):
        _, doc = ready_session
        assert doc["sample_rate"] == 22050
        assert doc["total_samples"] == len(mixture)
        got = [ev["abs_onset_sample"] for ev in doc["events"]]
        assert got == sorted(got)
        for want in [10 * 256, 90 * 256, 160 * 256]:
            assert min(abs(onset - want) for onset in got) <= 256

    def test_duplicate_upload_is_deterministic(self, client, mixture):
        sids = []
        for _ in range(2):
            resp = client.post("/sessions?steps=4", content=wav_of(mixture))
            sids.append(resp.json()["id"])
        docs = [wait_ready(client, sid) for sid in sids]
        strip = lambda d: [{k: v for k, v in ev.items()} for ev in d["events"]]
        assert strip(docs[0]) == strip(docs[1])
        renders = [decode_wav(client.post(f"/sessions/{sid}/render"))
                   for sid in sids]
        assert np.array_equal(renders[0], renders[1])

    def test_malformed_wav_rejected(self, client):
        resp = client.post("/sessions", content=b"this is not a wav")
        assert resp.status_code == 400

    def test_oversized_upload_rejected(self, client, monkeypatch):
        monkeypatch.setattr(service, "MAX_UPLOAD_BYTES", 1024)
        resp = client.post("/sessions", content=b"\x00" * 2048)
        assert resp.status_code == 413

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404
        assert client.post("/sessions/nope/render").status_code == 404
        assert client.patch("/sessions/nope/events/0",
                            json={"mute": True}).status_code == 404


def fresh_session(client, mixture, steps=5):
    resp = client.post(f"/sessions?steps={steps}", content=wav_of(mixture))
    sid = resp.json()["id"]
    doc = wait_ready(client, sid)
    assert doc["status"] == "ready"
    return sid, doc


class TestEdits:
    def test_move_by_zero_keeps_render(self, client, mixture):
        sid, doc = fresh_session(client, mixture)
        before = decode_wav(client.post(f"/sessions/{sid}/render"))
        resp = client.patch(f"/sessions/{sid}/events/0",
                            json={"move_by_seconds": 0.0})
        assert resp.status_code == 200
        assert resp.json()["revision"] == doc["revision"] + 1
        after = decode_wav(client.post(f"/sessions/{sid}/render"))
        assert np.array_equal(before, after)

    def test_move_shifts_audio(self, client, bank):
        cfg = encoder.EncoderConfig.fast()
        x = np.zeros(2 * dsp.SAMPLE_RATE, dtype=np.float32)
        ev = dictionary_event(cfg, 6, 20)
        x += synth.render_event(ev, bank=bank)[: len(x)]
        sid, doc = fresh_session(client, x, steps=2)
        before = decode_wav(client.post(f"/sessions/{sid}/render"))
        assert client.patch(f"/sessions/{sid}/events/0",
                            json={"move_by_seconds": 0.5}).status_code == 200
        after = decode_wav(client.post(f"/sessions/{sid}/render"))
        shift = dsp.SAMPLE_RATE // 2
        a = after[shift:].astype(np.float64)
        b = before[: len(before) - shift].astype(np.float64)
        corr = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b) + 1e-12)
        assert corr > 0.98

    def test_delete_is_additive(self, client, mixture):
        sid, doc = fresh_session(client, mixture)
        n = len(doc["events"])
        assert n >= 2
        full = decode_wav(client.post(f"/sessions/{sid}/render"))
        only_zero = decode_wav(client.post(
            f"/sessions/{sid}/render", json={"event_subset": [0]}))
        assert client.patch(f"/sessions/{sid}/events/0",
                            json={"delete": True}).status_code == 200
        doc2 = client.get(f"/sessions/{sid}").json()
        assert len(doc2["events"]) == n - 1
        without = decode_wav(client.post(f"/sessions/{sid}/render"))
        recombined = without.astype(np.float64) + only_zero.astype(np.float64)
        assert np.max(np.abs(recombined - full)) < 3.0 / 32768

    def test_mute_equals_subset(self, client, mixture):
        sid, doc = fresh_session(client, mixture)
        n = len(doc["events"])
        subset = decode_wav(client.post(
            f"/sessions/{sid}/render",
            json={"event_subset": list(range(1, n))}))
        assert client.patch(f"/sessions/{sid}/events/0",
                            json={"mute": True}).status_code == 200
        muted = decode_wav(client.post(f"/sessions/{sid}/render"))
        assert np.array_equal(subset, muted)
        doc2 = client.get(f"/sessions/{sid}").json()
        assert doc2["events"][0]["muted"] is True
        assert client.patch(f"/sessions/{sid}/events/0",
                            json={"mute": False}).status_code == 200
        unmuted = decode_wav(client.post(f"/sessions/{sid}/render"))
        full = decode_wav(client.post(
            f"/sessions/{sid}/render",
            json={"event_subset": list(range(n))}))
        assert np.array_equal(unmuted, full)

    def test_amplitude_edit(self, client, mixture):
        sid, doc = fresh_session(client, mixture)
        assert client.patch(f"/sessions/{sid}/events/0",
                            json={"amplitude": 0.0}).status_code == 200
        doc2 = client.get(f"/sessions/{sid}").json()
        assert doc2["events"][0]["amplitude"] == 0.0

    def test_stale_revision_conflict(self, client, mixture):
        sid, doc = fresh_session(client, mixture)
        ok = client.patch(f"/sessions/{sid}/events/0",
                          json={"mute": True},
                          headers={"If-Match": str(doc["revision"])})
        assert ok.status_code == 200
        stale = client.patch(f"/sessions/{sid}/events/0",
                             json={"mute": False},
                             headers={"If-Match": str(doc["revision"])})
        assert stale.status_code == 409

    def test_invalid_edits(self, client, mixture):
        sid, doc = fresh_session(client, mixture)
        assert client.patch(f"/sessions/{sid}/events/0",
                            json={"amplitude": -1.0}).status_code == 422
        assert client.patch(f"/sessions/{sid}/events/0",
                            json={"warp": 2}).status_code == 422
        assert client.patch(f"/sessions/{sid}/events/0",
                            json={"move_by_seconds": 1e6}).status_code == 422
        assert client.patch(f"/sessions/{sid}/events/999",
                            json={"mute": True}).status_code == 404
        # failed edits must not bump the revision
        assert client.get(f"/sessions/{sid}").json()["revision"] \
            == doc["revision"]

    def test_bad_subset_indices(self, client, mixture):
        sid, _ = fresh_session(client, mixture)
        resp = client.post(f"/sessions/{sid}/render",
                           json={"event_subset": [99]})
        assert resp.status_code == 422


class TestResidual:
    def test_reports_norms_and_png(self, client, ready_session):
        sid, doc = ready_session
        resp = client.get(f"/sessions/{sid}/residual")
        assert resp.status_code == 200
        body = resp.json()
        assert body["residual_norm"] < body["input_norm"]
        norms = body["per_step_norms"]
        assert len(norms) == len(doc["events"])
        import base64
        png = base64.b64decode(body["png_base64"])
        assert png[:8] == b"\x89PNG\r\n\x1a\n"


class TestPersistence:
    def test_journal_replay_matches_state(self, client, mixture, bank):
        import os
        sid, doc = fresh_session(client, mixture)
        client.patch(f"/sessions/{sid}/events/0",
                     json={"move_by_seconds": 0.1})
        client.patch(f"/sessions/{sid}/events/1", json={"mute": True})
        client.patch(f"/sessions/{sid}/events/0", json={"amplitude": 0.02})

        app = client.app
        session = app.state.sessions[sid]
        stored = codec.parse(
            open(os.path.join(session.dir, "session.siac"), "rb").read())
        assert stored == session.encoding

        journal = json.load(open(os.path.join(session.dir, "journal.json")))
        assert journal["revision"] == session.revision
        assert journal["muted"] == sorted(session.muted)

        # replaying the journal over the initial encoding reproduces the
        # current state exactly
        replay = service.Session("replay", session.dir)
        replay.encoding = session.initial
        replay.initial = session.initial
        replay.status = "ready"
        for entry in journal["journal"]:
            service._apply_edit(replay, entry["index"], entry["edit"])
        assert replay.encoding == session.encoding
        assert replay.muted == session.muted
