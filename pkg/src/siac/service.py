"""HTTP service backing the event editor.

Sessions are encoded on a worker pool and persisted as a `.siac` file
plus an append-only edit journal; every response is derived from an
immutable, revision-tagged snapshot, and edits are serialized through a
per-session lock with optimistic concurrency (`If-Match: <revision>`).
"""

import base64
import io
import json
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import cli, codec, stream
from .dsp import HOP, stft_mag
from .encoder import EncoderConfig
from .errors import SiacError
from .stream import StreamEncoding, StreamEvent
from .synth import RirBank

MAX_UPLOAD_BYTES = int(os.environ.get("SIAC_MAX_UPLOAD", 32 * 1024 * 1024))


class Session:
    def __init__(self, sid: str, data_dir: str):
        self.id = sid
        self.dir = os.path.join(data_dir, sid)
        self.lock = threading.Lock()
        self.status = "encoding"
        self.error: str | None = None
        self.revision = 0
        self.encoding: StreamEncoding | None = None
        self.initial: StreamEncoding | None = None
        self.muted: set[int] = set()
        self.journal: list[dict] = []
        self.source: np.ndarray | None = None

    def snapshot(self) -> tuple:
        with self.lock:
            return self.status, self.revision, self.encoding, frozenset(self.muted)

    def persist(self):
        os.makedirs(self.dir, exist_ok=True)
        if self.encoding is not None:
            with open(os.path.join(self.dir, "session.siac"), "wb") as f:
                f.write(codec.serialize(self.encoding))
        with open(os.path.join(self.dir, "journal.json"), "w") as f:
            json.dump({"revision": self.revision, "muted": sorted(self.muted),
                       "journal": self.journal}, f)


def _apply_edit(session: Session, index: int, edit: dict) -> None:
    """Mutate a copy of the event list; caller holds the session lock."""
    enc = session.encoding
    events = list(enc.events)
    if "delete" in edit:
        del events[index]
        session.muted = {m - 1 if m > index else m
                        for m in session.muted if m != index}
    elif "mute" in edit:
        if edit["mute"]:
            session.muted.add(index)
        else:
            session.muted.discard(index)
    elif "amplitude" in edit:
        amp = float(edit["amplitude"])
        if amp < 0:
            raise ValueError("amplitude must be >= 0")
        ev = events[index]
        events[index] = StreamEvent(ev.abs_onset_sample,
                                    replace(ev.params, amplitude=amp))
    elif "move_by_seconds" in edit:
        ev = events[index]
        delta = float(edit["move_by_seconds"]) * enc.header.sample_rate
        pos = ev.abs_onset_sample + ev.params.fine_shift + delta
        new_onset = int(pos // HOP) * HOP
        fine = pos - new_onset
        if not 0 <= new_onset < enc.header.total_samples:
            raise ValueError("move would push the event outside the clip")
        events[index] = StreamEvent(new_onset,
                                    replace(ev.params, fine_shift=fine))
        events.sort(key=lambda e: e.abs_onset_sample)
    else:
        raise ValueError("unknown edit operation")
    session.encoding = StreamEncoding(header=enc.header, events=tuple(events))


def create_app(data_dir: str | None = None, bank_dir: str | None = None,
               preset: str | None = None, max_workers: int = 2) -> FastAPI:
    data_dir = data_dir or os.environ.get("SIAC_DATA_DIR", "./siac-data")
    bank_dir = bank_dir or os.environ.get("SIAC_BANK_DIR")
    preset = preset or os.environ.get("SIAC_ENCODER_PRESET", "full")
    os.makedirs(data_dir, exist_ok=True)

    bank = (RirBank.from_directory(bank_dir) if bank_dir
            else RirBank.synthetic())
    base_cfg = EncoderConfig.fast() if preset == "fast" else EncoderConfig()

    app = FastAPI(title="siac editor service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    sessions: dict[str, Session] = {}
    pool = ThreadPoolExecutor(max_workers=max_workers)

    def _error(status: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=status)

    def _get_session(sid: str) -> Session | None:
        return sessions.get(sid)

    def _events_payload(session: Session) -> list[dict]:
        report = cli.event_report(session.encoding, bank)
        for item in report:
            item["muted"] = item["index"] in session.muted
        return report

    def _encode_job(session: Session, pcm):
        try:
            enc = stream.encode_stream(pcm, session.cfg, bank)
            with session.lock:
                session.encoding = enc
                session.initial = enc
                session.source = pcm.samples
                session.status = "ready"
                session.persist()
        except Exception as exc:  # surfaced via session status
            with session.lock:
                session.status = "error"
                session.error = str(exc)

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.body()
        if len(body) > MAX_UPLOAD_BYTES:
            return _error(413, "upload too large")
        try:
            pcm = codec.read_wav_bytes(body)
        except SiacError as exc:
            return _error(400, f"malformed WAV: {exc}")
        steps = request.query_params.get("steps")
        cfg = base_cfg
        if steps is not None:
            cfg = replace(cfg, max_steps=max(1, int(steps)))
        session = Session(uuid.uuid4().hex, data_dir)
        session.cfg = cfg
        sessions[session.id] = session
        pool.submit(_encode_job, session, pcm)
        return {"id": session.id, "status": session.status}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        session = _get_session(sid)
        if session is None:
            return _error(404, "unknown session")
        status, revision, enc, _ = session.snapshot()
        out = {"id": sid, "status": status, "revision": revision}
        if status == "error":
            out["error"] = session.error
        if enc is not None:
            out["total_samples"] = enc.header.total_samples
            out["sample_rate"] = enc.header.sample_rate
            with session.lock:
                out["events"] = _events_payload(session)
        return out

    @app.patch("/sessions/{sid}/events/{index}")
    def patch_event(sid: str, index: int, edit: dict, request: Request):
        session = _get_session(sid)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            if session.status != "ready":
                return _error(409, "session is not ready")
            expected = request.headers.get("if-match")
            if expected is not None and int(expected) != session.revision:
                return _error(409, "stale revision")
            if not 0 <= index < len(session.encoding.events):
                return _error(404, "no such event")
            before = session.encoding
            try:
                _apply_edit(session, index, edit)
            except (ValueError, SiacError) as exc:
                session.encoding = before
                return _error(422, str(exc))
            session.revision += 1
            session.journal.append({"index": index, "edit": edit,
                                    "revision": session.revision})
            session.persist()
            return {"revision": session.revision}

    @app.post("/sessions/{sid}/render")
    def render(sid: str, body: dict | None = None):
        session = _get_session(sid)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            if session.status != "ready":
                return _error(409, "session is not ready")
            enc = session.encoding
            muted = set(session.muted)
        subset = None if body is None else body.get("event_subset")
        if subset is None:
            subset = [i for i in range(len(enc.events)) if i not in muted]
        else:
            if any(not isinstance(i, int) or not 0 <= i < len(enc.events)
                   for i in subset):
                return _error(422, "bad event indices")
            subset = [i for i in subset if i not in muted]
        pcm = stream.decode_stream(enc, bank, ignore_fingerprint=True,
                                   event_indices=subset)
        return Response(content=codec.wav_bytes(pcm), media_type="audio/wav")

    @app.get("/sessions/{sid}/residual")
    def residual(sid: str):
        session = _get_session(sid)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            if session.status != "ready":
                return _error(409, "session is not ready")
            enc = session.encoding
            source = session.source
        recon = stream.decode_stream(enc, bank, ignore_fingerprint=True)
        in_spec = stft_mag(source).values if len(source) else None
        out_spec = stft_mag(recon.samples).values
        diff = np.abs(in_spec - out_spec)
        png = _spectrogram_png(diff)
        norms = cli._per_step_norms(enc, bank)
        return {"png_base64": base64.b64encode(png).decode("ascii"),
                "input_norm": float(in_spec.sum()),
                "residual_norm": float(np.maximum(in_spec - out_spec, 0).sum()),
                "per_step_norms": norms}

    app.state.sessions = sessions
    app.state.bank = bank
    return app


def _spectrogram_png(values: np.ndarray) -> bytes:
    from PIL import Image
    mag = np.log1p(values / (values.max() + 1e-12) * 1e3)
    img = (mag / max(mag.max(), 1e-12) * 255.0).astype(np.uint8)[::-1, :]
    buf = io.BytesIO()
    Image.fromarray(img, mode="L").save(buf, format="PNG")
    return buf.getvalue()
