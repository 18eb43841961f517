"""Persistence: the `.siac` binary event-stream format and friends.

All multi-byte fields are little-endian, every real number is a 32-bit
float, and the fixed-size header ends with a CRC32 so any corruption is
caught before content is interpreted.  A JSON mirror with the same field
names exists for tooling; the binary form is authoritative.
"""

import json
import struct
import zlib

import numpy as np

from .errors import (FormatError, InvalidInput, TruncationError,
                     ValidationError)
from .stream import StreamEncoding, StreamEvent, StreamHeader
from .synth import (BlockParams, EventParams, MixtureEnvelope, NoiseBurst,
                    Partial, Resonance)
from .wavio import read_wav, read_wav_bytes, wav_bytes, write_wav  # noqa: F401

MAGIC = b"SIAC"
VERSION = 1

# magic, version, sample_rate, segment_len, hop_len, stft window/hop,
# prng id (16 bytes, NUL-padded), bank fingerprint (16), total_samples,
# event count, header crc32
_HEADER = struct.Struct("<4sHIIIHH16s16sQI")
_CRC = struct.Struct("<I")
HEADER_SIZE = _HEADER.size + _CRC.size


def _f32(x: float) -> float:
    return float(np.float32(x))


class _Writer:
    def __init__(self):
        self.parts = []

    def pack(self, fmt, *vals):
        self.parts.append(struct.pack("<" + fmt, *vals))

    def bytes(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def unpack(self, fmt):
        s = struct.Struct("<" + fmt)
        if self.pos + s.size > len(self.data):
            raise TruncationError("file ends inside a record")
        vals = s.unpack_from(self.data, self.pos)
        self.pos += s.size
        return vals


def _write_event(w: _Writer, ev: StreamEvent) -> None:
    body = _Writer()
    p = ev.params
    body.pack("QffIIIfQ", ev.abs_onset_sample, _f32(p.fine_shift),
              _f32(p.amplitude), p.burst.duration, p.burst.attack,
              p.burst.decay, _f32(p.burst.gain), p.burst.seed)
    body.pack("iH", -1 if p.rir_index is None else p.rir_index, len(p.blocks))
    for blk in p.blocks:
        cp = blk.mixture.control_points
        body.pack("HffHH", blk.expressivity, _f32(blk.dry_gain),
                  _f32(blk.wet_gain), cp.shape[0], cp.shape[1])
        body.parts.append(cp.astype("<f4").tobytes())
        for res in blk.resonances:
            body.pack("IH", res.length, len(res.partials))
            for pt in res.partials:
                body.pack("ffff", _f32(pt.freq), _f32(pt.amp),
                          _f32(pt.decay_alpha), _f32(pt.phase))
    payload = body.bytes()
    w.pack("I", len(payload))
    w.parts.append(payload)


def _read_event(r: _Reader, header: StreamHeader) -> StreamEvent:
    (length,) = r.unpack("I")
    end = r.pos + length
    if end > len(r.data):
        raise TruncationError("event record extends past end of file")
    (onset, fine_shift, amplitude, dur, attack, decay, gain,
     seed) = r.unpack("QffIIIfQ")
    rir_index, n_blocks = r.unpack("iH")
    if n_blocks == 0 or n_blocks > 16:
        raise ValidationError(f"implausible block count {n_blocks}")
    blocks = []
    for _ in range(n_blocks):
        expr, dry, wet, c, e = r.unpack("HffHH")
        if expr != e or expr == 0 or c == 0 or c > 4096 or e > 256:
            raise ValidationError("malformed mixture dimensions")
        need = 4 * c * e
        if r.pos + need > len(r.data):
            raise TruncationError("mixture matrix truncated")
        cp = np.frombuffer(r.data, dtype="<f4", count=c * e,
                           offset=r.pos).reshape(c, e).copy()
        r.pos += need
        resonances = []
        for _ in range(e):
            fir_len, n_partials = r.unpack("IH")
            partials = []
            for _ in range(n_partials):
                freq, amp, alpha, phase = r.unpack("ffff")
                try:
                    partials.append(Partial(freq, amp, alpha, phase))
                except InvalidInput as exc:
                    raise ValidationError(str(exc)) from exc
            try:
                resonances.append(Resonance(tuple(partials), fir_len))
            except InvalidInput as exc:
                raise ValidationError(str(exc)) from exc
        try:
            blocks.append(BlockParams(tuple(resonances), MixtureEnvelope(cp),
                                      dry, wet))
        except InvalidInput as exc:
            raise ValidationError(str(exc)) from exc
    if r.pos != end:
        raise ValidationError("event record length does not match content")
    try:
        burst = NoiseBurst(dur, attack, decay, gain, seed)
        params = EventParams(burst=burst, blocks=tuple(blocks),
                             rir_index=None if rir_index < 0 else rir_index,
                             fine_shift=fine_shift, amplitude=amplitude)
        ev = StreamEvent(onset, params)
    except InvalidInput as exc:
        raise ValidationError(str(exc)) from exc
    if onset >= header.total_samples:
        raise ValidationError("event onset outside the encoded signal")
    return ev


def serialize(enc: StreamEncoding) -> bytes:
    h = enc.header
    head = _HEADER.pack(MAGIC, VERSION, h.sample_rate, h.segment_len,
                        h.hop_len, h.stft_window, h.stft_hop,
                        h.prng_id.encode("ascii")[:16].ljust(16, b"\0"),
                        h.bank_fingerprint, h.total_samples, len(enc.events))
    w = _Writer()
    w.parts.append(head)
    w.parts.append(_CRC.pack(zlib.crc32(head)))
    for ev in enc.events:
        _write_event(w, ev)
    return w.bytes()


def parse(data: bytes) -> StreamEncoding:
    if len(data) < HEADER_SIZE:
        raise TruncationError("file shorter than the fixed header")
    if data[:4] != MAGIC:
        raise FormatError("bad magic; not a .siac file")
    (crc_stored,) = _CRC.unpack_from(data, _HEADER.size)
    if zlib.crc32(data[:_HEADER.size]) != crc_stored:
        raise ValidationError("header checksum mismatch")
    (_, version, sample_rate, segment_len, hop_len, stft_window,
     stft_hop, prng_raw, fingerprint, total_samples,
     count) = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if sample_rate == 0 or segment_len == 0 or hop_len == 0 \
            or stft_window == 0 or stft_hop == 0:
        raise ValidationError("zero-valued header field")
    header = StreamHeader(sample_rate=sample_rate,
                          total_samples=total_samples,
                          bank_fingerprint=fingerprint,
                          segment_len=segment_len, hop_len=hop_len,
                          stft_window=stft_window, stft_hop=stft_hop,
                          prng_id=prng_raw.rstrip(b"\0").decode("ascii"))
    r = _Reader(data, HEADER_SIZE)
    events = []
    for _ in range(count):
        events.append(_read_event(r, header))
    if r.pos != len(data):
        raise ValidationError("trailing bytes after the last event")
    try:
        return StreamEncoding(header=header, events=tuple(events))
    except InvalidInput as exc:
        raise ValidationError(str(exc)) from exc


def compression_ratio(n_samples: int, n_events: int, params_per_event: int,
                      time_scalars_per_event: int = 1) -> float:
    """Samples per stored scalar, counting each parameter as one unit."""
    if min(n_samples, n_events, params_per_event, time_scalars_per_event) <= 0:
        raise InvalidInput("all counts must be positive")
    denom = n_events * params_per_event + n_events * time_scalars_per_event
    return n_samples / denom


# --- JSON mirror -----------------------------------------------------------

def encoding_to_dict(enc: StreamEncoding) -> dict:
    h = enc.header
    return {
        "header": {
            "sample_rate": h.sample_rate,
            "segment_len": h.segment_len,
            "hop_len": h.hop_len,
            "stft_window": h.stft_window,
            "stft_hop": h.stft_hop,
            "prng_id": h.prng_id,
            "bank_fingerprint": h.bank_fingerprint.hex(),
            "total_samples": h.total_samples,
        },
        "events": [
            {
                "abs_onset_sample": ev.abs_onset_sample,
                "fine_shift": _f32(ev.params.fine_shift),
                "amplitude": _f32(ev.params.amplitude),
                "rir_index": ev.params.rir_index,
                "burst": {
                    "duration": ev.params.burst.duration,
                    "attack": ev.params.burst.attack,
                    "decay": ev.params.burst.decay,
                    "gain": _f32(ev.params.burst.gain),
                    "seed": ev.params.burst.seed,
                },
                "blocks": [
                    {
                        "expressivity": blk.expressivity,
                        "dry_gain": _f32(blk.dry_gain),
                        "wet_gain": _f32(blk.wet_gain),
                        "mixture": blk.mixture.control_points.tolist(),
                        "resonances": [
                            {
                                "length": res.length,
                                "partials": [
                                    {"freq": _f32(p.freq), "amp": _f32(p.amp),
                                     "decay_alpha": _f32(p.decay_alpha),
                                     "phase": _f32(p.phase)}
                                    for p in res.partials
                                ],
                            }
                            for res in blk.resonances
                        ],
                    }
                    for blk in ev.params.blocks
                ],
            }
            for ev in enc.events
        ],
    }


def encoding_from_dict(d: dict) -> StreamEncoding:
    h = d["header"]
    header = StreamHeader(
        sample_rate=h["sample_rate"], total_samples=h["total_samples"],
        bank_fingerprint=bytes.fromhex(h["bank_fingerprint"]),
        segment_len=h["segment_len"], hop_len=h["hop_len"],
        stft_window=h["stft_window"], stft_hop=h["stft_hop"],
        prng_id=h["prng_id"])
    events = []
    for e in d["events"]:
        blocks = []
        for b in e["blocks"]:
            resonances = tuple(
                Resonance(tuple(Partial(p["freq"], p["amp"],
                                        p["decay_alpha"], p["phase"])
                                for p in r["partials"]),
                          r["length"])
                for r in b["resonances"])
            blocks.append(BlockParams(
                resonances, MixtureEnvelope(np.array(b["mixture"],
                                                     dtype=np.float32)),
                b["dry_gain"], b["wet_gain"]))
        params = EventParams(
            burst=NoiseBurst(**e["burst"]), blocks=tuple(blocks),
            rir_index=e["rir_index"], fine_shift=e["fine_shift"],
            amplitude=e["amplitude"])
        events.append(StreamEvent(e["abs_onset_sample"], params))
    return StreamEncoding(header=header, events=tuple(events))


def to_json(enc: StreamEncoding, indent: int = 2) -> str:
    return json.dumps(encoding_to_dict(enc), indent=indent)


def from_json(text: str) -> StreamEncoding:
    return encoding_from_dict(json.loads(text))
