"""Streaming segmentation: encode arbitrary-length audio, decode back.

The encoder slides a 2^17-sample analysis window in 2^16-sample hops.
Only events beginning in a window's first half are emitted, so every
stretch of audio is seen twice: once as tail context, once as encodable
content.  Tails of already-emitted events are pre-subtracted from each
new window's residual so they are not re-encoded.
"""

from dataclasses import dataclass

import numpy as np

from .dsp import (HOP, SAMPLE_RATE, SEGMENT_HALF, SEGMENT_LEN, WINDOW,
                  Pcm, stft_mag)
from .encoder import EncoderConfig, StepReport, encode_segment
from .errors import BankError, InvalidInput
from .synth import PRNG_ID, Event, EventParams, RirBank, render_event


@dataclass(frozen=True)
class StreamHeader:
    sample_rate: int
    total_samples: int
    bank_fingerprint: bytes
    segment_len: int = SEGMENT_LEN
    hop_len: int = SEGMENT_HALF
    stft_window: int = WINDOW
    stft_hop: int = HOP
    prng_id: str = PRNG_ID


@dataclass(frozen=True)
class StreamEvent:
    abs_onset_sample: int
    params: EventParams

    def onset_seconds(self, sample_rate: int = SAMPLE_RATE) -> float:
        return self.abs_onset_sample / sample_rate


@dataclass(frozen=True)
class StreamEncoding:
    header: StreamHeader
    events: tuple

    def __post_init__(self):
        evs = tuple(self.events)
        for ev in evs:
            if not 0 <= ev.abs_onset_sample < self.header.total_samples:
                raise InvalidInput("event onset outside the encoded signal")
        if any(evs[i].abs_onset_sample > evs[i + 1].abs_onset_sample
               for i in range(len(evs) - 1)):
            raise InvalidInput("events must be sorted by onset")
        object.__setattr__(self, "events", evs)


def _event_tail(ev: StreamEvent, bank: RirBank) -> np.ndarray:
    """One event rendered on its own canvas, starting at offset HOP.

    The HOP-sample guard keeps negative fine shifts on the canvas; the
    caller mixes the buffer at abs_onset_sample - HOP.
    """
    rel = Event(onset_frame=1, params=ev.params)
    return render_event(rel, SEGMENT_LEN, bank)


def encode_stream(x: Pcm, cfg: EncoderConfig, bank: RirBank,
                  collect_reports: bool = False):
    """Encode a whole signal; returns StreamEncoding (and reports if asked)."""
    if len(x) < 1:
        raise InvalidInput("cannot encode an empty signal")
    n = len(x)
    n_segments = max(1, -(-n // SEGMENT_HALF))
    emitted: list[StreamEvent] = []
    all_reports: list[list[StepReport]] = []
    for k in range(n_segments):
        start = k * SEGMENT_HALF
        window = np.zeros(SEGMENT_LEN, dtype=np.float32)
        chunk = x.samples[start:start + SEGMENT_LEN]
        window[:len(chunk)] = chunk

        initial_subtract = None
        overlapping = [ev for ev in emitted
                       if ev.abs_onset_sample < start]  # tails from the past
        if overlapping:
            explained = np.zeros(SEGMENT_LEN, dtype=np.float32)
            for ev in overlapping:
                tail = _event_tail(ev, bank)
                rel = ev.abs_onset_sample - HOP - start
                src0 = max(0, -rel)
                dst0 = max(0, rel)
                width = min(len(tail) - src0, SEGMENT_LEN - dst0)
                if width > 0:
                    explained[dst0:dst0 + width] += tail[src0:src0 + width]
            if np.any(explained):
                initial_subtract = stft_mag(explained).values

        events, reports = encode_segment(window, cfg, bank, initial_subtract)
        all_reports.append(reports)
        for ev in events:
            abs_onset = start + ev.onset_frame * HOP
            if abs_onset < n:  # events fitted to trailing zero-padding are dropped
                emitted.append(StreamEvent(abs_onset, ev.params))

    emitted.sort(key=lambda ev: ev.abs_onset_sample)
    enc = StreamEncoding(
        header=StreamHeader(sample_rate=x.sample_rate, total_samples=n,
                            bank_fingerprint=bank.fingerprint),
        events=tuple(emitted))
    if collect_reports:
        return enc, all_reports
    return enc


def decode_stream(enc: StreamEncoding, bank: RirBank,
                  ignore_fingerprint: bool = False,
                  event_indices=None) -> Pcm:
    """Mix every event (or a chosen subset) into a fresh output buffer."""
    if not ignore_fingerprint and bank.fingerprint != enc.header.bank_fingerprint:
        raise BankError("bank fingerprint does not match the encoding header")
    out = np.zeros(enc.header.total_samples, dtype=np.float64)
    events = (enc.events if event_indices is None
              else [enc.events[i] for i in event_indices])
    for ev in events:
        tail = _event_tail(ev, bank)
        rel = ev.abs_onset_sample - HOP
        src0 = max(0, -rel)
        dst0 = max(0, rel)
        width = min(len(tail) - src0, len(out) - dst0)
        if width > 0:
            out[dst0:dst0 + width] += tail[src0:src0 + width]
    return Pcm(samples=out.astype(np.float32),
               sample_rate=enc.header.sample_rate)
