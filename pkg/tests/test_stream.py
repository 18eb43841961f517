import numpy as np
import pytest

from conftest import dictionary_event
from siac import dsp, encoder, stream, synth
from siac.errors import BankError, InvalidInput


def xcorr(a, b):
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        return 1.0 if np.allclose(a, b) else 0.0
    return float(np.dot(a, b) / denom)


def mixture_signal(cfg, bank, placements, length):
    """Dictionary events placed at absolute sample positions."""
    out = np.zeros(length, dtype=np.float64)
    for abs_onset, f0_index in placements:
        ev = dictionary_event(cfg, f0_index, 1)
        sig = synth.render_event(ev, bank=bank)
        start_in = 1 * dsp.HOP
        tail = sig[start_in:]
        stop = min(length, abs_onset + len(tail))
        out[abs_onset:stop] += tail[: stop - abs_onset]
    return out.astype(np.float32)


class TestStreamEncoding:
    def test_header_records_provenance(self, fast_cfg, bank):
        x = np.zeros(10000, dtype=np.float32)
        x[3000:3100] = 0.3
        enc = stream.encode_stream(dsp.Pcm(x), fast_cfg, bank)
        h = enc.header
        assert h.sample_rate == dsp.SAMPLE_RATE
        assert h.total_samples == 10000
        assert h.bank_fingerprint == bank.fingerprint
        assert (h.segment_len, h.hop_len) == (1 << 17, 1 << 16)
        assert (h.stft_window, h.stft_hop) == (dsp.WINDOW, dsp.HOP)
        assert h.prng_id == "np-pcg64/1"

    def test_onsets_sorted_and_in_range(self, fast_cfg, bank):
        cfg = encoder.EncoderConfig.fast(max_steps=2)
        length = (1 << 16) * 3 + 777
        x = mixture_signal(cfg, bank, [(5000, 3), (70000, 8), (150000, 5)],
                           length)
        enc = stream.encode_stream(dsp.Pcm(x), cfg, bank)
        onsets = [ev.abs_onset_sample for ev in enc.events]
        assert onsets == sorted(onsets)
        assert all(0 <= o < length for o in onsets)

    def test_invariant_enforced(self, bank):
        header = stream.StreamHeader(
            sample_rate=dsp.SAMPLE_RATE, total_samples=1000,
            bank_fingerprint=bank.fingerprint)
        ev = dictionary_event(encoder.EncoderConfig.fast(), 0, 1)
        bad = stream.StreamEvent(abs_onset_sample=5000, params=ev.params)
        with pytest.raises(InvalidInput):
            stream.StreamEncoding(header=header, events=(bad,))

    def test_empty_signal_rejected(self, fast_cfg, bank):
        with pytest.raises(InvalidInput):
            stream.encode_stream(dsp.Pcm(np.zeros(0, np.float32)),
                                 fast_cfg, bank)

    def test_silence(self, bank):
        cfg = encoder.EncoderConfig.fast(max_steps=2)
        enc = stream.encode_stream(dsp.Pcm(np.zeros(44100, np.float32)),
                                   cfg, bank)
        assert enc.events == ()
        out = stream.decode_stream(enc, bank)
        assert len(out) == 44100
        assert np.all(out.samples == 0)


class TestRoundTrip:
    def test_single_segment_event(self, bank):
        cfg = encoder.EncoderConfig.fast(max_steps=2)
        x = mixture_signal(cfg, bank, [(20 * dsp.HOP, 6)], 1 << 16)
        enc = stream.encode_stream(dsp.Pcm(x), cfg, bank)
        out = stream.decode_stream(enc, bank)
        assert len(out) == len(x)
        assert xcorr(out.samples, x) > 0.95

    def test_event_straddling_segment_boundary(self, bank):
        cfg = encoder.EncoderConfig.fast(max_steps=3)
        # onset just before the first segment hop; the tail crosses into
        # the second encoding window and must not be re-encoded there
        onset = (1 << 16) - 8 * dsp.HOP
        x = mixture_signal(cfg, bank, [(onset, 7)], (1 << 16) * 2)
        enc = stream.encode_stream(dsp.Pcm(x), cfg, bank)
        out = stream.decode_stream(enc, bank)
        assert xcorr(out.samples, x) > 0.9
        # the crossing tail should not spawn extra events in segment two
        assert len(enc.events) <= 2

    def test_multi_segment(self, bank):
        cfg = encoder.EncoderConfig.fast(max_steps=2)
        length = (1 << 16) * 3
        x = mixture_signal(cfg, bank,
                           [(4000, 2), (90000, 9), (170000, 4)], length)
        enc = stream.encode_stream(dsp.Pcm(x), cfg, bank)
        out = stream.decode_stream(enc, bank)
        assert xcorr(out.samples, x) > 0.9

    def test_decode_determinism(self, bank):
        cfg = encoder.EncoderConfig.fast(max_steps=2)
        x = mixture_signal(cfg, bank, [(3000, 5)], 40000)
        enc = stream.encode_stream(dsp.Pcm(x), cfg, bank)
        a = stream.decode_stream(enc, bank)
        b = stream.decode_stream(enc, bank)
        assert np.array_equal(a.samples, b.samples)

    def test_event_subset_is_additive(self, bank):
        cfg = encoder.EncoderConfig.fast(max_steps=4)
        x = mixture_signal(cfg, bank, [(3000, 2), (30000, 9)], 1 << 16)
        enc = stream.encode_stream(dsp.Pcm(x), cfg, bank)
        assert len(enc.events) >= 2
        full = stream.decode_stream(enc, bank).samples.astype(np.float64)
        parts = sum(
            stream.decode_stream(enc, bank, event_indices=[i])
            .samples.astype(np.float64)
            for i in range(len(enc.events)))
        assert np.max(np.abs(full - parts)) < 1e-5


class TestFingerprint:
    def test_mismatch_raises(self, fast_cfg, bank):
        x = mixture_signal(encoder.EncoderConfig.fast(), bank,
                           [(3000, 5)], 30000)
        cfg = encoder.EncoderConfig.fast(max_steps=1)
        enc = stream.encode_stream(dsp.Pcm(x), cfg, bank)
        other = synth.RirBank(irs=[np.ones(10, np.float32)], names=["x"])
        with pytest.raises(BankError):
            stream.decode_stream(enc, other)
        out = stream.decode_stream(enc, other, ignore_fingerprint=True)
        assert len(out) == 30000
