"""Minimal RIFF/WAVE reading and writing.

Reading accepts 8/16/24/32-bit integer PCM and 32/64-bit float, takes
channel 0 of multichannel files, and resamples anything that is not
already at the codec rate (polyphase windowed-sinc).  Writing always
emits mono 16-bit PCM at the codec rate.
"""

import io
import struct
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

from .dsp import SAMPLE_RATE, Pcm
from .errors import FormatError


def _read_chunks(data: bytes):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError("not a RIFF/WAVE file")
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise FormatError(f"chunk {cid!r} truncated")
        yield cid, body
        pos += 8 + size + (size & 1)


def _decode_samples(fmt_tag, bits, raw, channels):
    if fmt_tag == 1:  # integer PCM
        if bits == 8:  # uint8 offset binary
            samples = (np.frombuffer(raw, dtype=np.uint8).astype(np.float32)
                       - 128.0) / 128.0
        elif bits == 16:
            samples = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
        elif bits == 24:
            b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
            vals = (b[:, 0].astype(np.int32)
                    | (b[:, 1].astype(np.int32) << 8)
                    | (b[:, 2].astype(np.int32) << 16))
            vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
            samples = vals.astype(np.float32) / float(1 << 23)
        elif bits == 32:
            samples = np.frombuffer(raw, dtype="<i4").astype(np.float32) / float(1 << 31)
        else:
            raise FormatError(f"unsupported PCM bit depth {bits}")
    elif fmt_tag == 3:  # IEEE float
        if bits == 32:
            samples = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        elif bits == 64:
            samples = np.frombuffer(raw, dtype="<f8").astype(np.float32)
        else:
            raise FormatError(f"unsupported float bit depth {bits}")
    else:
        raise FormatError(f"unsupported WAVE format tag {fmt_tag}")
    if channels > 1:
        samples = samples[::channels].copy()
    return samples


def read_wav_bytes(data: bytes, target_rate: int = SAMPLE_RATE) -> Pcm:
    fmt = None
    body = None
    for cid, chunk in _read_chunks(data):
        if cid == b"fmt ":
            if len(chunk) < 16:
                raise FormatError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", chunk, 0)
        elif cid == b"data":
            body = chunk
    if fmt is None:
        raise FormatError("missing fmt chunk")
    if body is None or len(body) == 0:
        raise FormatError("missing or empty data chunk")
    fmt_tag, channels, rate, _, _, bits = fmt
    if fmt_tag == 0xFFFE:  # WAVE_FORMAT_EXTENSIBLE; sub-format assumed PCM/float
        fmt_tag = 1 if bits in (8, 16, 24) else 3
    if channels < 1 or rate <= 0:
        raise FormatError("malformed fmt chunk")
    frame_bytes = (bits // 8) * channels
    if frame_bytes and len(body) % frame_bytes:
        body = body[:len(body) - len(body) % frame_bytes]
    samples = _decode_samples(fmt_tag, bits, body, channels)
    if len(samples) == 0:
        raise FormatError("empty data chunk")
    if rate != target_rate:
        ratio = Fraction(target_rate, rate)
        samples = resample_poly(samples.astype(np.float64),
                                ratio.numerator, ratio.denominator)
        samples = samples.astype(np.float32)
    return Pcm(samples=samples, sample_rate=target_rate)


def read_wav(path, target_rate: int = SAMPLE_RATE) -> Pcm:
    with open(path, "rb") as f:
        return read_wav_bytes(f.read(), target_rate)


def wav_bytes(x: Pcm) -> bytes:
    scaled = np.round(np.asarray(x.samples, np.float64) * 32768.0)
    pcm16 = np.clip(scaled, -32768, 32767).astype("<i2").tobytes()
    buf = io.BytesIO()
    buf.write(b"RIFF")
    buf.write(struct.pack("<I", 36 + len(pcm16)))
    buf.write(b"WAVE")
    buf.write(b"fmt ")
    buf.write(struct.pack("<IHHIIHH", 16, 1, 1, x.sample_rate,
                          x.sample_rate * 2, 2, 16))
    buf.write(b"data")
    buf.write(struct.pack("<I", len(pcm16)))
    buf.write(pcm16)
    return buf.getvalue()


def write_wav(path, x: Pcm) -> None:
    with open(path, "wb") as f:
        f.write(wav_bytes(x))
