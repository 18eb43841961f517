"""Core signal-processing primitives.

Everything here is pure: immutable inputs, freshly allocated outputs,
safe to call concurrently.  Audio buffers are float32; norm accumulation
happens in float64.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, OutOfRange

SAMPLE_RATE = 22050
WINDOW = 2048
HOP = 256
BINS = WINDOW // 2 + 1

SEGMENT_LEN = 1 << 17   # samples analyzed at a time
SEGMENT_HALF = 1 << 16  # samples actually encoded per segment
FRAMES_PER_SEGMENT = SEGMENT_LEN // HOP        # 512
FRAMES_PER_HALF = SEGMENT_HALF // HOP          # 256


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float32) if not isinstance(x, np.ndarray) else x
    if arr.ndim != 1:
        raise InvalidInput(f"{name} must be one-dimensional")
    return arr


@dataclass(frozen=True)
class Pcm:
    """A mono sample buffer plus its sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float32)
        if arr.ndim != 1:
            raise InvalidInput("Pcm samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("Pcm samples must be finite")
        if self.sample_rate <= 0:
            raise InvalidInput("sample_rate must be positive")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class MagSpectrogram:
    """Non-negative magnitude spectrogram: (bins, frames), bins = window/2 + 1."""

    values: np.ndarray
    window: int = WINDOW
    hop: int = HOP

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise InvalidInput("spectrogram values must be 2-D (bins, frames)")
        if v.shape[0] != self.window // 2 + 1:
            raise InvalidInput(
                f"expected {self.window // 2 + 1} bins, got {v.shape[0]}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidInput("spectrogram values must be finite and >= 0")
        object.__setattr__(self, "values", v)

    @property
    def bins(self) -> int:
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class TaperWeights:
    """Per-sample loss weights over one analysis segment.

    Flat at 1.0 over the first half, then a linear descent toward 0 over
    the second half, so energy late in the segment is penalized less.
    """

    weights: np.ndarray
    flat_len: int = SEGMENT_HALF

    @classmethod
    def for_segment(cls, segment_len: int = SEGMENT_LEN,
                    flat_len: int = SEGMENT_HALF) -> "TaperWeights":
        n = np.arange(segment_len, dtype=np.float64)
        ramp_len = segment_len - flat_len
        w = np.where(n < flat_len, 1.0, (segment_len - n) / max(ramp_len, 1))
        return cls(weights=w.astype(np.float32), flat_len=flat_len)

    def frame_weights(self, frames: int, hop: int = HOP,
                      window: int = WINDOW) -> np.ndarray:
        """One weight per STFT frame: the taper value at the frame center."""
        centers = np.arange(frames) * hop + window // 2
        centers = np.minimum(centers, len(self.weights) - 1)
        return self.weights[centers].astype(np.float64)


def stft_mag(x, window: int = WINDOW, hop: int = HOP) -> MagSpectrogram:
    """Magnitude STFT with Hann windowing and zero padding at both ends.

    Frames are center-aligned: frame i covers samples
    [i*hop - window/2, i*hop + window/2), so column i is attributed to
    the instant i*hop.  The number of frames is ceil(len(x) / hop); a
    2^17-sample buffer yields exactly 512.
    """
    samples = x.samples if isinstance(x, Pcm) else _as_float_array(x, "x")
    if len(samples) == 0:
        raise InvalidInput("stft_mag: empty input")
    if window <= 0 or hop <= 0:
        raise InvalidInput("window and hop must be positive")
    if window % hop != 0:
        raise InvalidInput("hop must divide window")

    frames = -(-len(samples) // hop)
    lead = window // 2
    padded = np.zeros(max((frames - 1) * hop + window,
                          lead + len(samples)), dtype=np.float32)
    padded[lead:lead + len(samples)] = samples

    stride = padded.strides[0]
    mat = np.lib.stride_tricks.as_strided(
        padded, shape=(frames, window), strides=(hop * stride, stride))
    win = np.hanning(window).astype(np.float32)
    spec = np.abs(np.fft.rfft(mat * win, axis=1)).T.astype(np.float32)
    return MagSpectrogram(values=spec, window=window, hop=hop)


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p <<= 1
    return p


def fft_convolve(x, h) -> np.ndarray:
    """Full linear convolution via zero-padded FFTs, length len(x)+len(h)-1."""
    x = np.asarray(x)
    h = np.asarray(h)
    if len(x) == 0 or len(h) == 0:
        raise InvalidInput("fft_convolve: empty input")
    out_len = len(x) + len(h) - 1
    n = _next_pow2(out_len)
    spec = np.fft.rfft(x, n).astype(np.complex128) * np.fft.rfft(h, n)
    out = np.fft.irfft(spec, n)[:out_len]
    dtype = np.result_type(x.dtype, h.dtype)
    if np.issubdtype(dtype, np.floating) and dtype != np.float64:
        return out.astype(dtype)
    return out


def fractional_shift(x, tau: float) -> np.ndarray:
    """Delay a signal by a real number of samples via linear phase.

    The working buffer is zero-padded to the next power of two >= 2*len(x)
    so no content wraps around; the result is truncated back to len(x).
    """
    x = np.asarray(x)
    if len(x) == 0:
        raise InvalidInput("fractional_shift: empty input")
    if abs(tau) >= len(x):
        raise OutOfRange(f"shift {tau} exceeds signal length {len(x)}")
    if tau == 0:
        return x.copy()
    n = _next_pow2(2 * len(x))
    spec = np.fft.rfft(x, n)
    k = np.arange(spec.shape[0])
    spec = spec * np.exp(-2j * np.pi * k * (float(tau) / n))
    out = np.fft.irfft(spec, n)[:len(x)]
    if np.issubdtype(x.dtype, np.floating) and x.dtype != np.float64:
        return out.astype(x.dtype)
    return out


def l1_norm(s: MagSpectrogram, taper: TaperWeights | None = None) -> float:
    """Sum of magnitudes, optionally weighted per frame by the taper."""
    v = s.values.astype(np.float64, copy=False)
    if taper is None:
        return float(v.sum())
    fw = taper.frame_weights(s.frames, s.hop, s.window)
    return float((v.sum(axis=0) * fw).sum())


def weighted_l1(values: np.ndarray, frame_weights: np.ndarray) -> float:
    """Frame-weighted L1 of a raw (bins, frames) magnitude array."""
    return float((values.astype(np.float64, copy=False).sum(axis=0)
                  * frame_weights).sum())
