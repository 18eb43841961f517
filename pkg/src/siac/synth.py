"""Event decoder: source-excitation synthesis from explicit parameters.

An event is a burst of noise pushed through a stack of resonator blocks.
Each block convolves its input with one or more decaying-sinusoid FIR
filters, crossfades between them with a time-varying mixture, and mixes
the result with the (zero-padded) dry input.  The final block may draw
its single filter from a bank of room impulse responses.  The rendered
event is placed on a segment canvas at a coarse frame position and then
nudged by a fractional sample shift.
"""

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from . import wavio
from .dsp import (HOP, SAMPLE_RATE, SEGMENT_HALF, SEGMENT_LEN,
                  fft_convolve, fractional_shift)
from .errors import BankError, InvalidInput

PRNG_ID = "np-pcg64/1"       # recorded in encodings; see render_burst
MAX_PARTIALS = 64
DEFAULT_FIR_LEN = 1 << 15


def _f32(x: float) -> float:
    """Quantize to float32 so parameters survive serialization bit-exactly."""
    return float(np.float32(x))


@dataclass(frozen=True)
class NoiseBurst:
    """A short enveloped burst of uniform white noise."""

    duration: int
    attack: int
    decay: int
    gain: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.duration <= 8192:
            raise InvalidInput("burst duration must be in 1..8192")
        if self.attack < 0 or self.decay < 0 or self.attack + self.decay > self.duration:
            raise InvalidInput("attack + decay must fit inside duration")
        if self.gain < 0:
            raise InvalidInput("burst gain must be >= 0")
        object.__setattr__(self, "gain", _f32(self.gain))


@dataclass(frozen=True)
class Partial:
    freq: float
    amp: float
    decay_alpha: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amp < 0 or self.decay_alpha < 0:
            raise InvalidInput("partial amp and decay_alpha must be >= 0")
        for name in ("freq", "amp", "decay_alpha", "phase"):
            object.__setattr__(self, name, _f32(getattr(self, name)))


@dataclass(frozen=True)
class Resonance:
    """An FIR filter summing exponentially decaying sinusoids."""

    partials: tuple
    length: int = DEFAULT_FIR_LEN

    def __post_init__(self):
        object.__setattr__(self, "partials", tuple(self.partials))
        if self.length <= 0:
            raise InvalidInput("resonance length must be positive")
        if len(self.partials) > MAX_PARTIALS:
            raise InvalidInput(f"at most {MAX_PARTIALS} partials per resonance")


# placeholder filter carried by blocks whose FIR comes from the RIR bank
PASSTHROUGH = Resonance(partials=(Partial(1.0, 0.0, 0.0),), length=1)


@dataclass(frozen=True, eq=False)
class MixtureEnvelope:
    """Rows are per-control-frame gains over E resonances, each summing to 1."""

    control_points: np.ndarray

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=np.float32)
        if cp.ndim != 2:
            raise InvalidInput("mixture control points must be a C x E matrix")
        if np.any(cp < 0):
            raise InvalidInput("mixture entries must be >= 0")
        if np.any(np.abs(cp.sum(axis=1) - 1.0) > 1e-6):
            raise InvalidInput("each mixture row must sum to 1")
        object.__setattr__(self, "control_points", cp)

    def __eq__(self, other):
        return (isinstance(other, MixtureEnvelope)
                and self.control_points.shape == other.control_points.shape
                and self.control_points.tobytes() == other.control_points.tobytes())

    def __hash__(self):
        return hash(self.control_points.tobytes())

    @classmethod
    def constant(cls, columns: int = 1) -> "MixtureEnvelope":
        return cls(np.full((1, columns), 1.0 / columns, dtype=np.float32))

    def upsample(self, length: int) -> np.ndarray:
        """Per-sample gains, (length, E), linear interpolation between rows."""
        cp = self.control_points
        c, e = cp.shape
        if c == 1:
            return np.broadcast_to(cp, (length, e)).astype(np.float32)
        pos = np.linspace(0.0, c - 1.0, length)
        out = np.empty((length, e), dtype=np.float32)
        for col in range(e):
            out[:, col] = np.interp(pos, np.arange(c), cp[:, col])
        return out


@dataclass(frozen=True)
class BlockParams:
    resonances: tuple
    mixture: MixtureEnvelope
    dry_gain: float = 0.0
    wet_gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "resonances", tuple(self.resonances))
        if self.dry_gain < 0 or self.wet_gain < 0:
            raise InvalidInput("gains must be >= 0")
        object.__setattr__(self, "dry_gain", _f32(self.dry_gain))
        object.__setattr__(self, "wet_gain", _f32(self.wet_gain))
        if len(self.resonances) != self.mixture.control_points.shape[1]:
            raise InvalidInput("mixture columns must match resonance count")

    @property
    def expressivity(self) -> int:
        return len(self.resonances)


@dataclass(frozen=True)
class EventParams:
    burst: NoiseBurst
    blocks: tuple
    rir_index: int | None = None
    fine_shift: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise InvalidInput("an event needs at least one block")
        if self.amplitude < 0:
            raise InvalidInput("amplitude must be >= 0")
        if abs(self.fine_shift) >= HOP:
            raise InvalidInput(f"fine_shift must satisfy |shift| < {HOP}")
        object.__setattr__(self, "fine_shift", _f32(self.fine_shift))
        object.__setattr__(self, "amplitude", _f32(self.amplitude))
        if self.rir_index is not None and self.blocks[-1].expressivity != 1:
            raise InvalidInput("the bank-backed final block must have expressivity 1")


@dataclass(frozen=True)
class Event:
    """Coarse onset (frame units within a segment) plus synthesis parameters."""

    onset_frame: int
    params: EventParams

    def __post_init__(self):
        if not 0 <= self.onset_frame * HOP < SEGMENT_HALF:
            raise InvalidInput("event must begin in the first half of its segment")


def render_burst(b: NoiseBurst) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(b.seed))
    noise = rng.uniform(-1.0, 1.0, b.duration).astype(np.float32)
    n = np.arange(b.duration, dtype=np.float32)
    if b.attack > 0:
        rise = n / b.attack
    else:
        rise = np.ones_like(n)
    if b.decay > 0:
        fall = np.clip(1.0 - (n - b.attack) / b.decay, 0.0, 1.0)
    else:
        fall = np.where(n <= b.attack, 1.0, 0.0).astype(np.float32)
    env = np.where(n <= b.attack, np.minimum(rise, 1.0), fall)
    return (noise * env * b.gain).astype(np.float32)


def render_resonance(r: Resonance, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    n = np.arange(r.length, dtype=np.float64)
    out = np.zeros(r.length, dtype=np.float64)
    for p in r.partials:
        if not 0.0 < p.freq < sample_rate / 2:
            raise InvalidInput(
                f"partial frequency {p.freq} outside (0, {sample_rate / 2})")
        out += p.amp * np.exp(-p.decay_alpha * n) * np.sin(
            2.0 * np.pi * p.freq * n / sample_rate + p.phase)
    return out.astype(np.float32)


def apply_block(x: np.ndarray, p: BlockParams,
                sample_rate: int = SAMPLE_RATE,
                firs: list | None = None) -> np.ndarray:
    """One decoder block: dry/wet mix of input and its masked resonances."""
    if len(x) == 0:
        raise InvalidInput("apply_block: empty input")
    if firs is None:
        firs = [render_resonance(r, sample_rate) for r in p.resonances]
    out_len = len(x) + max(len(f) for f in firs) - 1
    mix = p.mixture.upsample(out_len)
    wet = np.zeros(out_len, dtype=np.float32)
    for e, fir in enumerate(firs):
        conv = fft_convolve(x, fir)
        wet[:len(conv)] += mix[:len(conv), e] * conv
    out = p.wet_gain * wet
    out[:len(x)] += p.dry_gain * np.asarray(x, dtype=np.float32)
    return out


class RirBank:
    """An immutable, ordered collection of room impulse responses."""

    def __init__(self, irs, names):
        self.irs = [np.asarray(ir, dtype=np.float32) for ir in irs]
        self.names = list(names)
        h = hashlib.sha256()
        for name, ir in zip(self.names, self.irs):
            h.update(name.encode("utf-8"))
            h.update(ir.tobytes())
        self.fingerprint = h.digest()[:16]

    def __len__(self) -> int:
        return len(self.irs)

    def ir(self, index: int) -> np.ndarray:
        if not 0 <= index < len(self.irs):
            raise BankError(f"no impulse response at index {index} "
                            f"(bank holds {len(self.irs)})")
        return self.irs[index]

    @classmethod
    def from_directory(cls, path, sample_rate: int = SAMPLE_RATE) -> "RirBank":
        names = sorted(f for f in os.listdir(path) if f.lower().endswith(".wav"))
        if not names:
            raise BankError(f"no .wav files in {path}")
        irs = []
        for name in names:
            pcm = wavio.read_wav(os.path.join(path, name), sample_rate)
            ir = pcm.samples
            peak = float(np.max(np.abs(ir)))
            irs.append(ir / peak if peak > 0 else ir)
        return cls(irs, names)

    @classmethod
    def synthetic(cls, count: int = 8, sample_rate: int = SAMPLE_RATE,
                  seed: int = 0xA11CE) -> "RirBank":
        """Fallback bank: exponentially decaying noise, 0.1 s to 2.0 s."""
        rng = np.random.Generator(np.random.PCG64(seed))
        decays = np.geomspace(0.1, 2.0, count)
        irs, names = [], []
        for i, t60 in enumerate(decays):
            length = int(t60 * sample_rate)
            n = np.arange(length)
            alpha = np.log(1000.0) / (t60 * sample_rate)  # -60 dB at t60
            ir = rng.uniform(-1, 1, length) * np.exp(-alpha * n)
            ir = ir.astype(np.float32)
            ir /= np.max(np.abs(ir))
            irs.append(ir)
            names.append(f"synthetic-{i}")
        return cls(irs, names)


def render_event_signal(params: EventParams, bank: RirBank | None,
                        sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """The event waveform before scheduling: burst -> blocks -> amplitude."""
    sig = render_burst(params.burst)
    last = len(params.blocks) - 1
    for i, blk in enumerate(params.blocks):
        firs = None
        if i == last and params.rir_index is not None:
            if bank is None:
                raise BankError("event references an RIR bank but none was given")
            firs = [bank.ir(params.rir_index)]
        sig = apply_block(sig, blk, sample_rate, firs)
    return sig * np.float32(params.amplitude)


def render_event(e: Event, canvas_len: int = SEGMENT_LEN,
                 bank: RirBank | None = None,
                 sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Render one event onto a fresh canvas at its coarse+fine position."""
    sig = render_event_signal(e.params, bank, sample_rate)
    canvas = np.zeros(canvas_len, dtype=np.float32)
    start = e.onset_frame * HOP
    take = min(len(sig), canvas_len - start)
    if take > 0:
        canvas[start:start + take] = sig[:take]
    if e.params.fine_shift != 0.0:
        canvas = fractional_shift(canvas, e.params.fine_shift)
    return canvas
