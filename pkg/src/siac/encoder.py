"""Greedy analysis-by-synthesis encoder.

Each step picks the loudest first-half column of the residual magnitude
spectrogram, fits event parameters that explain as much of the residual
as possible, subtracts the fitted event's spectrogram (clamped at zero)
and repeats, up to a fixed step budget.

Fitting is two-phase.  A coarse phase scores every entry of a fixed
candidate dictionary (burst duration x fundamental x decay rate, with
the best survivors re-scored against each impulse response in the bank).
Candidate spectrogram templates are precomputed once per configuration
and scored at reduced resolution first, so a step costs milliseconds
rather than thousands of renders.  A refinement phase then runs
derivative-free golden-section descent on the continuous parameters.
Amplitude always has a closed-form weighted least-squares fit.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dsp import (BINS, FRAMES_PER_HALF, FRAMES_PER_SEGMENT, HOP,
                  SAMPLE_RATE, SEGMENT_LEN, WINDOW, MagSpectrogram,
                  TaperWeights, fractional_shift, stft_mag, weighted_l1)
from .errors import ConfigError, InvalidInput
from .synth import (DEFAULT_FIR_LEN, PASSTHROUGH, BlockParams, Event,
                    EventParams, MixtureEnvelope, NoiseBurst, Partial,
                    Resonance, RirBank, apply_block, render_burst,
                    render_event_signal)

SILENCE_FLOOR = 1e-6  # per-bin; a column is "silent" below floor * bins

# template spectrograms carry this many zero-prefix frames so that the
# analysis window's leading taps over the event onset are represented
PREFIX_FRAMES = WINDOW // HOP

# pooling factors for the reduced-resolution coarse scoring pass
POOL_BINS = 8
POOL_FRAMES = 4


@dataclass(frozen=True)
class EncoderConfig:
    max_steps: int = 32
    stop_threshold: float = 0.0
    f0_grid: tuple = field(default_factory=lambda: tuple(
        float(f) for f in np.geomspace(40.0, 8000.0, 64)))
    decay_grid: tuple = (0.05, 0.1, 0.25, 0.5, 1.0, 2.0)  # seconds to -60 dB
    burst_durations: tuple = (64, 256, 1024)
    rir_indices: tuple | None = None  # None = every bank entry
    refine_iters: int = 3
    fir_length: int = DEFAULT_FIR_LEN
    noise_seed: int = 1234
    coarse_keep: int = 6      # survivors re-scored against the RIR bank
    rir_dry: float = 1.0
    rir_wet: float = 0.25

    def __post_init__(self):
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if not 0.0 <= self.stop_threshold < 1.0:
            raise ConfigError("stop_threshold must be in [0, 1)")
        if not self.f0_grid or not self.decay_grid or not self.burst_durations:
            raise ConfigError("dictionary grids must be non-empty")
        if any(not 0.0 < f < SAMPLE_RATE / 2 for f in self.f0_grid):
            raise ConfigError("f0 grid must lie inside (0, nyquist)")

    @classmethod
    def fast(cls, **overrides) -> "EncoderConfig":
        """A small dictionary for tests and interactive use."""
        defaults = dict(
            f0_grid=tuple(float(f) for f in np.geomspace(60.0, 4000.0, 12)),
            decay_grid=(0.1, 0.5, 1.5),
            burst_durations=(256,),
            rir_indices=(0, 4),
            refine_iters=1,
            fir_length=1 << 13,
            coarse_keep=3,
        )
        defaults.update(overrides)
        return cls(**defaults)


@dataclass
class StepReport:
    step: int
    onset_frame: int
    pre_norm: float
    post_norm: float
    params: EventParams | None
    accepted: bool


@dataclass
class Residual:
    """The not-yet-explained part of a segment's magnitude spectrogram."""

    spec: np.ndarray          # (bins, frames) float32, always >= 0
    frame_weights: np.ndarray
    initial_norm: float

    @classmethod
    def from_spectrogram(cls, s: MagSpectrogram,
                         taper: TaperWeights | None = None) -> "Residual":
        taper = taper or TaperWeights.for_segment()
        fw = taper.frame_weights(s.frames, s.hop, s.window)
        values = s.values.copy()
        return cls(spec=values, frame_weights=fw,
                   initial_norm=weighted_l1(values, fw))

    @property
    def norm(self) -> float:
        return weighted_l1(self.spec, self.frame_weights)


def select_onset(r: Residual) -> int | None:
    """Loudest first-half frame of the residual, or None if all silent."""
    half = min(FRAMES_PER_HALF, r.spec.shape[1])
    cols = r.spec[:, :half].sum(axis=0)
    if cols.max(initial=0.0) < SILENCE_FLOOR * r.spec.shape[0]:
        return None
    return int(np.argmax(cols))


def subtract_event(r: Residual, ev_spec: MagSpectrogram | np.ndarray) -> Residual:
    values = ev_spec.values if isinstance(ev_spec, MagSpectrogram) else ev_spec
    if values.shape != r.spec.shape:
        raise InvalidInput(f"shape mismatch: {values.shape} vs {r.spec.shape}")
    out = np.maximum(r.spec - values, 0.0).astype(np.float32)
    return Residual(spec=out, frame_weights=r.frame_weights,
                    initial_norm=r.initial_norm)


def _alpha_for_decay(seconds: float, sample_rate: int = SAMPLE_RATE) -> float:
    """Per-sample exponential rate reaching -60 dB after `seconds`."""
    return math.log(1000.0) / max(seconds * sample_rate, 1.0)


def make_candidate_params(cfg: EncoderConfig, f0: float, alpha: float,
                          burst_dur: int, rir_index: int | None,
                          amplitude: float = 1.0,
                          fine_shift: float = 0.0,
                          rir_wet: float | None = None) -> EventParams:
    """Assemble explicit event parameters for one dictionary candidate."""
    burst = NoiseBurst(duration=burst_dur, attack=max(1, burst_dur // 8),
                       decay=burst_dur - max(1, burst_dur // 8),
                       gain=1.0, seed=cfg.noise_seed)
    tone = BlockParams(
        resonances=(Resonance((Partial(f0, 1.0, alpha, 0.0),),
                              length=cfg.fir_length),),
        mixture=MixtureEnvelope.constant(1),
        dry_gain=0.0, wet_gain=1.0)
    blocks = [tone]
    if rir_index is not None:
        blocks.append(BlockParams(
            resonances=(PASSTHROUGH,),
            mixture=MixtureEnvelope.constant(1),
            dry_gain=cfg.rir_dry,
            wet_gain=cfg.rir_wet if rir_wet is None else rir_wet))
    return EventParams(burst=burst, blocks=tuple(blocks),
                       rir_index=rir_index, fine_shift=fine_shift,
                       amplitude=amplitude)


def _template_spectrogram(signal: np.ndarray, fine_shift: float = 0.0,
                          max_frames: int | None = None) -> np.ndarray:
    """Magnitude spectrogram of an event signal with a zero-frame prefix.

    Because onsets are hop-aligned, column j of this template equals
    column (onset_frame - PREFIX_FRAMES + j) of the full-canvas
    spectrogram of the scheduled event.
    """
    buf = np.zeros(PREFIX_FRAMES * HOP + len(signal) + HOP, dtype=np.float32)
    buf[PREFIX_FRAMES * HOP:PREFIX_FRAMES * HOP + len(signal)] = signal
    if fine_shift != 0.0:
        buf = fractional_shift(buf, fine_shift)
    spec = stft_mag(buf).values
    if max_frames is not None and spec.shape[1] > max_frames:
        spec = spec[:, :max_frames]
    return spec


def _pool(spec: np.ndarray) -> np.ndarray:
    """Mean-pool (bins, frames) by (POOL_BINS, POOL_FRAMES) for coarse scoring."""
    b, f = spec.shape
    bb = b - b % POOL_BINS
    ff = f - f % POOL_FRAMES
    if ff == 0:  # very short template: pad to one pooled frame
        pad = np.zeros((b, POOL_FRAMES), dtype=spec.dtype)
        pad[:, :f] = spec
        spec, ff = pad, POOL_FRAMES
    core = spec[:bb, :ff].reshape(bb // POOL_BINS, POOL_BINS,
                                  ff // POOL_FRAMES, POOL_FRAMES)
    return core.mean(axis=(1, 3))


class _Dictionary:
    """Precomputed candidate signals and pooled templates for one config."""

    def __init__(self, cfg: EncoderConfig, bank: RirBank):
        self.cfg = cfg
        self.bank = bank
        self.rir_indices = (tuple(cfg.rir_indices)
                            if cfg.rir_indices is not None
                            else tuple(range(len(bank))))
        if not all(0 <= i < len(bank) for i in self.rir_indices):
            raise ConfigError("rir_indices outside the bank")
        self.entries = [(d, f, _alpha_for_decay(s))
                        for d in cfg.burst_durations
                        for f in cfg.f0_grid
                        for s in cfg.decay_grid]
        self._signals: dict = {}
        self._full_specs: dict = {}
        self._build_pooled()

    def _tone_signal(self, burst_dur: int, f0: float, alpha: float) -> np.ndarray:
        key = (burst_dur, f0, alpha)
        sig = self._signals.get(key)
        if sig is None:
            params = make_candidate_params(self.cfg, f0, alpha, burst_dur, None)
            sig = render_event_signal(params, None)
            self._signals[key] = sig
        return sig

    def _build_pooled(self):
        pooled = []
        for (d, f, a) in self.entries:
            spec = _template_spectrogram(self._tone_signal(d, f, a))
            pooled.append(_pool(spec))
        max_f = max(p.shape[1] for p in pooled)
        bank_arr = np.zeros((len(pooled), pooled[0].shape[0], max_f),
                            dtype=np.float32)
        for i, p in enumerate(pooled):
            bank_arr[i, :, :p.shape[1]] = p
        self.pooled = bank_arr  # (n_entries, pooled_bins, pooled_frames)

    def full_spec(self, entry: int, rir_index: int | None) -> np.ndarray:
        key = (entry, rir_index)
        spec = self._full_specs.get(key)
        if spec is None:
            d, f, a = self.entries[entry]
            sig = self._tone_signal(d, f, a)
            if rir_index is not None:
                params = make_candidate_params(self.cfg, f, a, d, rir_index)
                sig = apply_block(sig, params.blocks[-1], SAMPLE_RATE,
                                  [self.bank.ir(rir_index)])
            spec = _template_spectrogram(sig, max_frames=FRAMES_PER_SEGMENT)
            if len(self._full_specs) > 512:
                self._full_specs.clear()
            self._full_specs[key] = spec
        return spec


_dictionary_cache: dict = {}


def _get_dictionary(cfg: EncoderConfig, bank: RirBank) -> _Dictionary:
    key = (cfg, bank.fingerprint)
    d = _dictionary_cache.get(key)
    if d is None:
        d = _Dictionary(cfg, bank)
        _dictionary_cache.clear()
        _dictionary_cache[key] = d
    return d


def _score_template(residual: Residual, template: np.ndarray,
                    onset_frame: int, total: float) -> tuple:
    """Weighted-LS amplitude plus the clamped post-subtraction norm."""
    start = onset_frame - PREFIX_FRAMES
    t0 = max(0, -start)
    c0 = start + t0
    width = min(template.shape[1] - t0, residual.spec.shape[1] - c0)
    if width <= 0:
        return 0.0, total
    T = template[:, t0:t0 + width].astype(np.float64)
    R = residual.spec[:, c0:c0 + width].astype(np.float64)
    w = residual.frame_weights[c0:c0 + width]
    denom = float(((T * T).sum(axis=0) * w).sum())
    if denom <= 0.0:
        return 0.0, total
    amp = float(((R * T).sum(axis=0) * w).sum()) / denom
    if amp <= 0.0:
        return 0.0, total
    before = float((R.sum(axis=0) * w).sum())
    after = float((np.maximum(R - amp * T, 0.0).sum(axis=0) * w).sum())
    return amp, total - before + after


def _coarse_scores(residual: Residual, dico: _Dictionary,
                   onset_frame: int, total: float) -> np.ndarray:
    """Score all dictionary entries at pooled resolution; lower is better."""
    pooled_res = _pool(residual.spec)
    pw = residual.frame_weights[:residual.spec.shape[1]
                                - residual.spec.shape[1] % POOL_FRAMES]
    pw = pw.reshape(-1, POOL_FRAMES).mean(axis=1)
    start = (onset_frame - PREFIX_FRAMES) // POOL_FRAMES
    T = dico.pooled  # (n, b, f)
    t0 = max(0, -start)
    c0 = start + t0
    width = min(T.shape[2] - t0, pooled_res.shape[1] - c0)
    if width <= 0:
        return np.full(T.shape[0], np.inf)
    Ts = T[:, :, t0:t0 + width].astype(np.float64)
    R = pooled_res[:, c0:c0 + width].astype(np.float64)
    w = pw[c0:c0 + width]
    denom = ((Ts * Ts).sum(axis=1) * w).sum(axis=1)
    num = ((Ts * R[None, :, :]).sum(axis=1) * w).sum(axis=1)
    amp = np.where(denom > 0, np.maximum(num / np.maximum(denom, 1e-30), 0.0), 0.0)
    before = float((R.sum(axis=0) * w).sum())
    diff = np.maximum(R[None, :, :] - amp[:, None, None] * Ts, 0.0)
    after = (diff.sum(axis=1) * w).sum(axis=1)
    return after - before  # relative score; constant offset dropped


def _golden_section(fun, lo: float, hi: float, evals: int = 6,
                    x0: float | None = None) -> tuple:
    """Minimize a 1-D function on [lo, hi]; returns (x, f(x)).

    When `x0` is given the search never returns anything worse than it,
    so refining an already-exact parameter cannot degrade the fit.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    best = (c, fc) if fc <= fd else (d, fd)
    if x0 is not None:
        f0 = fun(x0)
        if f0 <= best[1]:
            best = (x0, f0)
    for _ in range(max(evals - 2, 0)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
            if fc < best[1]:
                best = (c, fc)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
            if fd < best[1]:
                best = (d, fd)
    return best


def fit_event(r: Residual, onset_frame: int, cfg: EncoderConfig,
              bank: RirBank) -> tuple:
    """Fit parameters for one event near the given onset.

    Returns (EventParams, post_norm, fitted_onset_frame).  The argmax
    column trails the true attack by up to two frames, so the position
    search covers anchors {onset-2, onset-1, onset} combined with a
    sub-frame fractional shift; the winning anchor is returned and
    post_norm is the weighted L1 after subtracting the fitted event.
    """
    dico = _get_dictionary(cfg, bank)
    total = r.norm

    scores = _coarse_scores(r, dico, onset_frame, total)
    order = np.argsort(scores, kind="stable")[:cfg.coarse_keep]

    best = None  # (post, entry, rir, amp)
    for entry in order:
        for rir in dico.rir_indices:
            amp, post = _score_template(r, dico.full_spec(int(entry), rir),
                                        onset_frame, total)
            cand = (post, int(entry), rir, amp)
            if best is None or cand[0] < best[0]:
                best = cand
    if best is None:
        raise ConfigError("empty candidate dictionary")

    post, entry, rir, amp = best
    burst_dur, f0, alpha = dico.entries[entry]

    if amp == 0.0:  # nothing to explain at this onset; skip refinement
        params = make_candidate_params(cfg, f0, alpha, burst_dur, rir,
                                       amplitude=0.0)
        return params, total, onset_frame

    rir_block = BlockParams(resonances=(PASSTHROUGH,),
                            mixture=MixtureEnvelope.constant(1),
                            dry_gain=cfg.rir_dry, wet_gain=cfg.rir_wet)

    def make_sig(f0_, alpha_):
        tone = make_candidate_params(cfg, f0_, alpha_, burst_dur, None)
        sig = render_event_signal(tone, None)
        return apply_block(sig, rir_block, SAMPLE_RATE, [bank.ir(rir)])

    def score_sig(sig, shift_, anchor_):
        spec = _template_spectrogram(sig, shift_, FRAMES_PER_SEGMENT)
        return _score_template(r, spec, anchor_, total)

    anchors = [a for a in (onset_frame, onset_frame - 1, onset_frame - 2)
               if a >= 0]
    sig = make_sig(f0, alpha)
    anchor, fine_shift = onset_frame, 0.0
    for s in np.arange(-(HOP - 32.0), HOP - 31.0, 32.0):
        spec = _template_spectrogram(sig, float(s), FRAMES_PER_SEGMENT)
        for a in anchors:
            _, p = _score_template(r, spec, a, total)
            if p < post:
                post, anchor, fine_shift = p, a, float(s)

    nyquist = SAMPLE_RATE / 2.0
    for _ in range(cfg.refine_iters):
        span = 1.12
        x, _ = _golden_section(
            lambda lf: score_sig(make_sig(math.exp(lf), alpha),
                                 fine_shift, anchor)[1],
            math.log(max(f0 / span, 20.0)),
            math.log(min(f0 * span, nyquist * 0.99)),
            x0=math.log(f0))
        f0 = math.exp(x)
        x, _ = _golden_section(
            lambda la: score_sig(make_sig(f0, math.exp(la)),
                                 fine_shift, anchor)[1],
            math.log(alpha / 2.0), math.log(alpha * 2.0),
            x0=math.log(alpha))
        alpha = math.exp(x)
        sig = make_sig(f0, alpha)
        x, _ = _golden_section(
            lambda s: score_sig(sig, s, anchor)[1],
            max(fine_shift - 48.0, -(HOP - 1.0)),
            min(fine_shift + 48.0, HOP - 1.0),
            x0=fine_shift)
        fine_shift = x
    amp, post = score_sig(make_sig(f0, alpha), fine_shift, anchor)

    params = make_candidate_params(cfg, f0, alpha, burst_dur, rir,
                                   amplitude=amp, fine_shift=fine_shift)
    return params, min(post, total), anchor


def event_spectrogram(ev: Event, bank: RirBank,
                      frames: int = FRAMES_PER_SEGMENT) -> np.ndarray:
    """Full-canvas magnitude spectrogram of one scheduled event."""
    sig = render_event_signal(ev.params, bank)
    template = _template_spectrogram(sig, ev.params.fine_shift)
    out = np.zeros((BINS, frames), dtype=np.float32)
    start = ev.onset_frame - PREFIX_FRAMES
    t0 = max(0, -start)
    c0 = start + t0
    width = min(template.shape[1] - t0, frames - c0)
    if width > 0:
        out[:, c0:c0 + width] = template[:, t0:t0 + width]
    return out


def encode_segment(x, cfg: EncoderConfig, bank: RirBank,
                   initial_subtract: np.ndarray | None = None) -> tuple:
    """Greedily encode one 2^17-sample segment.

    Returns (events, reports).  `initial_subtract` is an optional
    spectrogram of already-explained content (tails of events emitted
    for earlier segments) removed from the residual before step one.
    """
    samples = np.asarray(x.samples if hasattr(x, "samples") else x,
                         dtype=np.float32)
    if len(samples) != SEGMENT_LEN:
        raise InvalidInput(f"segment must be exactly {SEGMENT_LEN} samples")
    spec = stft_mag(samples)
    residual = Residual.from_spectrogram(spec)
    if initial_subtract is not None:
        residual = subtract_event(residual, initial_subtract)
        residual.initial_norm = residual.norm

    events: list[Event] = []
    reports: list[StepReport] = []
    for step in range(cfg.max_steps):
        pre = residual.norm
        if pre <= cfg.stop_threshold * residual.initial_norm:
            break
        onset = select_onset(residual)
        if onset is None:
            break
        params, _, onset = fit_event(residual, onset, cfg, bank)
        if params.amplitude == 0.0:
            # nothing in the dictionary reduces the residual here
            break
        ev = Event(onset_frame=onset, params=params)
        ev_spec = event_spectrogram(ev, bank, frames=spec.frames)
        post = weighted_l1(np.maximum(residual.spec - ev_spec, 0.0),
                           residual.frame_weights)
        if post > pre:
            reports.append(StepReport(step, onset, pre, post, params, False))
            break
        residual = subtract_event(residual, ev_spec)
        events.append(ev)
        reports.append(StepReport(step, onset, pre, post, params, True))
    return events, reports


def greedy_loss(input_spec: MagSpectrogram, event_specs,
                taper: TaperWeights | None = None) -> tuple:
    """Subtract event spectrograms in descending-L1 order; score what's left.

    Returns (total, per_step): the weighted L1 of the final residual and
    the weighted L1 after each subtraction.
    """
    taper = taper or TaperWeights.for_segment()
    fw = taper.frame_weights(input_spec.frames, input_spec.hop,
                             input_spec.window)
    specs = [s.values if isinstance(s, MagSpectrogram) else np.asarray(s)
             for s in event_specs]
    for s in specs:
        if s.shape != input_spec.values.shape:
            raise InvalidInput("event spectrogram shape mismatch")
    # canonical order: loudest first, ties broken by content for determinism
    specs = sorted(specs, key=lambda s: (-float(s.sum(dtype=np.float64)),
                                         s.tobytes()))
    residual = input_spec.values.astype(np.float64)
    per_step = []
    for s in specs:
        residual = np.maximum(residual - s, 0.0)
        per_step.append(float((residual.sum(axis=0) * fw).sum()))
    total = float((residual.sum(axis=0) * fw).sum())
    return total, per_step
