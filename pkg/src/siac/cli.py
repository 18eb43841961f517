"""Command-line front door: encode, decode, inspect, filter, serve."""

import argparse
import json
import sys

import numpy as np

from . import codec, stream
from .dsp import SAMPLE_RATE, stft_mag
from .encoder import EncoderConfig, greedy_loss
from .errors import SiacError
from .stream import StreamEncoding
from .synth import RirBank, render_event_signal


def _load_bank(args) -> RirBank:
    if getattr(args, "bank", None):
        return RirBank.from_directory(args.bank)
    return RirBank.synthetic(seed=getattr(args, "seed", 0xA11CE) or 0xA11CE)


def _encoder_config(args) -> EncoderConfig:
    base = EncoderConfig.fast() if args.preset == "fast" else EncoderConfig()
    overrides = {}
    if args.steps is not None:
        overrides["max_steps"] = args.steps
    if args.stop_threshold is not None:
        overrides["stop_threshold"] = args.stop_threshold
    if args.f0_bins is not None:
        overrides["f0_grid"] = tuple(
            float(f) for f in np.geomspace(40.0, 8000.0, args.f0_bins))
    if args.seed is not None:
        overrides["noise_seed"] = args.seed
    if overrides:
        from dataclasses import replace
        base = replace(base, **overrides)
    return base


def dominant_frequency(params) -> float:
    """Frequency of the loudest partial across an event's blocks."""
    best_amp, best_freq = -1.0, 0.0
    for blk in params.blocks:
        for res in blk.resonances:
            for p in res.partials:
                if p.amp > best_amp:
                    best_amp, best_freq = p.amp, p.freq
    return best_freq


def effective_duration(params, bank: RirBank,
                       sample_rate: int = SAMPLE_RATE) -> float:
    """Seconds until the rendered event falls 60 dB below its peak."""
    sig = np.abs(render_event_signal(params, bank))
    peak = float(sig.max())
    if peak <= 0:
        return 0.0
    above = np.nonzero(sig > peak * 1e-3)[0]
    return float(above[-1] + 1) / sample_rate if len(above) else 0.0


def event_report(enc: StreamEncoding, bank: RirBank) -> list[dict]:
    return [
        {
            "index": i,
            "abs_onset_sample": ev.abs_onset_sample,
            "onset_seconds": round(ev.onset_seconds(enc.header.sample_rate), 6),
            "amplitude": ev.params.amplitude,
            "fine_shift": ev.params.fine_shift,
            "dominant_freq_hz": dominant_frequency(ev.params),
            "rir_index": ev.params.rir_index,
            "duration_seconds": round(effective_duration(ev.params, bank), 6),
        }
        for i, ev in enumerate(enc.events)
    ]


def _per_step_norms(enc: StreamEncoding, bank: RirBank) -> list[float]:
    """Greedy per-step norms of the reconstruction explained by itself."""
    if not enc.events:
        return []
    decoded = stream.decode_stream(enc, bank, ignore_fingerprint=True)
    full = stft_mag(decoded.samples)
    specs = []
    for i in range(len(enc.events)):
        one = stream.decode_stream(enc, bank, ignore_fingerprint=True,
                                   event_indices=[i])
        specs.append(stft_mag(one.samples))
    _, per_step = greedy_loss(full, specs)
    return per_step


def cmd_encode(args) -> int:
    bank = _load_bank(args)
    cfg = _encoder_config(args)
    pcm = codec.read_wav(args.input)
    enc, reports = stream.encode_stream(pcm, cfg, bank, collect_reports=True)
    with open(args.output, "wb") as f:
        f.write(codec.serialize(enc))
    if args.json:
        with open(args.output + ".json", "w") as f:
            f.write(codec.to_json(enc))
    flat = [r for seg in reports for r in seg]
    n_bytes = len(codec.serialize(enc))
    print(f"encoded {len(enc.events)} events from "
          f"{len(pcm)} samples ({len(pcm) / pcm.sample_rate:.2f} s)")
    if enc.events:
        scalars = _scalar_count(enc)
        print(f"parameter-count ratio: "
              f"{len(pcm) / scalars:.2f}x ({scalars} scalars)")
        print(f"byte ratio vs 16-bit PCM: {2 * len(pcm) / n_bytes:.2f}x "
              f"({n_bytes} bytes)")
    for r in flat:
        print(f"  step {r.step}: onset {r.onset_frame} "
              f"norm {r.pre_norm:.1f} -> {r.post_norm:.1f} "
              f"{'ok' if r.accepted else 'rejected'}", file=sys.stderr)
    return 0


def _scalar_count(enc: StreamEncoding) -> int:
    count = 0
    for ev in enc.events:
        count += 1  # time of occurrence
        count += 3  # amplitude, fine shift, rir index
        count += 5  # burst
        for blk in ev.params.blocks:
            count += 2 + blk.mixture.control_points.size
            for res in blk.resonances:
                count += 1 + 4 * len(res.partials)
    return count


def cmd_decode(args) -> int:
    bank = _load_bank(args)
    with open(args.input, "rb") as f:
        enc = codec.parse(f.read())
    pcm = stream.decode_stream(enc, bank,
                               ignore_fingerprint=args.ignore_fingerprint)
    codec.write_wav(args.output, pcm)
    print(f"decoded {len(enc.events)} events -> {args.output}")
    return 0


def cmd_inspect(args) -> int:
    bank = _load_bank(args)
    with open(args.input, "rb") as f:
        enc = codec.parse(f.read())
    h = enc.header
    report = event_report(enc, bank)
    norms = _per_step_norms(enc, bank) if args.norms else None
    if args.json:
        print(json.dumps({
            "header": codec.encoding_to_dict(enc)["header"],
            "events": report,
            "per_step_norms": norms,
        }, indent=2))
        return 0
    print(f"sample_rate {h.sample_rate}  total_samples {h.total_samples} "
          f"({h.total_samples / h.sample_rate:.2f} s)")
    print(f"segment {h.segment_len}  hop {h.hop_len}  "
          f"stft {h.stft_window}/{h.stft_hop}  prng {h.prng_id}")
    print(f"bank {h.bank_fingerprint.hex()}")
    print(f"{len(enc.events)} events")
    for r in report:
        print(f"  [{r['index']:3d}] t={r['onset_seconds']:8.3f}s "
              f"amp={r['amplitude']:.4f} f={r['dominant_freq_hz']:7.1f}Hz "
              f"rir={r['rir_index']} dur={r['duration_seconds']:.2f}s")
    if norms:
        print("per-step norms (greedy, loudest first):")
        for i, n in enumerate(norms):
            print(f"  step {i}: {n:.2f}")
    return 0


def cmd_filter(args) -> int:
    with open(args.input, "rb") as f:
        enc = codec.parse(f.read())
    sr = enc.header.sample_rate
    lo_t, hi_t = args.time_range or (0.0, float("inf"))
    lo_f, hi_f = args.freq_range or (0.0, float("inf"))

    def keep(ev):
        t = ev.abs_onset_sample / sr
        if not lo_t <= t < hi_t:
            return False
        if args.min_amplitude is not None and ev.params.amplitude < args.min_amplitude:
            return False
        if args.max_amplitude is not None and ev.params.amplitude > args.max_amplitude:
            return False
        f = dominant_frequency(ev.params)
        return lo_f <= f < hi_f

    kept = tuple(ev for ev in enc.events if keep(ev))
    out = StreamEncoding(header=enc.header, events=kept)
    with open(args.output, "wb") as f:
        f.write(codec.serialize(out))
    print(f"kept {len(kept)} of {len(enc.events)} events")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(data_dir=args.data_dir, bank_dir=args.bank,
                     preset=args.preset)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _pair(text: str) -> tuple:
    lo, hi = text.split(",")
    return float(lo), float(hi)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siac", description="sparse event-based audio codec")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--bank", help="directory of RIR .wav files")
        p.add_argument("--seed", type=int, default=None,
                       help="fixes all stochastic choices")

    p = sub.add_parser("encode", help="encode a WAV into a .siac file")
    p.add_argument("input")
    p.add_argument("output")
    common(p)
    p.add_argument("--steps", type=int, default=None,
                   help="encoder steps per segment (default 32)")
    p.add_argument("--stop-threshold", type=float, default=None,
                   help="stop when the norm falls below this fraction")
    p.add_argument("--f0-bins", type=int, default=None,
                   help="size of the fundamental-frequency search grid")
    p.add_argument("--preset", choices=["full", "fast"], default="full")
    p.add_argument("--json", action="store_true",
                   help="also write a .siac.json mirror")

    p = sub.add_parser("decode", help="render a .siac file back to WAV")
    p.add_argument("input")
    p.add_argument("output")
    common(p)
    p.add_argument("--ignore-fingerprint", action="store_true")

    p = sub.add_parser("inspect", help="print header and per-event report")
    p.add_argument("input")
    common(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--norms", action="store_true",
                   help="also compute per-step greedy norms")

    p = sub.add_parser("filter", help="keep events matching a predicate")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--time-range", type=_pair, metavar="LO,HI",
                   help="keep onsets in [LO, HI) seconds")
    p.add_argument("--freq-range", type=_pair, metavar="LO,HI",
                   help="keep dominant frequencies in [LO, HI) Hz")
    p.add_argument("--min-amplitude", type=float)
    p.add_argument("--max-amplitude", type=float)

    p = sub.add_parser("serve", help="run the editor HTTP service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--preset", choices=["full", "fast"], default="full")

    return parser


_COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "inspect": cmd_inspect,
    "filter": cmd_filter,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SiacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
