"""Sparse event-based audio codec: synthesis, greedy encoding, format, tools."""

from .dsp import (HOP, SAMPLE_RATE, SEGMENT_HALF, SEGMENT_LEN, WINDOW,
                  MagSpectrogram, Pcm, TaperWeights, fft_convolve,
                  fractional_shift, l1_norm, stft_mag)
from .encoder import (EncoderConfig, Residual, StepReport, encode_segment,
                      fit_event, greedy_loss, select_onset, subtract_event)
from .errors import (BankError, ConfigError, FormatError, InvalidInput,
                     OutOfRange, SiacError, TruncationError, ValidationError)
from .stream import (StreamEncoding, StreamEvent, StreamHeader, decode_stream,
                     encode_stream)
from .synth import (BlockParams, Event, EventParams, MixtureEnvelope,
                    NoiseBurst, Partial, Resonance, RirBank, apply_block,
                    render_burst, render_event, render_resonance)
from .codec import (compression_ratio, from_json, parse, read_wav, serialize,
                    to_json, write_wav)

__version__ = "0.1.0"
