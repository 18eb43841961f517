import numpy as np
import pytest

from siac import dsp, encoder, synth


@pytest.fixture(scope="session")
def bank():
    return synth.RirBank.synthetic()


@pytest.fixture(scope="session")
def fast_cfg():
    return encoder.EncoderConfig.fast()


def dictionary_event(cfg, f0_index, onset, amplitude=0.05, rir=0,
                     decay_seconds=0.5, burst_dur=256):
    """An event built from one coarse dictionary entry."""
    params = encoder.make_candidate_params(
        cfg, cfg.f0_grid[f0_index], encoder._alpha_for_decay(decay_seconds),
        burst_dur, rir, amplitude=amplitude)
    return synth.Event(onset_frame=onset, params=params)


def render_mixture(cfg, bank, placements, length=dsp.SEGMENT_LEN):
    """Sum of dictionary events; placements = [(onset_frame, f0_index), ...]."""
    out = np.zeros(dsp.SEGMENT_LEN, dtype=np.float32)
    for onset, f0_index in placements:
        ev = dictionary_event(cfg, f0_index, onset)
        out += synth.render_event(ev, bank=bank)
    return out[:length]
