import math

import numpy as np
import pytest

from edgeped.core.errors import DomainError, EmptyInputError, ShapeError
from edgeped.core.metrics import (
    average_psnr,
    compression_ratio,
    mean_finite_psnr,
    mse,
    psnr,
    raw_size_bits,
    reduction_factor,
    required_bandwidth,
)
from edgeped.core.models import Frame, VideoSequence
from tests.conftest import make_frame


def test_identical_frames_have_infinite_psnr():
    frame = make_frame(8, 8, 50)
    assert psnr(frame, frame) == math.inf


def test_single_level_error_everywhere():
    assert psnr(make_frame(8, 8, 100), make_frame(8, 8, 101)) == pytest.approx(48.1308, abs=1e-4)


def test_one_pixel_off_by_one_in_full_hd():
    a = np.zeros((720, 1280), dtype=np.uint8)
    b = a.copy()
    b[0, 0] = 1
    assert psnr(Frame.from_array(a), Frame.from_array(b)) == pytest.approx(107.77, abs=0.01)


def test_psnr_is_symmetric():
    rng = np.random.default_rng(1)
    a = Frame.from_array(rng.integers(0, 256, (16, 16), dtype=np.uint8))
    b = Frame.from_array(rng.integers(0, 256, (16, 16), dtype=np.uint8))
    assert psnr(a, b) == psnr(b, a)
    assert mse(a, b) == mse(b, a)


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        psnr(make_frame(8, 8), make_frame(8, 16))


def test_average_excludes_identical_frames():
    seq = VideoSequence.from_frames([make_frame(8, 8, 100)] * 3, fps=10)
    recon = VideoSequence.from_frames(
        [make_frame(8, 8, 100), make_frame(8, 8, 101), make_frame(8, 8, 102)], fps=10,
    )
    avg = average_psnr(seq, recon)
    expected = (10 * math.log10(255**2) + 10 * math.log10(255**2 / 4)) / 2
    assert avg.db == pytest.approx(expected)
    assert (avg.frames, avg.excluded_frames) == (3, 1)


def test_average_of_identical_sequences_is_infinite(flat_sequence):
    avg = average_psnr(flat_sequence, flat_sequence)
    assert avg.db == math.inf
    assert avg.excluded_frames == len(flat_sequence)


def test_parallel_average_matches_serial(texture_corpus):
    noisy = VideoSequence.from_frames(
        [Frame.from_array(np.clip(f.pixels.astype(int) + 3, 0, 255)) for f in texture_corpus.frames],
        fps=texture_corpus.fps,
    )
    assert average_psnr(texture_corpus, noisy, max_workers=4) == average_psnr(texture_corpus, noisy)


def test_average_rejects_length_mismatch_and_empty(flat_sequence):
    shorter = VideoSequence.from_frames(flat_sequence.frames[:2], fps=10)
    with pytest.raises(ShapeError):
        average_psnr(flat_sequence, shorter)
    empty = VideoSequence(width=16, height=16, fps_num=10, frames=())
    with pytest.raises(EmptyInputError):
        average_psnr(empty, empty)
    with pytest.raises(EmptyInputError):
        mean_finite_psnr([])


@pytest.mark.parametrize("size_bits, duration_s, mbps", [
    (98_200_000, 10, 9.82),
    (3_100_000, 10, 0.31),
    (0, 10, 0.0),
])
def test_required_bandwidth(size_bits, duration_s, mbps):
    assert required_bandwidth(size_bits, duration_s).bandwidth_mbps == pytest.approx(mbps)


def test_bandwidth_domain():
    with pytest.raises(DomainError):
        required_bandwidth(1000, 0)
    with pytest.raises(DomainError):
        required_bandwidth(-1, 1)


def test_ratios():
    seq = VideoSequence.from_frames([make_frame(64, 64)] * 10, fps=10)
    assert raw_size_bits(seq) == 10 * 64 * 64 * 8
    assert compression_ratio(327_680, 32_768) == 10.0
    assert reduction_factor(9.82, 0.31) == pytest.approx(31.677, abs=1e-3)
    with pytest.raises(DomainError):
        compression_ratio(10, 0)


def test_psnr_matches_the_closed_form_on_random_pairs():
    rng = np.random.default_rng(31)
    for _ in range(1000):
        a = rng.integers(0, 256, (16, 16), dtype=np.uint8)
        b = rng.integers(0, 256, (16, 16), dtype=np.uint8)
        expected_mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
        if expected_mse == 0:
            continue
        value = psnr(Frame.from_array(a), Frame.from_array(b))
        assert value == pytest.approx(10 * math.log10(65025 / expected_mse), abs=1e-9)


def test_uniform_difference_of_five():
    a, b = make_frame(16, 16, 100), make_frame(16, 16, 105)
    assert mse(a, b) == 25.0
    assert psnr(a, b) == pytest.approx(34.15, abs=0.01)


def test_psnr_falls_as_noise_grows():
    rng = np.random.default_rng(12)
    base = make_frame(32, 32, 128)
    signs = rng.choice([-1, 1], size=(32, 32))
    values = [
        psnr(base, Frame.from_array((128 + signs * amplitude).astype(np.uint8)))
        for amplitude in (1, 2, 4, 8, 16, 32, 64)
    ]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))


def test_bandwidth_is_linear_in_size_and_inverse_in_time():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        size_bits = float(rng.uniform(0, 1e9))
        duration_s = float(rng.uniform(0.1, 3600))
        k = float(rng.uniform(0.1, 10))
        base = required_bandwidth(size_bits, duration_s).bandwidth_mbps
        assert base == pytest.approx(size_bits / duration_s / 1e6, rel=1e-9)
        assert required_bandwidth(k * size_bits, duration_s).bandwidth_mbps == pytest.approx(k * base, rel=1e-9)
        assert required_bandwidth(size_bits, k * duration_s).bandwidth_mbps == pytest.approx(base / k, rel=1e-9)
