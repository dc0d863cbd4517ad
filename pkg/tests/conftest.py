import numpy as np
import pytest

from edgeped.core.metrics import required_bandwidth
from edgeped.core.models import AccuracyResult, BoundingBox, Frame, SweepRecord, VideoSequence
from edgeped.core.synth import synthetic_scene


def make_frame(width, height, value=128):
    return Frame(width=width, height=height, pixels=np.full((height, width), value, dtype=np.uint8))


def random_frame(rng, width=32, height=32):
    return Frame.from_array(rng.integers(0, 256, size=(height, width), dtype=np.uint8))


def make_record(crf, psnr_db, correct, total, bandwidth_mbps, duration_s=10.0):
    return SweepRecord(
        crf=crf,
        avg_psnr=psnr_db,
        accuracy=AccuracyResult(correct_frames=correct, total_frames=total),
        bandwidth=required_bandwidth(bandwidth_mbps * 1e6 * duration_s, duration_s),
    )


def box(x, y, w, h, conf=None):
    return BoundingBox(x=x, y=y, w=w, h=h, conf=conf)


@pytest.fixture(scope="session")
def texture_scene():
    return synthetic_scene(100, 64, 64, fps=10, seed=7)


@pytest.fixture(scope="session")
def texture_corpus(texture_scene):
    return texture_scene[0]


@pytest.fixture
def flat_sequence():
    return VideoSequence.from_frames([make_frame(16, 16) for _ in range(5)], fps=10)


@pytest.fixture
def measured_records():
    """Operating points from a field measurement: crf, PSNR, accuracy, Mbits/sec."""
    return [
        make_record(0, 56.0, 98, 100, 9.82),
        make_record(10, 49.0, 98, 100, 1.63),
        make_record(20, 43.0, 98, 100, 0.31),
        make_record(30, 41.0, 95, 100, 0.25),
    ]
