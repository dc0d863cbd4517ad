import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from edgeped.core.errors import DomainError, EmptyInputError, ShapeError
from edgeped.core.models import AveragePsnr, BandwidthSample, Frame, VideoSequence

PEAK = 255.0


def _check_shapes(a: Frame, b: Frame):
    if (a.width, a.height) != (b.width, b.height):
        raise ShapeError(f"frame shapes differ: {a.width}x{a.height} vs {b.width}x{b.height}")


def mse(a: Frame, b: Frame) -> float:
    _check_shapes(a, b)
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr_from_mse(value: float) -> float:
    if value == 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / value)


def psnr(a: Frame, b: Frame) -> float:
    """PSNR in dB for 8-bit frames; ``math.inf`` when the frames are identical."""
    return psnr_from_mse(mse(a, b))


def mean_finite_psnr(values) -> AveragePsnr:
    """Mean of the finite values; infinite ones are excluded unless nothing else remains."""
    values = list(values)
    if not values:
        raise EmptyInputError("no PSNR values to average")
    finite = [v for v in values if not math.isinf(v)]
    if not finite:
        return AveragePsnr(db=math.inf, frames=len(values), excluded_frames=len(values))
    return AveragePsnr(
        db=math.fsum(finite) / len(finite),
        frames=len(values),
        excluded_frames=len(values) - len(finite),
    )


def average_psnr(orig: VideoSequence, recon: VideoSequence, max_workers: int = 1) -> AveragePsnr:
    if len(orig) != len(recon):
        raise ShapeError(f"sequence lengths differ: {len(orig)} vs {len(recon)}")
    if not orig.frames:
        raise EmptyInputError("cannot average PSNR over an empty sequence")

    pairs = list(zip(orig.frames, recon.frames))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = list(pool.map(lambda p: psnr(*p), pairs))
    else:
        values = [psnr(a, b) for a, b in pairs]
    return mean_finite_psnr(values)


def required_bandwidth(size_bits: float, duration_s: float) -> BandwidthSample:
    if duration_s <= 0:
        raise DomainError(f"duration must be positive, got {duration_s}")
    if size_bits < 0:
        raise DomainError(f"size must be non-negative, got {size_bits}")
    return BandwidthSample(size_bits=size_bits, duration_s=duration_s)


def raw_size_bits(seq: VideoSequence) -> int:
    return len(seq) * seq.width * seq.height * 8


def compression_ratio(raw_bits: float, compressed_bits: float) -> float:
    if compressed_bits <= 0:
        raise DomainError("compressed size must be positive")
    return raw_bits / compressed_bits


def reduction_factor(reference_mbps: float, selected_mbps: float) -> float:
    """How many times less bandwidth the selected operating point needs."""
    if selected_mbps <= 0:
        raise DomainError("selected bandwidth must be positive")
    return reference_mbps / selected_mbps
