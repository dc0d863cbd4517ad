"""Intra-only block-DCT codec with a CRF-style quality knob.

Bitstream of one frame::

    magic  b"BDC1"                     4 bytes
    width  big-endian u16              2 bytes
    height big-endian u16              2 bytes
    crf    u8                          1 byte
    blocks raster order, per 8x8 block:
        count  uvarint                 number of non-zero levels
        count x (run uvarint, level svarint)
               run   = zeros skipped in zigzag order before this level
               level = zigzag-signed quantized coefficient

Frames are padded to a multiple of 8 by edge replication before the DCT and
cropped back after decoding.
"""

import struct
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from scipy.fft import dctn, idctn

from edgeped.core.errors import BitstreamError, DomainError, EmptyInputError
from edgeped.core.models import CompressedFrame, Frame, VideoSequence
from edgeped.core.utils.logger import setup_logger
from edgeped.runtime.config import BLOCK, MAX_CRF

logger = setup_logger(__name__)

MAGIC = b"BDC1"
_HEADER = struct.Struct(">4sHHB")
HEADER_BITS = _HEADER.size * 8
_U16_MAX = 0xFFFF

# inverse zigzag: position of each raster coefficient in the scan
_ZIGZAG_INVERSE = np.array([
    [0, 1, 5, 6, 14, 15, 27, 28],
    [2, 4, 7, 13, 16, 26, 29, 42],
    [3, 8, 12, 17, 25, 30, 41, 43],
    [9, 11, 18, 24, 31, 40, 44, 53],
    [10, 19, 23, 32, 39, 45, 52, 54],
    [20, 22, 33, 38, 46, 51, 55, 60],
    [21, 34, 37, 47, 50, 56, 59, 61],
    [35, 36, 48, 49, 57, 58, 62, 63],
])
ZIGZAG = np.argsort(_ZIGZAG_INVERSE.flatten())

# flat floor plus a frequency ramp, DC lowest; max 11 keeps crf 0 at step 1
_U, _V = np.divmod(np.arange(BLOCK * BLOCK), BLOCK)
BASE_STEPS = 4.0 + (_U + _V) / 2.0


def round_half_away(values: np.ndarray) -> np.ndarray:
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def _check_crf(crf: int):
    if not isinstance(crf, (int, np.integer)) or not 0 <= crf <= MAX_CRF:
        raise DomainError(f"crf must be an integer in [0, {MAX_CRF}], got {crf!r}")


@lru_cache(maxsize=MAX_CRF + 1)
def quant_table(crf: int) -> np.ndarray:
    """Per-coefficient quantizer steps for ``crf`` as a read-only 8x8 array."""
    _check_crf(crf)
    scale = 2.0 ** ((crf - 18) / 6.0)
    steps = np.maximum(1.0, round_half_away(BASE_STEPS * scale)).reshape(BLOCK, BLOCK)
    steps.setflags(write=False)
    return steps


def quantizer_step(crf: int, coeff_index: int) -> float:
    _check_crf(crf)
    if not isinstance(coeff_index, (int, np.integer)) or not 0 <= coeff_index < BLOCK * BLOCK:
        raise DomainError(f"coeff_index must be in [0, 64), got {coeff_index!r}")
    return float(quant_table(int(crf)).flat[coeff_index])


def _write_uvarint(value: int, out: bytearray):
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _write_svarint(value: int, out: bytearray):
    _write_uvarint(value * 2 if value >= 0 else -value * 2 - 1, out)


def _read_uvarint(data: bytes, pos: int) -> Tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise BitstreamError("truncated varint")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise BitstreamError("varint longer than 64 bits")


def _read_svarint(data: bytes, pos: int) -> Tuple[int, int]:
    raw, pos = _read_uvarint(data, pos)
    return (raw >> 1) if not raw & 1 else -((raw + 1) >> 1), pos


def _padded_dims(width: int, height: int) -> Tuple[int, int]:
    return -(-width // BLOCK) * BLOCK, -(-height // BLOCK) * BLOCK


def _to_blocks(frame: Frame) -> np.ndarray:
    padded_w, padded_h = _padded_dims(frame.width, frame.height)
    arr = np.pad(
        frame.pixels.astype(np.float64),
        ((0, padded_h - frame.height), (0, padded_w - frame.width)),
        mode="edge",
    )
    rows, cols = padded_h // BLOCK, padded_w // BLOCK
    return arr.reshape(rows, BLOCK, cols, BLOCK).swapaxes(1, 2).reshape(-1, BLOCK, BLOCK)


def _from_blocks(blocks: np.ndarray, width: int, height: int) -> np.ndarray:
    padded_w, padded_h = _padded_dims(width, height)
    rows, cols = padded_h // BLOCK, padded_w // BLOCK
    arr = blocks.reshape(rows, cols, BLOCK, BLOCK).swapaxes(1, 2).reshape(padded_h, padded_w)
    return arr[:height, :width]


def encode_frame(frame: Frame, crf: int) -> CompressedFrame:
    _check_crf(crf)
    if frame.width > _U16_MAX or frame.height > _U16_MAX:
        raise DomainError(f"{frame.width}x{frame.height} exceeds the {_U16_MAX} px u16 bitstream limit")
    blocks = _to_blocks(frame) - 128.0
    coeffs = dctn(blocks, norm="ortho", axes=(1, 2))
    levels = round_half_away(coeffs / quant_table(int(crf))).astype(np.int64)
    scans = levels.reshape(-1, BLOCK * BLOCK)[:, ZIGZAG]

    out = bytearray()
    for scan in scans:
        nonzero = np.flatnonzero(scan)
        _write_uvarint(len(nonzero), out)
        prev = -1
        for index in nonzero.tolist():
            _write_uvarint(index - prev - 1, out)
            _write_svarint(int(scan[index]), out)
            prev = index

    return CompressedFrame(width=frame.width, height=frame.height, crf=int(crf), payload=bytes(out))


def _parse_levels(data: bytes, pos: int, n_blocks: int) -> Tuple[np.ndarray, int]:
    scans = np.zeros((n_blocks, BLOCK * BLOCK), dtype=np.int64)
    for block in range(n_blocks):
        count, pos = _read_uvarint(data, pos)
        if count > BLOCK * BLOCK:
            raise BitstreamError(f"block {block} declares {count} levels")
        index = -1
        for _ in range(count):
            run, pos = _read_uvarint(data, pos)
            level, pos = _read_svarint(data, pos)
            index += run + 1
            if index >= BLOCK * BLOCK:
                raise BitstreamError(f"block {block} runs past coefficient 63")
            scans[block, index] = level
    return scans, pos


def _block_count(width: int, height: int) -> int:
    padded_w, padded_h = _padded_dims(width, height)
    return (padded_w // BLOCK) * (padded_h // BLOCK)


def decode_frame(cf: CompressedFrame) -> Frame:
    scans, end = _parse_levels(cf.payload, 0, _block_count(cf.width, cf.height))
    if end != len(cf.payload):
        raise BitstreamError(f"{len(cf.payload) - end} trailing bytes after block data")

    levels = np.empty_like(scans)
    levels[:, ZIGZAG] = scans
    coeffs = levels.reshape(-1, BLOCK, BLOCK) * quant_table(cf.crf)
    blocks = idctn(coeffs, norm="ortho", axes=(1, 2)) + 128.0
    pixels = np.clip(round_half_away(_from_blocks(blocks, cf.width, cf.height)), 0, 255)
    return Frame(width=cf.width, height=cf.height, pixels=pixels.astype(np.uint8))


def pack_frame(cf: CompressedFrame) -> bytes:
    return _HEADER.pack(MAGIC, cf.width, cf.height, cf.crf) + cf.payload


def unpack_frame(data: bytes, pos: int = 0) -> Tuple[CompressedFrame, int]:
    """Parse one frame starting at ``pos``; returns the frame and the offset after it."""
    if len(data) - pos < _HEADER.size:
        raise BitstreamError("truncated header")
    magic, width, height, crf = _HEADER.unpack_from(data, pos)
    if magic != MAGIC:
        raise BitstreamError(f"bad magic {magic!r}")
    if width == 0 or height == 0 or crf > MAX_CRF:
        raise BitstreamError(f"invalid header {width}x{height} crf {crf}")
    start = pos + _HEADER.size
    _, end = _parse_levels(data, start, _block_count(width, height))
    cf = CompressedFrame(width=width, height=height, crf=crf, payload=bytes(data[start:end]))
    return cf, end


def write_bitstream(frames: List[CompressedFrame]) -> bytes:
    return b"".join(pack_frame(cf) for cf in frames)


def read_bitstream(data: bytes) -> List[CompressedFrame]:
    frames = []
    pos = 0
    while pos < len(data):
        cf, pos = unpack_frame(data, pos)
        frames.append(cf)
    return frames


def encode_sequence(seq: VideoSequence, crf: int, max_workers: int = 1) -> Tuple[List[CompressedFrame], int]:
    if not seq.frames:
        raise EmptyInputError("cannot encode an empty sequence")
    _check_crf(crf)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            compressed = list(pool.map(lambda f: encode_frame(f, crf), seq.frames))
    else:
        compressed = [encode_frame(f, crf) for f in seq.frames]

    total_bits = sum(cf.size_bits for cf in compressed)
    logger.info(f"encoded {len(compressed)} frames at crf {crf} ({total_bits} bits)")
    return compressed, total_bits


def decode_sequence(frames: List[CompressedFrame], like: VideoSequence) -> VideoSequence:
    """Decode ``frames`` into a sequence carrying the frame rate of ``like``."""
    return VideoSequence(
        width=like.width,
        height=like.height,
        fps_num=like.fps_num,
        fps_den=like.fps_den,
        frames=tuple(decode_frame(cf) for cf in frames),
    )
