"""Readers and writers for the raster and annotation formats.

Everything here works on in-memory byte buffers and returns immutable
models, so the functions are safe to call from several threads at once.
"""

import json
from fractions import Fraction
from typing import List

import numpy as np
from pydantic import ValidationError

from edgeped.core.errors import (
    DomainError,
    DuplicateFrameError,
    FormatError,
    SchemaError,
    TruncationError,
    UnsupportedFormatError,
)
from edgeped.core.models import BoundingBox, Frame, FrameAnnotation, VideoSequence
from edgeped.core.utils.logger import setup_logger

logger = setup_logger(__name__)

Y4M_SIGNATURE = b"YUV4MPEG2"
FRAME_MARKER = b"FRAME"
# tags a Cmono stream may carry without changing its meaning
_IGNORED_Y4M_TAGS = {"I", "A", "X"}


def _parse_positive_int(token: str, value: str) -> int:
    if not value.isdigit() or int(value) <= 0:
        raise FormatError(f"malformed header token {token!r}")
    return int(value)


def read_y4m(data: bytes) -> VideoSequence:
    end = data.find(b"\n")
    if end < 0:
        raise FormatError("missing header newline")
    tokens = data[:end].decode("ascii", errors="replace").split(" ")
    if tokens[0] != Y4M_SIGNATURE.decode():
        raise FormatError(f"malformed header token {tokens[0]!r}")

    width = height = None
    fps_num = fps_den = None
    colorspace = None
    for token in tokens[1:]:
        if not token:
            raise FormatError("malformed header token '' (double space)")
        tag, value = token[0], token[1:]
        if tag == "W":
            width = _parse_positive_int(token, value)
        elif tag == "H":
            height = _parse_positive_int(token, value)
        elif tag == "F":
            num, sep, den = value.partition(":")
            if not sep:
                raise FormatError(f"malformed header token {token!r}")
            fps_num = _parse_positive_int(token, num)
            fps_den = _parse_positive_int(token, den)
        elif tag == "C":
            colorspace = value
        elif tag in _IGNORED_Y4M_TAGS:
            continue
        else:
            raise FormatError(f"malformed header token {token!r}")

    for name, value in (("W", width), ("H", height), ("F", fps_num)):
        if value is None:
            raise FormatError(f"header is missing the {name} parameter")
    if colorspace != "mono":
        # Y4M defaults to 4:2:0 when C is absent
        raise UnsupportedFormatError(f"colorspace C{colorspace or '420jpeg'} is not supported, need Cmono")

    frame_size = width * height
    frames = []
    pos = end + 1
    view = memoryview(data)
    while pos < len(data):
        line_end = data.find(b"\n", pos)
        marker = data[pos:line_end] if line_end >= 0 else b""
        if marker != FRAME_MARKER and not marker.startswith(FRAME_MARKER + b" "):
            raise FormatError(f"expected FRAME marker for frame {len(frames)} at byte {pos}")
        pos = line_end + 1
        if pos + frame_size > len(data):
            raise TruncationError(
                f"frame {len(frames)} has {len(data) - pos} of {frame_size} bytes"
            )
        pixels = np.frombuffer(view[pos:pos + frame_size], dtype=np.uint8).copy()
        frames.append(Frame(width=width, height=height, pixels=pixels))
        pos += frame_size

    logger.debug(f"read y4m {width}x{height} @ {fps_num}:{fps_den}, {len(frames)} frames")
    return VideoSequence(
        width=width,
        height=height,
        fps_num=fps_num,
        fps_den=fps_den,
        frames=tuple(frames),
    )


def write_y4m(seq: VideoSequence) -> bytes:
    header = f"YUV4MPEG2 W{seq.width} H{seq.height} F{seq.fps_num}:{seq.fps_den} Cmono\n"
    parts = [header.encode("ascii")]
    for frame in seq.frames:
        parts.append(FRAME_MARKER + b"\n")
        parts.append(frame.to_bytes())
    return b"".join(parts)


def _pgm_tokens(data: bytes, count: int):
    """Yield (token, end_offset) for the first ``count`` header tokens, skipping comments."""
    pos = 0
    found = 0
    while found < count:
        while pos < len(data) and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                nl = data.find(b"\n", pos)
                pos = len(data) if nl < 0 else nl + 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("PGM header ends early")
        found += 1
        yield data[start:pos].decode("ascii", errors="replace"), pos


def read_pgm(data: bytes) -> Frame:
    if data[:2] == b"P2":
        raise UnsupportedFormatError("ASCII PGM (P2) is not supported, need P5")
    if data[:2] != b"P5":
        raise FormatError(f"malformed PGM magic {data[:2]!r}")

    tokens = _pgm_tokens(data[2:], 3)
    fields = []
    end = 2
    for token, offset in tokens:
        if not token.isdigit():
            raise FormatError(f"malformed PGM header token {token!r}")
        fields.append(int(token))
        end = 2 + offset
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedFormatError(f"maxval {maxval} is not supported, need 255")
    if width <= 0 or height <= 0:
        raise FormatError(f"malformed PGM dimensions {width}x{height}")

    # exactly one whitespace byte separates maxval from the raster
    start = end + 1
    size = width * height
    if start + size > len(data):
        raise TruncationError(f"frame 0 has {max(0, len(data) - start)} of {size} bytes")
    pixels = np.frombuffer(data[start:start + size], dtype=np.uint8).copy()
    return Frame(width=width, height=height, pixels=pixels)


def write_pgm(frame: Frame) -> bytes:
    return f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii") + frame.to_bytes()


def _read_jsonl(data: bytes, require_conf: bool) -> List[FrameAnnotation]:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        line_no = data.count(b"\n", 0, e.start) + 1
        raise FormatError(f"line {line_no}: invalid UTF-8")
    annotations = {}
    for line_no, raw in enumerate(text.split("\n"), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise FormatError(f"line {line_no}: {e.msg}")

        if not isinstance(obj, dict) or "frame" not in obj or "boxes" not in obj:
            raise SchemaError(f"line {line_no}: expected an object with 'frame' and 'boxes'")
        frame_index = obj["frame"]
        if not isinstance(frame_index, int) or isinstance(frame_index, bool) or frame_index < 0:
            raise SchemaError(f"line {line_no}: 'frame' must be a non-negative integer")
        if not isinstance(obj["boxes"], list):
            raise SchemaError(f"line {line_no}: 'boxes' must be a list")
        if frame_index in annotations:
            raise DuplicateFrameError(f"frame {frame_index} appears more than once (line {line_no})")

        boxes = []
        for box in obj["boxes"]:
            if not isinstance(box, dict):
                raise SchemaError(f"line {line_no}: box must be an object")
            if require_conf and "conf" not in box:
                raise SchemaError(f"line {line_no}: detection box is missing 'conf'")
            try:
                boxes.append(BoundingBox(
                    x=box["x"], y=box["y"], w=box["w"], h=box["h"],
                    conf=box.get("conf"),
                    class_label=box.get("label", "pedestrian"),
                ))
            except KeyError as e:
                raise SchemaError(f"line {line_no}: box is missing {e.args[0]!r}")
            except ValidationError as e:
                raise SchemaError(f"line {line_no}: {e.errors()[0]['msg']}")
        annotations[frame_index] = FrameAnnotation(frame_index=frame_index, boxes=tuple(boxes))

    return [annotations[k] for k in sorted(annotations)]


def read_annotations(data: bytes) -> List[FrameAnnotation]:
    return _read_jsonl(data, require_conf=False)


def read_detections(data: bytes) -> List[FrameAnnotation]:
    return _read_jsonl(data, require_conf=True)


def write_annotations(annotations: List[FrameAnnotation]) -> bytes:
    lines = []
    for ann in sorted(annotations, key=lambda a: a.frame_index):
        boxes = []
        for box in ann.boxes:
            entry = {"x": box.x, "y": box.y, "w": box.w, "h": box.h}
            if box.conf is not None:
                entry["conf"] = box.conf
            if box.class_label != "pedestrian":
                entry["label"] = box.class_label
            boxes.append(entry)
        lines.append(json.dumps({"frame": ann.frame_index, "boxes": boxes}, separators=(",", ":")))
    return "".join(line + "\n" for line in lines).encode("utf-8")


def decimate(seq: VideoSequence, target_fps) -> VideoSequence:
    """Keep every n-th frame so a 30 fps capture becomes a 10 fps stream."""
    source = Fraction(seq.fps_num, seq.fps_den)
    target = Fraction(target_fps).limit_denominator(1001)
    if target <= 0:
        raise DomainError(f"target fps must be positive, got {target_fps}")
    ratio = source / target
    if ratio.denominator != 1 or ratio < 1:
        raise DomainError(f"cannot decimate {float(source)} fps to {float(target)} fps by an integer step")
    step = int(ratio)
    logger.info(f"decimating {len(seq)} frames by {step} ({float(source)} -> {float(target)} fps)")
    return VideoSequence(
        width=seq.width,
        height=seq.height,
        fps_num=target.numerator,
        fps_den=target.denominator,
        frames=seq.frames[::step],
    )
