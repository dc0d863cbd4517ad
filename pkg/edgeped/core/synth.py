"""Seeded synthetic footage: smooth textured backgrounds with soft
pedestrian-shaped blobs and their ground-truth boxes."""

from typing import List, Tuple

import numpy as np

from edgeped.core.boxes import intersection_area
from edgeped.core.models import BoundingBox, Frame, FrameAnnotation, VideoSequence
from edgeped.core.utils.logger import setup_logger

logger = setup_logger(__name__)

_PLACEMENT_TRIES = 100


def natural_texture(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """Low-frequency background: a gradient plus a few long-period waves."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    span = max(width, height)
    field = 128.0 + rng.uniform(-20, 20) * (xx / span - 0.5) + rng.uniform(-20, 20) * (yy / span - 0.5)
    for _ in range(3):
        angle = rng.uniform(0, np.pi)
        period = rng.uniform(2 * span, 4 * span)
        phase = rng.uniform(0, 2 * np.pi)
        amplitude = rng.uniform(4, 12)
        field += amplitude * np.sin(2 * np.pi * (xx * np.cos(angle) + yy * np.sin(angle)) / period + phase)
    return field


def _blob(width: int, height: int, box: BoundingBox, contrast: float) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    cx, cy = box.x + box.w / 2, box.y + box.h / 2
    sx, sy = box.w / 4, box.h / 4
    return contrast * np.exp(-(((xx - cx) / sx) ** 2 + ((yy - cy) / sy) ** 2) / 2)


def _place_box(rng, width, height, occupied) -> BoundingBox:
    box_w = max(2.0, round(width / 6))
    box_h = min(float(height), 2 * box_w)
    for _ in range(_PLACEMENT_TRIES):
        box = BoundingBox(
            x=float(rng.integers(0, int(width - box_w) + 1)),
            y=float(rng.integers(0, int(height - box_h) + 1)),
            w=box_w,
            h=box_h,
        )
        if all(intersection_area(box, other) == 0 for other in occupied):
            return box
    raise ValueError(f"cannot fit another {box_w}x{box_h} box into a {width}x{height} frame")


def natural_texture_frame(rng: np.random.Generator, width: int, height: int,
                          boxes: Tuple[BoundingBox, ...] = ()) -> Frame:
    field = natural_texture(rng, width, height)
    for box in boxes:
        field += _blob(width, height, box, rng.choice([-1.0, 1.0]) * rng.uniform(30, 50))
    pixels = np.clip(np.floor(field + 0.5), 0, 255).astype(np.uint8)
    return Frame(width=width, height=height, pixels=pixels)


def synthetic_scene(n_frames: int, width: int = 64, height: int = 64, fps=10, seed: int = 42,
                    boxes_per_frame: int = 1) -> Tuple[VideoSequence, List[FrameAnnotation]]:
    frames, annotations = [], []
    for index in range(n_frames):
        rng = np.random.default_rng(np.random.SeedSequence([seed % 2**64, index]))
        boxes = []
        for _ in range(boxes_per_frame):
            boxes.append(_place_box(rng, width, height, boxes))
        frames.append(natural_texture_frame(rng, width, height, tuple(boxes)))
        annotations.append(FrameAnnotation(frame_index=index, boxes=tuple(boxes)))

    logger.info(f"synthesized {n_frames} frames of {width}x{height} with {boxes_per_frame} boxes each")
    if frames:
        seq = VideoSequence.from_frames(frames, fps=fps)
    else:
        seq = VideoSequence(width=width, height=height, fps_num=int(fps), frames=())
    return seq, annotations
