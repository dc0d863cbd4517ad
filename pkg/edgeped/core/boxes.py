from typing import List, Sequence

import numpy as np

from edgeped.core.errors import ContractError
from edgeped.core.models import BoundingBox
from edgeped.runtime.config import NMS_IOU


def corners(boxes: Sequence[BoundingBox]) -> np.ndarray:
    """(n, 4) array of ``x1, y1, x2, y2`` rows."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([[b.x, b.y, b.x2, b.y2] for b in boxes], dtype=np.float64)


def intersection_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    width = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    height = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    return np.clip(width, 0.0, None) * np.clip(height, 0.0, None)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of two corner arrays, shape (len(a), len(b))."""
    overlap = intersection_matrix(a, b)
    # areas from the corner coordinates so a box against itself is exactly 1
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - overlap
    return np.clip(overlap / union, 0.0, 1.0)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    return float(intersection_matrix(corners([a]), corners([b]))[0, 0])


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Overlap area over union area of two axis-aligned boxes."""
    return float(iou_matrix(corners([a]), corners([b]))[0, 0])


def nms_indices(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float = NMS_IOU) -> List[int]:
    """Indices kept by greedy NMS, most confident first."""
    order = np.argsort(-scores, kind="stable")
    keep = []
    while order.size:
        best, rest = order[0], order[1:]
        keep.append(int(best))
        overlaps = iou_matrix(boxes[best:best + 1], boxes[rest])[0]
        order = rest[overlaps <= iou_threshold]
    return keep


def non_max_suppress(boxes: Sequence[BoundingBox], iou_threshold: float = NMS_IOU) -> List[BoundingBox]:
    """
    Greedily keep the most confident box and drop every remaining box that
    overlaps it by more than ``iou_threshold``; repeat until none remain.

    Ties in confidence keep input order. A box at exactly the threshold survives.
    """
    for index, box in enumerate(boxes):
        if box.conf is None:
            raise ContractError(f"box {index} has no confidence")

    scores = np.array([box.conf for box in boxes], dtype=np.float64)
    return [boxes[i] for i in nms_indices(corners(boxes), scores, iou_threshold)]
