"""Detector back-ends.

Two implementations share the ``Detector`` protocol:

* ``FileDetector`` replays detections produced elsewhere (a real network run)
  and applies non-max suppression per frame.
* ``DegradationDetector`` simulates a detector whose accuracy follows a
  PSNR-to-accuracy curve. Each ground-truth box is found independently with a
  probability calibrated so that the frame-level accuracy matches the curve.

Both are immutable once built. The simulated detector derives its random
stream from (seed, frame index, PSNR in 0.1 dB steps), so queries can run in
any order or in parallel and still give the same boxes.
"""

import math
from functools import lru_cache
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from edgeped.core.boxes import intersection_area, non_max_suppress
from edgeped.core.errors import ConfigError, DomainError, InfeasibleError
from edgeped.core.models import BoundingBox, DetectionResult, DetectorProfile, Frame, FrameAnnotation
from edgeped.core.utils.logger import setup_logger
from edgeped.runtime.config import DEFAULT_SEED, NMS_IOU

logger = setup_logger(__name__)

DETECTED_CONF = (0.7, 1.0)
FALSE_POSITIVE_CONF = (0.6, 0.9)
_PLACEMENT_TRIES = 50
_INF_PSNR_KEY = 2**32 - 1

SCENARIOS = {
    # sunny, few pedestrians
    "scenario1": [(30.0, 60.0), (43.0, 98.0), (56.0, 98.0)],
    # cloudy, many pedestrians
    "scenario2": [(30.0, 55.0), (43.0, 98.0), (56.0, 98.0)],
}


class Detector(Protocol):
    uses_psnr: bool

    def detect(self, frame_index: int, psnr_db: Optional[float] = None,
               frame: Optional[Frame] = None) -> DetectionResult:
        ...


def calibrate_miss_rate(target_accuracy_percent: float, boxes_per_frame: int, fp_rate: float = 0.0) -> float:
    """Per-box detection probability p with p**k * exp(-fp_rate) == target / 100."""
    if not 0 <= target_accuracy_percent <= 100:
        raise DomainError(f"target accuracy must be in [0, 100], got {target_accuracy_percent}")
    if boxes_per_frame < 0 or int(boxes_per_frame) != boxes_per_frame:
        raise DomainError(f"boxes_per_frame must be a non-negative integer, got {boxes_per_frame}")
    if fp_rate < 0:
        raise DomainError(f"fp_rate must be non-negative, got {fp_rate}")

    if boxes_per_frame == 0:
        return 1.0
    target = target_accuracy_percent / 100.0
    no_fp = math.exp(-fp_rate)
    if target > no_fp + 1e-12:
        raise InfeasibleError(
            f"target {target_accuracy_percent}% exceeds the {no_fp * 100:.2f}% "
            f"false-positive ceiling at fp_rate {fp_rate}"
        )
    return min(1.0, (target / no_fp) ** (1.0 / boxes_per_frame))


def scenario_profile(name: str, seed: int = DEFAULT_SEED, jitter_px: float = 2.0) -> DetectorProfile:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}, expected one of {sorted(SCENARIOS)}")
    return DetectorProfile(name=name, curve=SCENARIOS[name], jitter_px=jitter_px, seed=seed)


def read_profile(data: bytes) -> DetectorProfile:
    try:
        return DetectorProfile.model_validate_json(data)
    except ValidationError as e:
        raise ConfigError(f"invalid detector profile: {e.errors()[0]['msg']}")


class FileDetector:
    uses_psnr = False

    def __init__(self, detections: Sequence[FrameAnnotation], iou_threshold: float = NMS_IOU):
        self._frames: Dict[int, Tuple[BoundingBox, ...]] = {
            ann.frame_index: tuple(non_max_suppress(ann.boxes, iou_threshold))
            for ann in detections
        }
        logger.info(f"loaded detections for {len(self._frames)} frames")

    def detect(self, frame_index: int, psnr_db: Optional[float] = None,
               frame: Optional[Frame] = None) -> DetectionResult:
        return DetectionResult(frame_index=frame_index, boxes=self._frames.get(frame_index, ()))


def file_detector(detections: Sequence[FrameAnnotation]) -> FileDetector:
    return FileDetector(detections)


@lru_cache(maxsize=256)
def _warn_infeasible(accuracy: float, k: int, fp_rate: float):
    logger.warning(
        f"accuracy {accuracy:.2f}% is out of reach with {k} boxes and fp_rate {fp_rate}; "
        f"detecting every box"
    )


def _jitter_span(box: BoundingBox, jitter_px: float) -> float:
    # a tenth of the shorter side keeps a jittered box above IoU 0.5 with its source
    return min(jitter_px, min(box.w, box.h) / 10)


def psnr_key(psnr_db: float) -> int:
    if math.isinf(psnr_db):
        return _INF_PSNR_KEY
    return max(0, int(math.floor(psnr_db * 10 + 0.5)))


class DegradationDetector:
    """PSNR-conditioned stand-in for a neural pedestrian detector.

    Below the lowest curve anchor the detector behaves as at that anchor; above
    the highest it holds the plateau.
    """

    uses_psnr = True

    def __init__(self, profile: DetectorProfile, ground_truth: Sequence[FrameAnnotation],
                 frame_width: Optional[float] = None, frame_height: Optional[float] = None):
        self.profile = profile
        self._gt: Dict[int, Tuple[BoundingBox, ...]] = {a.frame_index: a.boxes for a in ground_truth}
        all_boxes = [b for boxes in self._gt.values() for b in boxes]
        self.frame_width = frame_width or max((b.x2 for b in all_boxes), default=1.0)
        self.frame_height = frame_height or max((b.y2 for b in all_boxes), default=1.0)

    def detection_probability(self, psnr_db: float, boxes_per_frame: int) -> float:
        accuracy = self.profile.accuracy_at(psnr_db)
        fp_rate = self.profile.fp_rate_at(psnr_db)
        try:
            return calibrate_miss_rate(accuracy, boxes_per_frame, fp_rate)
        except InfeasibleError:
            _warn_infeasible(accuracy, boxes_per_frame, fp_rate)
            return 1.0

    def _rng(self, frame_index: int, psnr_db: float) -> np.random.Generator:
        entropy = [self.profile.seed % 2**64, frame_index, psnr_key(psnr_db)]
        return np.random.default_rng(np.random.SeedSequence(entropy))

    def _false_positive_size(self, gt: Sequence[BoundingBox]) -> Tuple[float, float]:
        if gt:
            return (float(np.mean([b.w for b in gt])), float(np.mean([b.h for b in gt])))
        side = min(self.frame_width, self.frame_height) / 8
        return side, side

    def detect(self, frame_index: int, psnr_db: Optional[float] = None,
               frame: Optional[Frame] = None) -> DetectionResult:
        if psnr_db is None:
            raise DomainError("the degradation detector needs a PSNR value")
        gt = self._gt.get(frame_index, ())
        k = len(gt)
        p_detect = self.detection_probability(psnr_db, k)
        rng = self._rng(frame_index, psnr_db)

        # draw everything up front so the stream layout never depends on outcomes
        hits = rng.random(k) < p_detect
        jitter = rng.uniform(-1.0, 1.0, size=(k, 4))
        confs = rng.uniform(*DETECTED_CONF, size=k)
        n_false = int(rng.poisson(self.profile.fp_rate_at(psnr_db)))

        emitted: List[BoundingBox] = []
        for box, hit, offsets, conf in zip(gt, hits, jitter, confs):
            if not hit:
                continue
            # corner offsets: left, top, right, bottom
            dx1, dy1, dx2, dy2 = (offsets * _jitter_span(box, self.profile.jitter_px)).tolist()
            emitted.append(BoundingBox(
                x=box.x + dx1,
                y=box.y + dy1,
                w=box.w + dx2 - dx1,
                h=box.h + dy2 - dy1,
                conf=float(conf),
                class_label=box.class_label,
            ))

        fp_w, fp_h = self._false_positive_size(gt)
        occupied = list(gt) + emitted
        for _ in range(n_false):
            placed = self._place_false_positive(rng, fp_w, fp_h, occupied)
            if placed is not None:
                occupied.append(placed)
                emitted.append(placed)

        boxes = non_max_suppress(emitted, NMS_IOU)
        logger.debug(f"frame {frame_index} @ {psnr_db:.1f} dB: {len(boxes)} boxes for {k} GT")
        return DetectionResult(frame_index=frame_index, boxes=tuple(boxes))

    def _place_false_positive(self, rng, w, h, occupied) -> Optional[BoundingBox]:
        max_x = max(self.frame_width - w, 0.0)
        max_y = max(self.frame_height - h, 0.0)
        for _ in range(_PLACEMENT_TRIES):
            candidate = BoundingBox(
                x=float(rng.uniform(0, max_x)),
                y=float(rng.uniform(0, max_y)),
                w=w,
                h=h,
                conf=float(rng.uniform(*FALSE_POSITIVE_CONF)),
            )
            if all(intersection_area(candidate, other) == 0 for other in occupied):
                return candidate
        return None


def degradation_detector(profile: DetectorProfile, ground_truth: Sequence[FrameAnnotation],
                         frame_width: Optional[float] = None,
                         frame_height: Optional[float] = None) -> DegradationDetector:
    return DegradationDetector(profile, ground_truth, frame_width, frame_height)
