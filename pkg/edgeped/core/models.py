import math
from fractions import Fraction
from typing import Annotated, List, Literal, Optional, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_serializer,
    field_validator,
    model_validator,
)

from edgeped.runtime.config import MAX_CRF

Crf = Annotated[int, Field(ge=0, le=MAX_CRF)]
IouValue = Annotated[float, Field(ge=0.0, le=1.0)]
Confidence = Annotated[float, Field(ge=0.0, le=1.0)]


def format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


def parse_psnr(text: str) -> float:
    return math.inf if text.strip() == "inf" else float(text)


class Frame(BaseModel):
    """8-bit luma raster, stored as a read-only (height, width) uint8 array."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    width: int = Field(gt=0)
    height: int = Field(gt=0)
    pixels: np.ndarray

    @field_validator("pixels", mode="before")
    @classmethod
    def coerce_pixels(cls, value):
        if isinstance(value, (bytes, bytearray, memoryview)):
            arr = np.frombuffer(bytes(value), dtype=np.uint8)
        else:
            arr = np.asarray(value)
            if arr.dtype != np.uint8:
                if arr.size and (arr.min() < 0 or arr.max() > 255):
                    raise ValueError("pixel samples must lie in [0, 255]")
                arr = arr.astype(np.uint8)
        return arr

    @model_validator(mode="after")
    def check_shape(self):
        expected = self.width * self.height
        if self.pixels.size != expected:
            raise ValueError(
                f"pixel count {self.pixels.size} does not match {self.width}x{self.height}"
            )
        arr = np.ascontiguousarray(self.pixels.reshape(self.height, self.width))
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)
        return self

    @classmethod
    def from_array(cls, arr) -> "Frame":
        arr = np.asarray(arr)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr)

    def to_bytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


class VideoSequence(BaseModel):
    model_config = ConfigDict(frozen=True)

    width: int = Field(gt=0)
    height: int = Field(gt=0)
    fps_num: int = Field(gt=0)
    fps_den: int = Field(default=1, gt=0)
    frames: Tuple[Frame, ...] = ()

    @model_validator(mode="after")
    def check_dimensions(self):
        for index, frame in enumerate(self.frames):
            if (frame.width, frame.height) != (self.width, self.height):
                raise ValueError(
                    f"frame {index} is {frame.width}x{frame.height}, "
                    f"sequence is {self.width}x{self.height}"
                )
        return self

    @classmethod
    def from_frames(cls, frames, fps=10) -> "VideoSequence":
        frames = tuple(frames)
        if not frames:
            raise ValueError("from_frames needs at least one frame to infer dimensions")
        rate = Fraction(fps).limit_denominator(1001)
        return cls(
            width=frames[0].width,
            height=frames[0].height,
            fps_num=rate.numerator,
            fps_den=rate.denominator,
            frames=frames,
        )

    @property
    def fps(self) -> float:
        return self.fps_num / self.fps_den

    @property
    def duration_s(self) -> float:
        return len(self.frames) * self.fps_den / self.fps_num

    def __len__(self) -> int:
        return len(self.frames)


class BoundingBox(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    w: float = Field(gt=0)
    h: float = Field(gt=0)
    conf: Optional[Confidence] = None
    class_label: str = "pedestrian"

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def within(self, width: float, height: float) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x2 <= width and self.y2 <= height


class FrameAnnotation(BaseModel):
    model_config = ConfigDict(frozen=True)

    frame_index: int = Field(ge=0)
    boxes: Tuple[BoundingBox, ...] = ()


class DetectionResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    frame_index: int = Field(ge=0)
    boxes: Tuple[BoundingBox, ...] = ()


class CompressedFrame(BaseModel):
    """One self-describing codec frame; ``payload`` is the entropy-coded block data."""

    model_config = ConfigDict(frozen=True)

    width: int = Field(gt=0, le=0xFFFF)
    height: int = Field(gt=0, le=0xFFFF)
    crf: Crf
    payload: bytes

    @property
    def size_bits(self) -> int:
        from edgeped.core.codec import HEADER_BITS

        return len(self.payload) * 8 + HEADER_BITS


class AveragePsnr(BaseModel):
    db: float
    frames: int = Field(ge=1)
    excluded_frames: int = Field(ge=0)


class BandwidthSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    size_bits: float = Field(ge=0)
    duration_s: float = Field(gt=0)

    @computed_field
    @property
    def bandwidth_mbps(self) -> float:
        return (self.size_bits / 1e6) / self.duration_s


class DetectorProfile(BaseModel):
    """Anchors of a PSNR-conditioned detector.

    ``curve`` maps PSNR (dB) to frame accuracy (percent); ``fp_rate`` maps PSNR
    to expected false-positive boxes per frame. Both interpolate linearly and
    hold their end values beyond the outer anchors.
    """

    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    curve: List[Tuple[float, float]]
    fp_rate: List[Tuple[float, float]] = Field(default_factory=list)
    jitter_px: float = Field(default=0.0, ge=0.0)
    seed: int = 42

    @model_validator(mode="after")
    def check_anchors(self):
        if not self.curve:
            raise ValueError("curve needs at least one anchor")
        psnrs = [p for p, _ in self.curve]
        if any(b <= a for a, b in zip(psnrs, psnrs[1:])):
            raise ValueError("curve anchor PSNR values must be strictly increasing")
        accs = [a for _, a in self.curve]
        if any(a < 0 or a > 100 for a in accs):
            raise ValueError("curve accuracies must lie in [0, 100]")
        if any(b < a for a, b in zip(accs, accs[1:])):
            raise ValueError("curve accuracy must be non-decreasing in PSNR")
        fp_psnrs = [p for p, _ in self.fp_rate]
        if any(b <= a for a, b in zip(fp_psnrs, fp_psnrs[1:])):
            raise ValueError("fp_rate anchor PSNR values must be strictly increasing")
        if any(r < 0 for _, r in self.fp_rate):
            raise ValueError("fp_rate must be non-negative")
        return self

    def accuracy_at(self, psnr_db: float) -> float:
        xs, ys = zip(*self.curve)
        return float(np.interp(min(psnr_db, xs[-1]), xs, ys))

    def fp_rate_at(self, psnr_db: float) -> float:
        if not self.fp_rate:
            return 0.0
        xs, ys = zip(*self.fp_rate)
        return float(np.interp(min(psnr_db, xs[-1]), xs, ys))


class MatchedPair(BaseModel):
    gt: BoundingBox
    det: BoundingBox
    iou: IouValue


class FrameVerdict(BaseModel):
    frame_index: int = 0
    matched_pairs: List[MatchedPair] = Field(default_factory=list)
    false_negatives: int = Field(ge=0)
    false_positives: int = Field(ge=0)
    correct: bool


class AccuracyResult(BaseModel):
    correct_frames: int = Field(ge=0)
    total_frames: int = Field(ge=1)

    @model_validator(mode="after")
    def check_counts(self):
        if self.correct_frames > self.total_frames:
            raise ValueError("correct_frames cannot exceed total_frames")
        return self

    @computed_field
    @property
    def accuracy_percent(self) -> float:
        return self.correct_frames / self.total_frames * 100


class SweepRecord(BaseModel):
    crf: Crf
    avg_psnr: float
    accuracy: AccuracyResult
    bandwidth: BandwidthSample

    @field_serializer("avg_psnr")
    def serialize_psnr(self, value: float):
        return "inf" if math.isinf(value) else value

    def to_summary(self) -> dict:
        return {
            "crf": self.crf,
            "avg_psnr_db": "inf" if math.isinf(self.avg_psnr) else self.avg_psnr,
            "accuracy_percent": self.accuracy.accuracy_percent,
            "correct_frames": self.accuracy.correct_frames,
            "total_frames": self.accuracy.total_frames,
            "size_bits": self.bandwidth.size_bits,
            "duration_s": self.bandwidth.duration_s,
            "bandwidth_mbps": self.bandwidth.bandwidth_mbps,
        }


class LinkConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    capacity_mbps: float = Field(gt=0)
    fps: float = Field(gt=0)
    queue_limit_bits: Optional[float] = Field(default=None, gt=0)
    latency_budget_s: float = Field(gt=0)

    @property
    def capacity_bps(self) -> float:
        return self.capacity_mbps * 1e6


class ControllerPolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Literal["fixed", "adaptive"] = "fixed"
    crf: Optional[Crf] = None
    psnr_floor_db: Optional[float] = None
    step_up: int = Field(default=3, ge=1, le=MAX_CRF)
    step_down: int = Field(default=3, ge=1, le=MAX_CRF)
    initial_crf: Crf = 18

    @model_validator(mode="after")
    def validate_mode(self):
        if self.mode == "fixed":
            if self.crf is None:
                raise ValueError("crf is required for fixed mode")
        elif self.mode == "adaptive":
            if self.psnr_floor_db is None:
                raise ValueError("psnr_floor_db is required for adaptive mode")
            # crf 0 only guarantees 48.13 dB
            if not 0 <= self.psnr_floor_db <= 48.0:
                raise ValueError("psnr_floor_db must lie in [0, 48] dB")
        return self

    @classmethod
    def parse(cls, text: str, **kwargs) -> "ControllerPolicy":
        mode, _, value = text.partition(":")
        if mode == "fixed" and value:
            return cls(mode="fixed", crf=int(value), **kwargs)
        if mode == "adaptive" and value:
            return cls(mode="adaptive", psnr_floor_db=float(value), **kwargs)
        raise ValueError(f"policy must be fixed:N or adaptive:FLOOR, got {text!r}")


class FrameTrace(BaseModel):
    frame: int
    produced_t: float
    delivered_t: Optional[float] = None
    latency_s: Optional[float] = None
    crf: Crf
    psnr_db: float
    size_bits: int
    dropped: bool = False

    @field_serializer("psnr_db")
    def serialize_psnr(self, value: float):
        return "inf" if math.isinf(value) else value


class StreamReport(BaseModel):
    produced_frames: int = Field(ge=0)
    delivered_frames: int = Field(ge=0)
    dropped_frames: int = Field(ge=0)
    mean_latency_s: Optional[float] = None
    max_latency_s: Optional[float] = None
    max_queue_frames: int = 0
    mean_crf_used: Optional[float] = None
    mean_psnr_db: Optional[float] = None
    achieved_accuracy_estimate: Optional[float] = None
    total_bits: int = 0
    duration_s: float = 0.0
    # per-frame rows; written to the trace CSV, kept out of the JSON report
    trace: List[FrameTrace] = Field(default_factory=list, exclude=True)

    @field_serializer("mean_psnr_db")
    def serialize_psnr(self, value: Optional[float]):
        if value is not None and math.isinf(value):
            return "inf"
        return value

    @model_validator(mode="after")
    def check_conservation(self):
        if self.delivered_frames + self.dropped_frames != self.produced_frames:
            raise ValueError("delivered + dropped must equal produced frames")
        return self
