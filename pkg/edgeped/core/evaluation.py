"""Frame matching, the accuracy equation, quality sweeps and threshold search."""

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence

from edgeped.core import codec
from edgeped.core.boxes import corners, iou_matrix
from edgeped.core.detector import Detector
from edgeped.core.errors import CoverageError, EmptyInputError, FormatError, InfeasibleError
from edgeped.core.metrics import average_psnr, required_bandwidth
from edgeped.core.models import (
    AccuracyResult,
    BoundingBox,
    FrameAnnotation,
    FrameVerdict,
    MatchedPair,
    SweepRecord,
    VideoSequence,
    format_psnr,
    parse_psnr,
)
from edgeped.core.utils.logger import setup_logger
from edgeped.runtime.config import MATCH_IOU

logger = setup_logger(__name__)

SWEEP_COLUMNS = [
    "crf",
    "avg_psnr_db",
    "accuracy_percent",
    "correct_frames",
    "total_frames",
    "size_bits",
    "duration_s",
    "bandwidth_mbps",
]


def match_frame(gt: Sequence[BoundingBox], det: Sequence[BoundingBox], match_iou: float = MATCH_IOU,
                frame_index: int = 0, allow_fp: bool = False) -> FrameVerdict:
    """Greedy matching: detections in descending confidence each claim the
    unmatched GT box they overlap most, if that overlap reaches ``match_iou``.

    A frame is correct when every GT box is matched and, unless ``allow_fp``,
    no detection is left over.
    """
    order = sorted(range(len(det)), key=lambda i: -(det[i].conf if det[i].conf is not None else 1.0))
    overlaps = iou_matrix(corners(gt), corners(det))
    unmatched_gt = set(range(len(gt)))
    pairs = []
    for di in order:
        best, best_iou = None, -1.0
        # IoU ties go to the GT box whose geometry sorts first, never to list order
        for gi in sorted(unmatched_gt, key=lambda g: (gt[g].x, gt[g].y, gt[g].w, gt[g].h)):
            value = float(overlaps[gi, di])
            if value > best_iou:
                best, best_iou = gi, value
        if best is not None and best_iou >= match_iou:
            unmatched_gt.discard(best)
            pairs.append(MatchedPair(gt=gt[best], det=det[di], iou=best_iou))

    false_negatives = len(unmatched_gt)
    false_positives = len(det) - len(pairs)
    correct = false_negatives == 0 and (allow_fp or false_positives == 0)
    return FrameVerdict(
        frame_index=frame_index,
        matched_pairs=pairs,
        false_negatives=false_negatives,
        false_positives=false_positives,
        correct=correct,
    )


def accuracy(verdicts: Sequence[FrameVerdict]) -> AccuracyResult:
    if not verdicts:
        raise EmptyInputError("no frame verdicts to score")
    return AccuracyResult(
        correct_frames=sum(1 for v in verdicts if v.correct),
        total_frames=len(verdicts),
    )


def check_coverage(seq: VideoSequence, gt: Sequence[FrameAnnotation]):
    """Every frame of ``seq`` needs an annotation and every box must fit the frame."""
    indices = {a.frame_index for a in gt}
    for index in range(len(seq)):
        if index not in indices:
            raise CoverageError(f"ground truth has no entry for frame {index}")
    for ann in gt:
        if ann.frame_index >= len(seq):
            raise CoverageError(f"ground truth frame {ann.frame_index} is beyond the {len(seq)}-frame video")
        for box in ann.boxes:
            if not box.within(seq.width, seq.height):
                raise CoverageError(f"frame {ann.frame_index} has a box outside the {seq.width}x{seq.height} frame")


def dedupe_grid(grid: Sequence[int]) -> List[int]:
    unique = sorted(set(grid))
    if len(unique) != len(grid):
        logger.warning(f"duplicate crf values in grid {list(grid)}; sweeping {unique}")
    return unique


def sweep_level(seq: VideoSequence, gt: Sequence[FrameAnnotation], detector: Detector, crf: int,
                match_iou: float = MATCH_IOU, allow_fp: bool = False) -> SweepRecord:
    compressed, total_bits = codec.encode_sequence(seq, crf)
    decoded = codec.decode_sequence(compressed, seq)
    avg = average_psnr(seq, decoded)

    gt_by_frame = {a.frame_index: a.boxes for a in gt}
    verdicts = []
    for index, frame in enumerate(decoded.frames):
        result = detector.detect(index, avg.db, frame)
        verdicts.append(match_frame(gt_by_frame[index], result.boxes, match_iou, index, allow_fp))

    record = SweepRecord(
        crf=crf,
        avg_psnr=avg.db,
        accuracy=accuracy(verdicts),
        bandwidth=required_bandwidth(total_bits, seq.duration_s),
    )
    logger.info(
        f"crf {crf}: {format_psnr(avg.db)} dB, {record.accuracy.accuracy_percent:.2f}% accurate, "
        f"{record.bandwidth.bandwidth_mbps:.6f} Mbits/sec"
    )
    return record


def run_sweep(seq: VideoSequence, gt: Sequence[FrameAnnotation], detector: Detector, crf_grid: Sequence[int],
              match_iou: float = MATCH_IOU, allow_fp: bool = False, max_workers: int = 1) -> List[SweepRecord]:
    if not crf_grid:
        raise EmptyInputError("crf grid is empty")
    if not seq.frames:
        raise EmptyInputError("cannot sweep an empty sequence")
    check_coverage(seq, gt)
    grid = dedupe_grid(crf_grid)

    def level(crf):
        return sweep_level(seq, gt, detector, crf, match_iou, allow_fp)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(level, grid))
    else:
        records = [level(crf) for crf in grid]
    return sorted(records, key=lambda r: r.crf)


def find_threshold(records: Sequence[SweepRecord], accuracy_floor_percent: float) -> SweepRecord:
    """Cheapest record meeting the floor; equal bandwidth prefers the lower PSNR."""
    if not records:
        raise EmptyInputError("no sweep records")
    feasible = [r for r in records if r.accuracy.accuracy_percent >= accuracy_floor_percent]
    if not feasible:
        best = max(r.accuracy.accuracy_percent for r in records)
        raise InfeasibleError(
            f"no level reaches {accuracy_floor_percent}% accuracy; best achievable is {best:.6f}%"
        )
    return min(feasible, key=lambda r: (r.bandwidth.bandwidth_mbps, r.avg_psnr))


def write_sweep_csv(records: Sequence[SweepRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in records:
        writer.writerow([
            r.crf,
            format_psnr(r.avg_psnr),
            f"{r.accuracy.accuracy_percent:.6f}",
            r.accuracy.correct_frames,
            r.accuracy.total_frames,
            f"{r.bandwidth.size_bits:.6f}",
            f"{r.bandwidth.duration_s:.6f}",
            f"{r.bandwidth.bandwidth_mbps:.6f}",
        ])
    return out.getvalue()


def read_sweep_csv(text: str) -> List[SweepRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != SWEEP_COLUMNS:
        raise FormatError(f"sweep CSV header must be {','.join(SWEEP_COLUMNS)}")
    records = []
    for line_no, row in enumerate(reader, start=2):
        try:
            records.append(SweepRecord(
                crf=int(row["crf"]),
                avg_psnr=parse_psnr(row["avg_psnr_db"]),
                accuracy=AccuracyResult(
                    correct_frames=int(row["correct_frames"]),
                    total_frames=int(row["total_frames"]),
                ),
                bandwidth=required_bandwidth(float(row["size_bits"]), float(row["duration_s"])),
            ))
            stated_accuracy = float(row["accuracy_percent"])
            stated_bandwidth = float(row["bandwidth_mbps"])
        except (TypeError, ValueError) as e:
            raise FormatError(f"line {line_no}: {e}")
        if not math.isclose(stated_accuracy, records[-1].accuracy.accuracy_percent, abs_tol=1e-5):
            raise FormatError(f"line {line_no}: accuracy_percent does not equal correct/total")
        if not math.isclose(stated_bandwidth, records[-1].bandwidth.bandwidth_mbps, rel_tol=1e-6, abs_tol=1e-6):
            raise FormatError(f"line {line_no}: bandwidth_mbps does not equal size_bits / duration_s")
    return sorted(records, key=lambda r: r.crf)
