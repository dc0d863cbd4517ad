"""Discrete-event model of the camera to edge-node uplink.

Frames are produced every 1/fps seconds, encoded at the controller's current
crf and sent FIFO over a link of fixed capacity. Encoding takes no time.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import simpy

from edgeped.core import codec
from edgeped.core.detector import scenario_profile
from edgeped.core.errors import EmptyInputError
from edgeped.core.metrics import mean_finite_psnr, psnr
from edgeped.core.models import (
    ControllerPolicy,
    DetectorProfile,
    FrameTrace,
    LinkConfig,
    StreamReport,
    VideoSequence,
    format_psnr,
)
from edgeped.core.utils.logger import setup_logger
from edgeped.runtime.config import MAX_CRF

logger = setup_logger(__name__)

# (frame_index, crf) -> (size_bits, psnr_db)
EncodeFn = Callable[[int, int], Tuple[int, float]]

# the simulation clock ticks in nanoseconds
_NS = 1_000_000_000

TRACE_COLUMNS = ["frame", "produced_t", "delivered_t", "latency_s", "crf", "psnr_db", "size_bits", "dropped"]


@dataclass
class _Pending:
    index: int
    produced_t: float
    size_bits: int


def _ns(seconds: float) -> int:
    return round(seconds * _NS)


class QualityController:
    """Step controller: coarser when the link falls behind, finer when it has slack."""

    def __init__(self, policy: ControllerPolicy, latency_budget_s: float):
        self.policy = policy
        self.budget = latency_budget_s
        self.crf = policy.crf if policy.mode == "fixed" else policy.initial_crf

    def update(self, delay_s: Optional[float]) -> int:
        if self.policy.mode == "fixed" or delay_s is None:
            return self.crf
        if delay_s > self.budget:
            self.crf = min(MAX_CRF, self.crf + self.policy.step_up)
        elif delay_s < self.budget / 2:
            self.crf = max(0, self.crf - self.policy.step_down)
        return self.crf

    def encode(self, index: int, encode: EncodeFn) -> Tuple[int, int, float]:
        """Encode at the current crf, stepping finer until the PSNR floor holds."""
        crf = self.crf
        size_bits, quality = encode(index, crf)
        if self.policy.mode == "adaptive":
            while quality < self.policy.psnr_floor_db and crf > 0:
                crf -= 1
                size_bits, quality = encode(index, crf)
            self.crf = crf
        return crf, size_bits, quality


class _Uplink:
    """Frame producer and FIFO transmitter sharing one simpy clock in integer nanoseconds."""

    def __init__(self, env: simpy.Environment, cfg: LinkConfig, controller: QualityController, encode: EncodeFn):
        self.env = env
        self.cfg = cfg
        self.controller = controller
        self.encode = encode
        self.queue = simpy.Store(env)
        self.queued_bits = 0
        self.max_waiting = 0
        self.in_service: Optional[_Pending] = None
        self.last_latency: Optional[float] = None
        self.fresh_delivery = False
        self.trace: Dict[int, FrameTrace] = {}

    def produce(self, n_frames: int):
        for k in range(n_frames):
            yield self.env.timeout(_ns(k / self.cfg.fps) - self.env.now)
            # departures due at this instant land first
            yield self.env.timeout(0)
            self._arrive(k)

    def transmit(self):
        while True:
            item = yield self.queue.get()
            yield self.env.timeout(_ns(item.size_bits / self.cfg.capacity_bps))
            self._deliver(item)

    def _arrive(self, index: int):
        now = index / self.cfg.fps
        delay = self.last_latency if self.fresh_delivery else None
        if self.in_service is not None:
            age = now - self.in_service.produced_t
            delay = age if delay is None else max(delay, age)
        self.fresh_delivery = False
        self.controller.update(delay)
        crf, size_bits, quality = self.controller.encode(index, self.encode)
        self.trace[index] = FrameTrace(frame=index, produced_t=now, crf=crf, psnr_db=quality, size_bits=size_bits)

        item = _Pending(index=index, produced_t=now, size_bits=size_bits)
        if self.in_service is None:
            self.in_service = item
            self.queue.put(item)
            return
        limit = self.cfg.queue_limit_bits
        if limit is not None and self.queued_bits + size_bits > limit:
            self.trace[index] = self.trace[index].model_copy(update={"dropped": True})
            logger.debug(f"frame {index} dropped, {self.queued_bits} bits already waiting")
            return
        self.queue.put(item)
        self.queued_bits += size_bits
        self.max_waiting = max(self.max_waiting, len(self.queue.items))

    def _deliver(self, item: _Pending):
        now = self.env.now / _NS
        latency = now - item.produced_t
        self.trace[item.index] = self.trace[item.index].model_copy(update={"delivered_t": now, "latency_s": latency})
        self.last_latency, self.fresh_delivery = latency, True
        # the transmitter's next get takes the head of the store
        self.in_service = self.queue.items[0] if self.queue.items else None
        if self.in_service is not None:
            self.queued_bits -= self.in_service.size_bits


def simulate_link(n_frames: int, cfg: LinkConfig, policy: ControllerPolicy, encode: EncodeFn,
                  profile: Optional[DetectorProfile] = None) -> StreamReport:
    if n_frames <= 0:
        raise EmptyInputError("nothing to stream")

    env = simpy.Environment()
    uplink = _Uplink(env, cfg, QualityController(policy, cfg.latency_budget_s), encode)
    env.process(uplink.produce(n_frames))
    env.process(uplink.transmit())
    env.run()

    rows = [uplink.trace[k] for k in range(n_frames)]
    return _report(rows, cfg, uplink.max_waiting, profile)


def _report(rows: List[FrameTrace], cfg: LinkConfig, max_waiting: int,
            profile: Optional[DetectorProfile]) -> StreamReport:
    delivered = [r for r in rows if not r.dropped]
    latencies = [r.latency_s for r in delivered]
    mean_quality = mean_finite_psnr([r.psnr_db for r in delivered]).db if delivered else None
    estimate = None
    if mean_quality is not None and profile is not None:
        estimate = profile.accuracy_at(mean_quality)

    report = StreamReport(
        produced_frames=len(rows),
        delivered_frames=len(delivered),
        dropped_frames=len(rows) - len(delivered),
        mean_latency_s=math.fsum(latencies) / len(latencies) if latencies else None,
        max_latency_s=max(latencies) if latencies else None,
        max_queue_frames=max_waiting,
        mean_crf_used=sum(r.crf for r in rows) / len(rows),
        mean_psnr_db=mean_quality,
        achieved_accuracy_estimate=estimate,
        total_bits=sum(r.size_bits for r in delivered),
        duration_s=len(rows) / cfg.fps,
        trace=rows,
    )
    logger.info(
        f"streamed {report.produced_frames} frames: {report.delivered_frames} delivered, "
        f"{report.dropped_frames} dropped, max latency {report.max_latency_s}"
    )
    return report


def simulate_stream(seq: VideoSequence, cfg: LinkConfig, policy: ControllerPolicy,
                    profile: Optional[DetectorProfile] = None) -> StreamReport:
    if not seq.frames:
        raise EmptyInputError("cannot stream an empty sequence")
    cache: Dict[Tuple[int, int], Tuple[int, float]] = {}

    def encode(index: int, crf: int) -> Tuple[int, float]:
        if (index, crf) not in cache:
            original = seq.frames[index]
            cf = codec.encode_frame(original, crf)
            cache[(index, crf)] = (cf.size_bits, psnr(original, codec.decode_frame(cf)))
        return cache[(index, crf)]

    return simulate_link(len(seq), cfg, policy, encode, profile or scenario_profile("scenario1"))


def stability_boundary(cfg: Union[LinkConfig, float], frame_size_bits: float) -> float:
    """Smallest capacity (Mbits/sec) that keeps the queue bounded."""
    fps = cfg.fps if isinstance(cfg, LinkConfig) else float(cfg)
    return fps * frame_size_bits / 1e6


def cameras_supported(capacity_mbps: float, per_camera_mbps: float) -> int:
    """How many feeds of ``per_camera_mbps`` fit on one link."""
    if per_camera_mbps <= 0:
        return 0
    return int(math.floor(capacity_mbps / per_camera_mbps * (1 + 1e-9)))


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def write_trace_csv(trace: List[FrameTrace]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in trace:
        writer.writerow([
            row.frame,
            _fmt(row.produced_t),
            _fmt(row.delivered_t),
            _fmt(row.latency_s),
            row.crf,
            format_psnr(row.psnr_db),
            row.size_bits,
            int(row.dropped),
        ])
    return out.getvalue()
