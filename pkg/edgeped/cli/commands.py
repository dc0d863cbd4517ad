"""One function per subcommand. Each returns the process exit code and writes
only its declared JSON or summary lines to stdout."""

import json
import math
import sys
from pathlib import Path

from edgeped.core import codec, frameio
from edgeped.core.detector import SCENARIOS, degradation_detector, file_detector, read_profile, scenario_profile
from edgeped.core.errors import ConfigError
from edgeped.core.evaluation import find_threshold, read_sweep_csv, run_sweep, write_sweep_csv
from edgeped.core.link import cameras_supported, simulate_stream, write_trace_csv
from edgeped.core.metrics import average_psnr, reduction_factor, required_bandwidth
from edgeped.core.models import ControllerPolicy, LinkConfig
from edgeped.core.synth import synthetic_scene
from edgeped.core.utils.logger import log_step, log_success, setup_logger

logger = setup_logger(__name__)


def _emit(payload: dict):
    sys.stdout.write(json.dumps(payload) + "\n")


def _psnr_value(value: float):
    return "inf" if math.isinf(value) else value


def _load_profile(name_or_path: str, seed: int):
    if name_or_path in SCENARIOS:
        return scenario_profile(name_or_path, seed=seed)
    profile = read_profile(Path(name_or_path).read_bytes())
    return profile.model_copy(update={"seed": seed})


def parse_grid(text: str):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"grid must be comma-separated integers, got {text!r}")


def cmd_compress(args) -> int:
    seq = frameio.read_y4m(Path(args.input).read_bytes())
    log_step("COMPRESS", f"{len(seq)} frames at crf {args.crf}")
    compressed, total_bits = codec.encode_sequence(seq, args.crf, max_workers=args.workers)
    Path(args.out).write_bytes(codec.write_bitstream(compressed))

    decoded = codec.decode_sequence(compressed, seq)
    if args.decoded:
        Path(args.decoded).write_bytes(frameio.write_y4m(decoded))
    avg = average_psnr(seq, decoded)
    sample = required_bandwidth(total_bits, seq.duration_s)
    _emit({
        "size_bits": total_bits,
        "avg_psnr_db": _psnr_value(avg.db),
        "bandwidth_mbps": sample.bandwidth_mbps,
    })
    log_success(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    seq = frameio.read_y4m(Path(args.input).read_bytes())
    gt = frameio.read_annotations(Path(args.gt).read_bytes())
    if args.detections:
        detector = file_detector(frameio.read_detections(Path(args.detections).read_bytes()))
    else:
        profile = _load_profile(args.profile, args.seed)
        detector = degradation_detector(profile, gt, seq.width, seq.height)

    log_step("SWEEP", f"{len(seq)} frames over crf grid {args.grid}")
    records = run_sweep(
        seq, gt, detector, parse_grid(args.grid),
        allow_fp=args.allow_fp, max_workers=args.workers,
    )
    Path(args.out).write_text(write_sweep_csv(records), newline="")
    for r in records:
        print(
            f"crf={r.crf} avg_psnr_db={_psnr_value(r.avg_psnr)} "
            f"accuracy_percent={r.accuracy.accuracy_percent:.6f} "
            f"bandwidth_mbps={r.bandwidth.bandwidth_mbps:.6f}"
        )
    log_success(f"wrote {len(records)} levels to {args.out}")
    return 0


def cmd_threshold(args) -> int:
    records = read_sweep_csv(Path(args.sweep).read_text())
    selected = find_threshold(records, args.floor)
    reference = max(r.bandwidth.bandwidth_mbps for r in records)
    payload = selected.to_summary()
    payload["reduction_factor"] = reduction_factor(reference, selected.bandwidth.bandwidth_mbps)
    if args.capacity_mbps is not None:
        payload["cameras_supported"] = cameras_supported(args.capacity_mbps, selected.bandwidth.bandwidth_mbps)
    _emit(payload)
    return 0


def cmd_stream(args) -> int:
    seq = frameio.read_y4m(Path(args.input).read_bytes())
    cfg = LinkConfig(
        capacity_mbps=args.capacity_mbps,
        fps=seq.fps,
        queue_limit_bits=args.queue_limit_bits,
        latency_budget_s=args.budget_s,
    )
    policy = ControllerPolicy.parse(args.policy, step_up=args.step_up, step_down=args.step_down)
    profile = _load_profile(args.profile, args.seed)

    log_step("STREAM", f"{len(seq)} frames over {cfg.capacity_mbps} Mbits/sec, policy {args.policy}")
    report = simulate_stream(seq, cfg, policy, profile)
    if args.trace:
        Path(args.trace).write_text(write_trace_csv(report.trace), newline="")
    sys.stdout.write(report.model_dump_json() + "\n")
    return 0


def cmd_synth(args) -> int:
    seq, gt = synthetic_scene(
        args.frames, args.width, args.height, fps=args.fps, seed=args.seed, boxes_per_frame=args.boxes,
    )
    Path(args.out).write_bytes(frameio.write_y4m(seq))
    Path(args.gt).write_bytes(frameio.write_annotations(gt))
    _emit({"frames": len(seq), "width": seq.width, "height": seq.height, "fps": seq.fps})
    return 0


def cmd_resample(args) -> int:
    seq = frameio.read_y4m(Path(args.input).read_bytes())
    out = frameio.decimate(seq, args.fps)
    Path(args.out).write_bytes(frameio.write_y4m(out))
    _emit({"frames": len(out), "fps": out.fps})
    return 0
