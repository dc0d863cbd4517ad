import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeped.core.errors import EmptyInputError
from edgeped.core.link import (
    TRACE_COLUMNS,
    QualityController,
    cameras_supported,
    simulate_link,
    simulate_stream,
    stability_boundary,
    write_trace_csv,
)
from edgeped.core.models import ControllerPolicy, LinkConfig
from edgeped.core.synth import synthetic_scene

FIXED = ControllerPolicy(mode="fixed", crf=20)


def constant(size_bits, quality=45.0):
    return lambda index, crf: (size_bits, quality)


def link(capacity_mbps, fps=10.0, queue_limit_bits=None, budget=1.0):
    return LinkConfig(capacity_mbps=capacity_mbps, fps=fps, queue_limit_bits=queue_limit_bits,
                      latency_budget_s=budget)


def test_at_the_stability_boundary_latency_stays_flat():
    report = simulate_link(50, link(0.31), FIXED, constant(31_000))
    assert report.max_latency_s == pytest.approx(0.1, abs=1e-3)
    assert report.max_queue_frames <= 1
    assert report.delivered_frames == 50


def test_boundary_holds_when_the_frame_period_is_not_exact():
    report = simulate_link(300, link(0.3, fps=30.0), FIXED, constant(10_000))
    assert report.max_queue_frames == 0
    assert report.max_latency_s == pytest.approx(1 / 30, abs=1e-8)
    assert report.delivered_frames == 300


def test_double_capacity_halves_latency():
    report = simulate_link(30, link(0.62), FIXED, constant(31_000))
    assert report.mean_latency_s == pytest.approx(0.05, abs=1e-9)
    assert all(row.latency_s == pytest.approx(0.05) for row in report.trace)


def test_overload_grows_latency_without_bound():
    seq, _ = synthetic_scene(20, 64, 64, seed=2)
    report = simulate_stream(seq, link(0.01), ControllerPolicy(mode="fixed", crf=0))
    latencies = [row.latency_s for row in report.trace]
    assert all(b > a for a, b in zip(latencies, latencies[1:]))
    assert report.dropped_frames == 0


def test_fifo_service_is_work_conserving():
    sizes = [40_000, 10_000, 90_000, 5_000, 30_000, 60_000]
    cfg = link(0.4)
    report = simulate_link(len(sizes), cfg, FIXED, lambda i, crf: (sizes[i], 40.0))
    previous_done = 0.0
    for row, size in zip(report.trace, sizes):
        start = max(row.produced_t, previous_done)
        assert row.delivered_t == pytest.approx(start + size / cfg.capacity_bps)
        previous_done = row.delivered_t


def test_queue_limit_drops_newest_frames():
    report = simulate_link(40, link(0.1, queue_limit_bits=25_000), FIXED, constant(20_000))
    assert report.dropped_frames > 0
    assert report.delivered_frames + report.dropped_frames == report.produced_frames == 40
    assert not report.trace[0].dropped
    assert all(row.delivered_t is None for row in report.trace if row.dropped)
    assert report.max_queue_frames <= 1
    assert report.total_bits == 20_000 * report.delivered_frames


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=30_000), min_size=1, max_size=60))
def test_below_the_boundary_latency_is_bounded(sizes):
    cfg = link(stability_boundary(10.0, 30_000) * 1.01)
    report = simulate_link(len(sizes), cfg, FIXED, lambda i, crf: (sizes[i], 40.0))
    assert report.max_latency_s <= max(sizes) / cfg.capacity_bps + 1 / cfg.fps + 1e-9


def test_adaptive_policy_holds_the_psnr_floor():
    seq, _ = synthetic_scene(40, 64, 64, seed=8)
    policy = ControllerPolicy(mode="adaptive", psnr_floor_db=43.0)
    report = simulate_stream(seq, link(0.05, budget=0.2), policy)
    delivered = [row for row in report.trace if not row.dropped]
    assert delivered
    assert all(row.psnr_db >= 43.0 for row in delivered)
    assert report.achieved_accuracy_estimate == pytest.approx(98.0)


def test_controller_steps():
    controller = QualityController(ControllerPolicy(mode="adaptive", psnr_floor_db=30.0, initial_crf=20), 0.2)
    assert controller.update(None) == 20
    assert controller.update(0.5) == 23
    assert controller.update(0.15) == 23
    assert controller.update(0.05) == 20
    controller.crf = 50
    assert controller.update(1.0) == 51
    controller.crf = 1
    assert controller.update(0.0) == 0


def test_controller_refines_until_the_floor_holds():
    controller = QualityController(ControllerPolicy(mode="adaptive", psnr_floor_db=40.0, initial_crf=30), 0.2)
    crf, size_bits, quality = controller.encode(0, lambda index, crf: (1000 - crf, 60.0 - crf))
    assert (crf, size_bits, quality) == (20, 980, 40.0)
    assert controller.crf == 20


def test_fixed_controller_ignores_delay():
    controller = QualityController(FIXED, 0.2)
    assert controller.update(10.0) == 20
    assert controller.encode(0, lambda index, crf: (5, 10.0)) == (20, 5, 10.0)


def test_stream_is_deterministic():
    seq, _ = synthetic_scene(15, 32, 32, seed=1)
    policy = ControllerPolicy(mode="adaptive", psnr_floor_db=40.0)
    a = simulate_stream(seq, link(0.02, budget=0.3), policy)
    b = simulate_stream(seq, link(0.02, budget=0.3), policy)
    assert a == b
    assert a.trace == b.trace


def test_report_json_hides_the_trace():
    report = simulate_link(3, link(1.0), FIXED, constant(1000, math.inf))
    payload = report.model_dump(mode="json")
    assert "trace" not in payload
    assert payload["mean_psnr_db"] == "inf"


def test_nothing_to_stream():
    with pytest.raises(EmptyInputError):
        simulate_link(0, link(1.0), FIXED, constant(1000))


@pytest.mark.parametrize("fps, bits, expected", [(10, 31_000, 0.31), (10, 982_000, 9.82), (10, 0, 0.0)])
def test_stability_boundary(fps, bits, expected):
    assert stability_boundary(fps, bits) == pytest.approx(expected)
    assert stability_boundary(link(1.0, fps=fps), bits) == pytest.approx(expected)


def test_cameras_supported():
    assert cameras_supported(9.82, 0.31) == 31
    assert cameras_supported(0.62, 0.31) == 2
    assert cameras_supported(1.0, 0.0) == 0


def test_trace_csv():
    report = simulate_link(4, link(0.1, queue_limit_bits=1_000), FIXED, constant(20_000))
    rows = write_trace_csv(report.trace).splitlines()
    assert rows[0] == ",".join(TRACE_COLUMNS)
    assert len(rows) == 5
    assert rows[2].split(",")[2] == ""
    assert rows[2].endswith(",1")


def test_policy_parsing():
    assert ControllerPolicy.parse("fixed:30").crf == 30
    assert ControllerPolicy.parse("adaptive:43", step_up=5).psnr_floor_db == 43.0
    with pytest.raises(ValueError):
        ControllerPolicy.parse("greedy:3")
    with pytest.raises(ValueError):
        ControllerPolicy.parse("adaptive:49")
    with pytest.raises(ValueError):
        LinkConfig(capacity_mbps=0.0, fps=10, latency_budget_s=1.0)
