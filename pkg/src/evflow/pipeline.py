"""End-to-end estimation: events in, axle-frame velocity estimates out.

Frames are processed strictly in timestamp order; each consecutive frame
pair runs intensity conversion, dense flow, correspondence subsampling,
the (optionally RANSAC-guarded) rigid fit, metric conversion and the axle
transfer.  A frame pair that fails any stage produces an estimate with
``valid = False`` and a reason code instead of being dropped.  Wall-clock
timings are recorded per stage and per pair.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import DegenerateConsensusError, InsufficientDataError
from .events import EventFrame, iter_frames, to_intensity
from .flow import compute_flow, subsample_flow
from .rigid import EstimateQuality, estimate_rigid, ransac_estimate, to_camera_velocity
from .vehicle import ImuSeries, VelocityEstimate, substitute_imu_yaw, transform_to_axle

PAIR_STAGES = ("intensity", "flow", "subsample", "estimate", "transform")

_INVALID_QUALITY = EstimateQuality(n_inliers=0, inlier_fraction=0.0, mean_residual=0.0)


@dataclass
class StageTimings:
    """Per-frame-pair wall-clock seconds for each stage plus end to end."""

    stages: dict[str, list[float]] = field(default_factory=dict)
    accumulate_s: float = 0.0

    def add(self, stage: str, seconds: float) -> None:
        self.stages.setdefault(stage, []).append(seconds)

    def stats_ms(self) -> dict[str, dict[str, float]]:
        out = {}
        for stage, vals in self.stages.items():
            arr = np.asarray(vals) * 1e3
            out[stage] = {"mean": float(arr.mean()), "std": float(arr.std()),
                          "p95": float(np.percentile(arr, 95)), "count": int(arr.size)}
        return out

    def overhead_ms(self) -> float:
        """Mean per-pair orchestration time not attributed to any stage."""
        stats = self.stats_ms()
        if "pair" not in stats:
            return 0.0
        staged = sum(stats[s]["mean"] for s in PAIR_STAGES if s in stats)
        return stats["pair"]["mean"] - staged


@dataclass
class PipelineResult:
    estimates: list[VelocityEstimate]
    timings: StageTimings
    frames_in: int
    frames_valid: int
    frames_invalid: int
    invalid_reasons: dict[str, int]


def _invalid(t_mid: float, reason: str, omega_source: str) -> VelocityEstimate:
    return VelocityEstimate(t_mid=t_mid, v_lon=0.0, v_lat=0.0, omega=0.0,
                            omega_source=omega_source, quality=_INVALID_QUALITY,
                            valid=False, reason=reason)


def process_frame_pair(prev: EventFrame, curr: EventFrame, cfg: RunConfig,
                       pair_index: int, imu: ImuSeries | None = None,
                       timings: StageTimings | None = None) -> VelocityEstimate:
    """Run every per-pair stage for one consecutive frame pair.

    ``pair_index`` seeds the RANSAC draw together with the run seed, so
    results do not depend on processing order.
    """
    rec = timings.add if timings is not None else (lambda stage, s: None)
    t_pair = time.perf_counter()
    dt = cfg.window_s
    t_mid = curr.t_mid_s

    t0 = time.perf_counter()
    img_prev = to_intensity(prev, cfg.accumulation.count_cap, cfg.merge)
    img_curr = to_intensity(curr, cfg.accumulation.count_cap, cfg.merge)
    rec("intensity", time.perf_counter() - t0)

    t0 = time.perf_counter()
    flow = compute_flow(img_prev, img_curr, cfg.flow, dt)
    rec("flow", time.perf_counter() - t0)

    t0 = time.perf_counter()
    p, q = subsample_flow(flow, cfg.stride)
    rec("subsample", time.perf_counter() - t0)
    if p.shape[0] == 0:
        rec("pair", time.perf_counter() - t_pair)
        return _invalid(t_mid, "textureless", cfg.omega_source)

    t0 = time.perf_counter()
    center = np.array([cfg.camera.cx, cfg.camera.cy])
    try:
        if cfg.ransac.enabled:
            motion, _ = ransac_estimate(p - center, q - center, cfg.ransac,
                                        rng_seed=(cfg.seed, pair_index))
        else:
            motion = estimate_rigid(p - center, q - center)
    except InsufficientDataError:
        rec("estimate", time.perf_counter() - t0)
        rec("pair", time.perf_counter() - t_pair)
        return _invalid(t_mid, "insufficient_correspondences", cfg.omega_source)
    except DegenerateConsensusError:
        rec("estimate", time.perf_counter() - t0)
        rec("pair", time.perf_counter() - t_pair)
        return _invalid(t_mid, "degenerate_consensus", cfg.omega_source)
    rec("estimate", time.perf_counter() - t0)

    t0 = time.perf_counter()
    cam_vel = to_camera_velocity(motion, cfg.camera, dt, t_mid=t_mid,
                                 mapping=cfg.mapping, n_total=p.shape[0])
    if cfg.omega_source == "imu":
        est = substitute_imu_yaw(cam_vel, imu, cfg.extrinsics,
                                 staleness_s=2 * cfg.window_s)
    else:
        est = transform_to_axle(cam_vel, cfg.extrinsics)
    rec("transform", time.perf_counter() - t0)
    rec("pair", time.perf_counter() - t_pair)
    return est


def run_pipeline(events: np.ndarray, cfg: RunConfig,
                 imu: ImuSeries | None = None,
                 t_start_us: int | None = None,
                 t_end_us: int | None = None) -> PipelineResult:
    """Accumulate an event stream and estimate velocity for every frame pair.

    Every accumulated frame yields exactly one output row: the first frame
    (which only primes the pair chain) an invalid row with reason
    ``no_previous_frame``, each later frame the estimate of its pair with
    the previous one.  Invalid frames carry reason codes, never vanish,
    and frames_in = frames_valid + frames_invalid holds on every run.
    """
    if cfg.omega_source == "imu" and imu is None:
        raise InsufficientDataError("omega source is imu but no IMU stream was supplied")
    timings = StageTimings()

    # streaming: only the previous and current frame stay resident
    estimates: list[VelocityEstimate] = []
    reasons: dict[str, int] = {}
    frames_in = 0
    prev: EventFrame | None = None
    t0 = time.perf_counter()
    for frame in iter_frames(events, cfg.accumulation, t_start_us=t_start_us,
                             t_end_us=t_end_us):
        timings.accumulate_s += time.perf_counter() - t0
        frames_in += 1
        if prev is None:
            estimates.append(_invalid(frame.t_mid_s, "no_previous_frame",
                                      cfg.omega_source))
            reasons["no_previous_frame"] = 1
        else:
            est = process_frame_pair(prev, frame, cfg, pair_index=frames_in - 1,
                                     imu=imu, timings=timings)
            if not est.valid:
                reasons[est.reason] = reasons.get(est.reason, 0) + 1
            estimates.append(est)
        prev = frame
        t0 = time.perf_counter()

    n_valid = sum(1 for e in estimates if e.valid)
    return PipelineResult(estimates=estimates, timings=timings,
                          frames_in=frames_in, frames_valid=n_valid,
                          frames_invalid=len(estimates) - n_valid,
                          invalid_reasons=reasons)
