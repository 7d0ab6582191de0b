"""Event streams, fixed-window accumulation, and the motion-blur budget.

An event stream is a numpy structured array with fields ``t_us`` (uint64
microseconds, non-decreasing), ``x``/``y`` (uint16 pixel coordinates) and
``p`` (int8 polarity, +1 or -1).  Accumulation bins a stream into
consecutive fixed-duration windows, keeping positive and negative events
in separate per-pixel count histograms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EventBoundsError, EventOrderError

EVENT_DTYPE = np.dtype([
    ("t_us", "<u8"),
    ("x", "<u2"),
    ("y", "<u2"),
    ("p", "<i1"),
])


def make_events(t_us, x, y, p) -> np.ndarray:
    """Assemble parallel sequences into an event array (no validation)."""
    t_us = np.asarray(t_us, dtype=np.uint64)
    ev = np.empty(t_us.shape[0], dtype=EVENT_DTYPE)
    ev["t_us"] = t_us
    ev["x"] = np.asarray(x, dtype=np.uint16)
    ev["y"] = np.asarray(y, dtype=np.uint16)
    ev["p"] = np.asarray(p, dtype=np.int8)
    return ev


def validate_events(events: np.ndarray, width: int | None = None,
                    height: int | None = None) -> None:
    """Check stream invariants: polarity domain, time order, pixel bounds.

    Raises EventOrderError on a non-monotone timestamp and EventBoundsError
    on an out-of-range pixel (only checked when dimensions are given).
    """
    if events.dtype != EVENT_DTYPE:
        raise EventBoundsError(f"expected event dtype {EVENT_DTYPE}, got {events.dtype}")
    if events.size == 0:
        return
    if np.any(np.diff(events["t_us"].astype(np.int64)) < 0):
        i = int(np.argmax(np.diff(events["t_us"].astype(np.int64)) < 0))
        raise EventOrderError(f"timestamps decrease at record {i + 1}")
    if not np.all(np.isin(events["p"], (-1, 1))):
        raise EventBoundsError("polarity values must be +1 or -1")
    if width is not None and np.any(events["x"] >= width):
        raise EventBoundsError(f"event x out of range for width {width}")
    if height is not None and np.any(events["y"] >= height):
        raise EventBoundsError(f"event y out of range for height {height}")


@dataclass(frozen=True)
class AccumulationConfig:
    """Fixed-time accumulation parameters."""

    window_us: int
    sensor_width: int
    sensor_height: int
    count_cap: int = 15

    def __post_init__(self):
        if self.window_us <= 0:
            raise ValueError("accumulation window must be positive")
        if self.count_cap < 1:
            raise ValueError("count_cap must be >= 1")
        if self.sensor_width < 1 or self.sensor_height < 1:
            raise ValueError("sensor dimensions must be positive")


@dataclass(frozen=True)
class EventFrame:
    """Per-polarity count histograms over one accumulation window.

    ``pos_counts``/``neg_counts`` are (height, width) int32 grids clipped at
    the configured count cap.  ``event_total`` is the number of events that
    fell in the window before clipping, so
    ``pos_counts.sum() + neg_counts.sum() <= event_total`` with equality
    unless clipping occurred.
    """

    t_start_us: int
    t_end_us: int
    pos_counts: np.ndarray
    neg_counts: np.ndarray
    event_total: int

    @property
    def window_us(self) -> int:
        return self.t_end_us - self.t_start_us

    @property
    def t_mid_s(self) -> float:
        return (self.t_start_us + self.t_end_us) / 2 * 1e-6


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera looking straight down at the ground plane.

    Exactly one of ``f_px``/``fov_alpha`` may be omitted; the other is then
    derived from the sensor width.  When both are supplied they must agree
    to within 1%.  The principal point defaults to the image center with
    pixel centers at integer coordinates.
    """

    width: int
    height: int
    height_z: float
    f_px: float | None = None
    fov_alpha: float | None = None
    cx: float = field(default=None)  # type: ignore[assignment]
    cy: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.height_z <= 0:
            raise ValueError("camera height above ground must be positive")
        if self.f_px is None and self.fov_alpha is None:
            raise ValueError("one of f_px or fov_alpha is required")
        if self.fov_alpha is not None and not 0 < self.fov_alpha < math.pi:
            raise ValueError("fov_alpha must lie in (0, pi)")
        if self.f_px is None:
            object.__setattr__(self, "f_px", (self.width / 2) / math.tan(self.fov_alpha / 2))
        elif self.f_px <= 0:
            raise ValueError("focal length must be positive")
        if self.fov_alpha is None:
            object.__setattr__(self, "fov_alpha", 2 * math.atan((self.width / 2) / self.f_px))
        else:
            implied = (self.width / 2) / math.tan(self.fov_alpha / 2)
            if abs(implied - self.f_px) > 0.01 * self.f_px:
                raise ValueError(
                    f"f_px {self.f_px:.2f} and fov imply {implied:.2f}; disagreement exceeds 1%")
        if self.cx is None:
            object.__setattr__(self, "cx", (self.width - 1) / 2)
        if self.cy is None:
            object.__setattr__(self, "cy", (self.height - 1) / 2)

    @property
    def meters_per_px(self) -> float:
        """Ground-plane meters subtended by one pixel."""
        return self.height_z / self.f_px


def iter_frames(events: np.ndarray, cfg: AccumulationConfig,
                t_start_us: int | None = None,
                t_end_us: int | None = None):
    """Lazily bin a time-sorted event stream into consecutive fixed windows.

    Windows are anchored at the first event's timestamp unless
    ``t_start_us`` is given; ``t_end_us`` extends the covered span so that
    trailing (or, for an empty stream, all) windows are emitted as all-zero
    frames.  Every event lands in exactly one window; per-pixel counts clip
    at ``cfg.count_cap``.  Yielding one frame at a time keeps consumers at
    bounded memory regardless of stream length.
    """
    validate_events(events, cfg.sensor_width, cfg.sensor_height)
    w = cfg.window_us
    if t_start_us is None:
        if events.size == 0:
            return
        t_start_us = int(events["t_us"][0])
    if events.size and int(events["t_us"][0]) < t_start_us:
        raise EventOrderError("events precede the accumulation start time")

    last = int(events["t_us"][-1]) if events.size else t_start_us
    span_end = max(last + 1, t_end_us if t_end_us is not None else 0)
    n_frames = max(1, -(-(span_end - t_start_us) // w))

    # events are time-sorted, so each window is a contiguous slice
    times = events["t_us"].astype(np.int64)
    shape = (cfg.sensor_height, cfg.sensor_width)
    for k in range(n_frames):
        lo, hi = np.searchsorted(times, [t_start_us + k * w, t_start_us + (k + 1) * w])
        sel = events[lo:hi]
        pos = np.zeros(shape, dtype=np.int32)
        neg = np.zeros(shape, dtype=np.int32)
        if sel.size:
            on = sel["p"] > 0
            np.add.at(pos, (sel["y"][on], sel["x"][on]), 1)
            np.add.at(neg, (sel["y"][~on], sel["x"][~on]), 1)
            np.clip(pos, 0, cfg.count_cap, out=pos)
            np.clip(neg, 0, cfg.count_cap, out=neg)
        yield EventFrame(
            t_start_us=t_start_us + k * w,
            t_end_us=t_start_us + (k + 1) * w,
            pos_counts=pos,
            neg_counts=neg,
            event_total=int(sel.size),
        )


def accumulate(events: np.ndarray, cfg: AccumulationConfig,
               t_start_us: int | None = None,
               t_end_us: int | None = None) -> list[EventFrame]:
    """Materialized form of ``iter_frames``."""
    return list(iter_frames(events, cfg, t_start_us, t_end_us))


def to_intensity(frame: EventFrame, count_cap: int, merge: str = "sum") -> np.ndarray:
    """Render an event frame as an 8-bit grayscale image.

    ``merge`` selects the channel: "sum" (default) adds positive and
    negative counts, "pos"/"neg" keep a single polarity.  Counts are
    clipped at ``count_cap`` and mapped linearly onto [0, 255] with
    round-half-up, so a zero count is 0 and a saturated count is 255.
    """
    if merge == "sum":
        counts = frame.pos_counts + frame.neg_counts
    elif merge == "pos":
        counts = frame.pos_counts
    elif merge == "neg":
        counts = frame.neg_counts
    else:
        raise ValueError(f"unknown merge mode {merge!r}")
    scaled = np.minimum(counts, count_cap).astype(np.float64) * (255.0 / count_cap)
    return np.floor(scaled + 0.5).astype(np.uint8)


def relative_motion_blur(t_exp_s: float, v_mps: float, cam: CameraModel) -> float:
    """Fraction of the image width swept by the ground during one exposure.

    Computed as t_exp * v / (z * 2 * tan(alpha / 2)).
    """
    if t_exp_s < 0 or v_mps < 0:
        raise ValueError("exposure time and speed must be non-negative")
    return t_exp_s * v_mps / (cam.height_z * 2.0 * math.tan(cam.fov_alpha / 2.0))


def max_exposure_for_blur(blur_budget: float, v_mps: float, cam: CameraModel) -> float:
    """Longest exposure (seconds) keeping relative motion blur within budget.

    At zero speed any exposure satisfies the budget; returns ``math.inf``.
    """
    if blur_budget <= 0:
        raise ValueError("blur budget must be positive")
    if v_mps < 0:
        raise ValueError("speed must be non-negative")
    if v_mps == 0:
        return math.inf
    return blur_budget * cam.height_z * 2.0 * math.tan(cam.fov_alpha / 2.0) / v_mps
