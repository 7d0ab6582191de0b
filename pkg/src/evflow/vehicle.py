"""Transfer of camera-center velocity to the rear axle and IMU yaw substitution.

The planar rigid-body relation v_axle = v_camera + omega x CA (omega taken
as the z-axis angular velocity, CA the camera-to-axle offset in the
vehicle frame) moves the estimate to the rear axle.  Optionally the
flow-derived yaw rate is replaced by an interpolated IMU measurement
before the transfer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputFormatError
from .rigid import CameraVelocity, EstimateQuality


@dataclass(frozen=True)
class Extrinsics:
    """Camera center to rear-axle center, meters, vehicle frame
    (x longitudinal forward, y lateral left)."""

    ca_x: float = 0.0
    ca_y: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.ca_x) and math.isfinite(self.ca_y)):
            raise ValueError("extrinsics must be finite")
        if math.hypot(self.ca_x, self.ca_y) >= 10.0:
            raise ValueError("camera-to-axle offset beyond 10 m fails the sanity bound")


@dataclass(frozen=True)
class VelocityEstimate:
    """Axle-frame velocity sample; numeric fields are meaningless when
    ``valid`` is False."""

    t_mid: float
    v_lon: float
    v_lat: float
    omega: float
    omega_source: str
    quality: EstimateQuality
    valid: bool = True
    reason: str = ""


class ImuSeries:
    """Time-sorted yaw-rate samples with interpolating lookup.

    The sample arrays are immutable snapshots; ``extended`` returns a new
    series rather than mutating, so concurrent readers of an existing
    series never observe partial updates.
    """

    def __init__(self, t_us, yaw_rate):
        t = np.asarray(t_us, dtype=np.int64)
        w = np.asarray(yaw_rate, dtype=np.float64)
        if t.shape != w.shape or t.ndim != 1:
            raise InputFormatError("IMU times and rates must be matching 1-d sequences")
        if t.size and np.any(np.diff(t) < 0):
            raise InputFormatError("IMU timestamps must be non-decreasing")
        self._t = t
        self._w = w
        self._t.setflags(write=False)
        self._w.setflags(write=False)

    def __len__(self) -> int:
        return self._t.size

    @property
    def t_us(self) -> np.ndarray:
        return self._t

    @property
    def yaw_rate(self) -> np.ndarray:
        return self._w

    def extended(self, t_us, yaw_rate) -> "ImuSeries":
        return ImuSeries(np.concatenate([self._t, np.atleast_1d(t_us)]),
                         np.concatenate([self._w, np.atleast_1d(yaw_rate)]))

    def yaw_at(self, t_s: float, staleness_s: float) -> float | None:
        """Yaw rate at ``t_s``: linear interpolation between the bracketing
        samples, nearest-sample hold at the stream edges.

        Returns None when the nearest sample is further than
        ``staleness_s`` away.
        """
        if self._t.size == 0:
            return None
        t_query = t_s * 1e6
        hi = int(np.searchsorted(self._t, t_query))
        if hi == 0:
            return float(self._w[0]) if (self._t[0] - t_query) <= staleness_s * 1e6 else None
        if hi == self._t.size:
            return float(self._w[-1]) if (t_query - self._t[-1]) <= staleness_s * 1e6 else None
        t0, t1 = float(self._t[hi - 1]), float(self._t[hi])
        w0, w1 = float(self._w[hi - 1]), float(self._w[hi])
        if t1 == t0:
            return w1
        frac = (t_query - t0) / (t1 - t0)
        return w0 + frac * (w1 - w0)


def transform_to_axle(cv: CameraVelocity, ext: Extrinsics,
                      omega_source: str = "flow") -> VelocityEstimate:
    """Apply v_axle = v_camera + omega x CA.

    With omega about z the cross product contributes
    omega * (-ca_y, ca_x), so a purely longitudinal offset (ca_y = 0)
    leaves the longitudinal component untouched for any yaw rate.
    """
    v_lon = cv.v[0] + cv.omega * (-ext.ca_y)
    v_lat = cv.v[1] + cv.omega * ext.ca_x
    return VelocityEstimate(t_mid=cv.t_mid, v_lon=float(v_lon), v_lat=float(v_lat),
                            omega=cv.omega, omega_source=omega_source,
                            quality=cv.quality, valid=True)


def substitute_imu_yaw(cv: CameraVelocity, imu: ImuSeries, ext: Extrinsics,
                       staleness_s: float) -> VelocityEstimate:
    """Transfer to the axle with the yaw rate taken from the IMU stream.

    The IMU samples bracketing ``cv.t_mid`` are linearly interpolated; if
    the nearest sample is staler than ``staleness_s`` the estimate is
    returned flagged invalid instead of raising.
    """
    yaw = imu.yaw_at(cv.t_mid, staleness_s)
    if yaw is None:
        est = transform_to_axle(cv, ext, omega_source="imu")
        return replace(est, valid=False, reason="imu_stale")
    swapped = CameraVelocity(v=cv.v, omega=float(yaw), t_mid=cv.t_mid, quality=cv.quality)
    return transform_to_axle(swapped, ext, omega_source="imu")
