"""Readers and writers for the event CSV and EVT1 binary formats.

CSV: header ``t_us,x,y,p`` with one event per line, p in {1,-1}.
Binary: ASCII magic ``EVT1`` followed by little-endian u16 width and u16
height, then packed records of (u64 t_us, u16 x, u16 y, i8 p).
Both readers validate the stream invariants on load.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .errors import InputFormatError
from .events import EVENT_DTYPE, validate_events

CSV_HEADER = "t_us,x,y,p"
BINARY_MAGIC = b"EVT1"


def write_events_csv(path: str | Path, events: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        for t, x, y, p in zip(events["t_us"], events["x"], events["y"], events["p"]):
            f.write(f"{int(t)},{int(x)},{int(y)},{int(p)}\n")


def load_events_csv(path: str | Path, width: int | None = None,
                    height: int | None = None) -> np.ndarray:
    with open(path, "r") as f:
        header = f.readline().strip()
        if header != CSV_HEADER:
            raise InputFormatError(f"bad event CSV header {header!r}; expected {CSV_HEADER!r}")
        body = f.read()
    if body.strip():
        try:
            raw = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise InputFormatError(f"unparsable event CSV row: {exc}") from exc
        if raw.shape[1] != 4:
            raise InputFormatError(f"event CSV rows need 4 fields, got {raw.shape[1]}")
        if np.any(raw[:, :3] < 0):
            raise InputFormatError("negative timestamp or pixel coordinate in event CSV")
    else:
        raw = np.empty((0, 4), dtype=np.int64)
    ev = np.empty(raw.shape[0], dtype=EVENT_DTYPE)
    ev["t_us"] = raw[:, 0].astype(np.uint64)
    ev["x"] = raw[:, 1].astype(np.uint16)
    ev["y"] = raw[:, 2].astype(np.uint16)
    ev["p"] = raw[:, 3].astype(np.int8)
    validate_events(ev, width, height)
    return ev


def write_events_binary(path: str | Path, events: np.ndarray,
                        width: int, height: int) -> None:
    header = BINARY_MAGIC + np.array([width, height], dtype="<u2").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(events.astype(EVENT_DTYPE, copy=False).tobytes())


def load_events_binary(path: str | Path) -> tuple[np.ndarray, int, int]:
    """Read an EVT1 file; returns (events, width, height)."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != BINARY_MAGIC:
        raise InputFormatError("missing EVT1 magic in event binary")
    width, height = (int(v) for v in np.frombuffer(blob[4:8], dtype="<u2"))
    payload = blob[8:]
    if len(payload) % EVENT_DTYPE.itemsize != 0:
        raise InputFormatError("event binary payload is not a whole number of records")
    ev = np.frombuffer(payload, dtype=EVENT_DTYPE).copy()
    validate_events(ev, width, height)
    return ev, width, height
