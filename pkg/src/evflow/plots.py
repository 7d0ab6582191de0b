"""File emitters for inspection artifacts: velocity overlays, residual
histograms, flow quivers, and the exposure-budget table."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .evaluate import _pair_series
from .events import CameraModel, max_exposure_for_blur
from .flow import FlowField, subsample_flow
from .svgplot import histogram, line_chart, quiver
from .vehicle import VelocityEstimate

CHANNEL_FILES = {
    "v_lon": ("velocity_v_lon.svg", "residual_v_lon.svg", "m/s"),
    "v_lat": ("velocity_v_lat.svg", "residual_v_lat.svg", "m/s"),
    "omega": ("velocity_omega.svg", "residual_omega.svg", "rad/s"),
}

EST_COLOR = "#2c7fb8"
TRUTH_COLOR = "#c0392b"


def emit_plots(estimates: list[VelocityEstimate], truth: list[VelocityEstimate],
               out_dir: str | Path) -> list[Path]:
    """One estimate-vs-truth time series and one residual histogram per
    channel; six SVG files with fixed names, byte-deterministic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    valid = [e for e in estimates if e.valid]
    est_t = np.array([e.t_mid for e in valid])
    truth_t = np.array([g.t_mid for g in truth])
    written = []
    for chan, (series_name, resid_name, unit) in CHANNEL_FILES.items():
        est_v = np.array([getattr(e, chan) for e in valid])
        truth_v = np.array([getattr(g, chan) for g in truth])
        note = "" if valid else "no valid estimates"
        series = [("truth", TRUTH_COLOR, truth_t, truth_v)]
        if valid:
            series.append(("estimate", EST_COLOR, est_t, est_v))
        svg = line_chart(f"{chan} over time", "t [s]", f"{chan} [{unit}]",
                         series, annotation=note)
        path = out / series_name
        path.write_text(svg)
        written.append(path)

        if valid and truth_t.size:
            nearest, _ = _pair_series(est_t, truth_t, np.inf)
            residuals = est_v - truth_v[nearest]
        else:
            residuals = np.array([])
        svg = histogram(f"{chan} residual", f"error [{unit}]", residuals,
                        annotation=note)
        path = out / resid_name
        path.write_text(svg)
        written.append(path)
    return written


def dump_flow_csv(field: FlowField, stride: int, path: str | Path) -> None:
    """Debug dump: one row per stride-grid pixel, ``x,y,u,v,valid``."""
    h, w = field.shape
    with open(path, "w", newline="") as f:
        f.write("x,y,u,v,valid\n")
        for y in range(0, h, stride):
            for x in range(0, w, stride):
                f.write(f"{x},{y},{float(field.u[y, x])!r},{float(field.v[y, x])!r},"
                        f"{'true' if field.valid[y, x] else 'false'}\n")


def flow_quiver_svg(field: FlowField, stride: int, title: str = "optical flow") -> str:
    p, q = subsample_flow(field, stride)
    h, w = field.shape
    return quiver(title, w, h, p, q)


def blur_budget_table(speeds: list[float], budgets: list[float],
                      cam: CameraModel) -> list[dict]:
    rows = []
    for v in speeds:
        row = {"v_mps": v}
        for b in budgets:
            row[f"t_exp_us_at_{b:g}"] = max_exposure_for_blur(b, v, cam) * 1e6
        rows.append(row)
    return rows


def write_blur_budget(speeds: list[float], budgets: list[float], cam: CameraModel,
                      out_dir: str | Path) -> tuple[Path, Path]:
    """Exposure ceilings against speed for each blur budget, CSV + SVG."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = blur_budget_table(speeds, budgets, cam)
    csv_path = out / "blur_budget.csv"
    cols = ["v_mps"] + [f"t_exp_us_at_{b:g}" for b in budgets]
    with open(csv_path, "w", newline="") as f:
        f.write(",".join(cols) + "\n")
        for row in rows:
            f.write(",".join(repr(float(row[c])) for c in cols) + "\n")

    palette = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"]
    xs = np.array(speeds, dtype=np.float64)
    series = []
    for i, b in enumerate(budgets):
        ys = np.array([row[f"t_exp_us_at_{b:g}"] for row in rows])
        series.append((f"{b * 100:g}% blur", palette[i % len(palette)], xs, ys))
    svg_path = out / "blur_budget.svg"
    svg_path.write_text(line_chart("maximum exposure vs speed", "v [m/s]",
                                   "t_exp [us]", series))
    return csv_path, svg_path
