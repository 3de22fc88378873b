"""Figure rendering from exported run files.

Every plot consumes only the files written by the experiment runner
(trace.csv, metrics.json, certificate.json, sweep.csv) and emits a PNG plus a
``<out>.data.csv`` extract holding exactly the numbers that were drawn; the
extract is byte-stable across reruns, which is what the tests pin (image
bytes may vary with backend versions).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PLOT_KINDS = ("formation", "circle_bars", "delay_sweep", "deviation_ts",
              "neuron_ts")

FIGSIZE = (7.0, 4.5)
DPI = 120


class RenderError(ValueError):
    """Unusable inputs: missing files, unknown schema, or empty data."""


@dataclass
class PlotSpec:
    kind: str
    inputs: list
    out: str
    highlight: bool = True
    _bundle: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise RenderError(f"unknown plot kind {self.kind!r}; "
                              f"expected one of {PLOT_KINDS}")
        if not self.inputs:
            raise RenderError("at least one input file is required")
        self._bundle = _classify_inputs(self.inputs)


def _classify_inputs(paths) -> dict:
    bundle = {}
    for path in paths:
        if not os.path.exists(path):
            raise RenderError(f"input file not found: {path}")
        if path.endswith(".json"):
            with open(path) as fh:
                data = json.load(fh)
            if "sigma_bar" in data or data.get("passed") is not None:
                bundle["certificate"] = data
            elif "max_deviation" in data or "deviation_series" in data:
                bundle["metrics"] = data
            elif "scenario_hash" in data:
                bundle["meta"] = data
            else:
                raise RenderError(f"unrecognized json schema in {path}")
        elif path.endswith(".csv"):
            with open(path) as fh:
                header = fh.readline().strip().split(",")
            if header[:2] == ["time", "agent_id"]:
                bundle["trace"] = path
            elif header[:2] == ["axis", "value"]:
                bundle["sweep"] = path
            else:
                raise RenderError(
                    f"unrecognized csv schema in {path}: starts with column "
                    f"'{header[0] if header else ''}'")
        else:
            raise RenderError(f"unsupported input type: {path}")
    return bundle


def _need(bundle, key, kind):
    if key not in bundle:
        raise RenderError(f"plot kind {kind!r} needs a {key} input file")
    return bundle[key]


def _read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RenderError(f"{path} is empty")
    return rows[0], rows[1:]


def _column(header, name, path):
    try:
        return header.index(name)
    except ValueError:
        raise RenderError(f"{path} is missing column '{name}'") from None


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    return f"{float(value):.10g}"


def _write_extract(out, header, rows):
    path = out + ".data.csv"
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell if isinstance(cell, str) else _fmt(cell)
                             for cell in row])
    os.replace(tmp, path)
    return path


def _disturbed(bundle) -> set:
    metrics = bundle.get("metrics") or {}
    return set(metrics.get("disturbed_agents", []))


def _plot_formation(spec, ax):
    path = _need(spec._bundle, "trace", spec.kind)
    header, rows = _read_csv(path)
    if not rows:
        raise RenderError(f"{path} contains no data rows")
    it = _column(header, "time", path)
    ia = _column(header, "agent_id", path)
    iy0 = _column(header, "y0", path)
    iy1 = _column(header, "y1", path)
    by_agent = {}
    for row in rows:
        if row[iy0] == "" or row[iy1] == "":
            raise RenderError(f"{path} has empty output columns y0/y1")
        by_agent.setdefault(int(row[ia]), []).append(
            (float(row[it]), float(row[iy0]), float(row[iy1])))
    disturbed = _disturbed(spec._bundle)
    extract = []
    for agent in sorted(by_agent):
        pts = np.array(sorted(by_agent[agent]))
        hot = spec.highlight and agent in disturbed
        ax.plot(pts[:, 1], pts[:, 2], lw=1.6 if hot else 0.7,
                color="black" if hot else None, alpha=1.0 if hot else 0.75)
        ax.plot(pts[-1, 1], pts[-1, 2], "o", ms=3,
                color="black" if hot else "tab:blue")
        extract.append([agent, pts[-1, 1], pts[-1, 2]])
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title("hand positions")
    return ["agent_id", "x_final", "y_final"], extract


def _group_columns(header):
    return [(k, name) for k, name in enumerate(header)
            if name.startswith("group_")]


def _plot_circle_bars(spec, ax):
    path = _need(spec._bundle, "sweep", spec.kind)
    header, rows = _read_csv(path)
    if not rows:
        raise RenderError(f"{path} contains no data rows")
    groups = _group_columns(header)
    if not groups:
        raise RenderError(f"{path} is missing column 'group_1'")
    maxima = []
    for k, name in groups:
        vals = [float(r[k]) for r in rows if k < len(r) and r[k] != ""]
        if vals:
            maxima.append((name, max(vals)))
    ax.bar([name.replace("group_", "") for name, _ in maxima],
           [v for _, v in maxima], color="tab:blue")
    ax.set_xlabel("circle")
    ax.set_ylabel("max deviation (m)")
    ax.set_title("largest deviation per circle across runs")
    return ["group", "max_deviation"], [[n.replace("group_", ""), v]
                                        for n, v in maxima]


def _plot_delay_sweep(spec, ax):
    path = _need(spec._bundle, "sweep", spec.kind)
    header, rows = _read_csv(path)
    if not rows:
        raise RenderError(f"{path} contains no data rows")
    iv = _column(header, "value", path)
    im = _column(header, "max_deviation", path)
    ie = _column(header, "envelope_bound", path)
    data = sorted((float(r[iv]), float(r[im]),
                   float(r[ie]) if r[ie] != "" else None) for r in rows)
    xs = [d[0] for d in data]
    ax.plot(xs, [d[1] for d in data], "o-", label="max deviation")
    env = [(x, e) for x, _, e in data if e is not None]
    if env:
        ax.plot([x for x, _ in env], [e for _, e in env], "s--",
                label="certified bound")
    ax.set_xlabel("delay bound (s)")
    ax.set_ylabel("max deviation (m)")
    ax.legend()
    ax.set_title("deviation vs delay")
    return (["value", "max_deviation", "envelope_bound"],
            [[x, m, "" if e is None else e] for x, m, e in data])


def _plot_deviation_ts(spec, ax):
    metrics = _need(spec._bundle, "metrics", spec.kind)
    series = metrics.get("deviation_series")
    if series is None:
        raise RenderError("metrics input is missing 'deviation_series'")
    times = np.asarray(series["times"], dtype=float)
    per_agent = np.asarray(series["per_agent"], dtype=float)
    if times.size == 0 or per_agent.size == 0:
        raise RenderError("metrics 'deviation_series' is empty")
    disturbed = _disturbed(spec._bundle)
    neuron_style = spec.kind == "neuron_ts"
    for agent in range(per_agent.shape[0]):
        hot = spec.highlight and agent in disturbed
        if neuron_style:
            color = "black" if hot else "tab:red"
        else:
            color = "black" if hot else None
        ax.plot(times, per_agent[agent], lw=1.4 if hot else 0.7, color=color,
                alpha=1.0 if hot else 0.7,
                zorder=3 if hot else 2)
    envelope = metrics.get("envelope")
    if envelope is None and "certificate" in spec._bundle:
        cert = spec._bundle["certificate"]
        if cert.get("passed", True) and "sigma_bar" in cert:
            gain = cert["K"] * cert["b_bar"] / (cert["sigma_bar"]
                                                - cert["sigma_under"])
            offset = gain * float(metrics.get("d_sup", 0.0))
            initial = cert["K"] * float(metrics.get("initial_sup", 0.0))
            envelope = {"samples": np.column_stack(
                [times, initial * np.exp(-cert["lambda_hat"] * times) + offset])}
    env_at = {}
    if envelope is not None:
        samples = np.asarray(envelope["samples"], dtype=float)
        ax.plot(samples[:, 0], samples[:, 1], "--", color="tab:green", lw=1.4,
                label="certified envelope", zorder=4)
        ax.legend()
        env_at = {float(t): v for t, v in samples}
    label = "neuron" if neuron_style else "agent"
    ax.set_xlabel("time (s)")
    ax.set_ylabel("deviation")
    ax.set_title(f"per-{label} deviation from the desired solution")
    header = (["time"] + [f"agent_{k}" for k in range(per_agent.shape[0])]
              + (["envelope"] if envelope is not None else []))
    rows = []
    for j, t in enumerate(times):
        row = [t] + [per_agent[k, j] for k in range(per_agent.shape[0])]
        if envelope is not None:
            row.append(env_at.get(float(t), ""))
        rows.append(row)
    return header, rows


_RENDERERS = {
    "formation": _plot_formation,
    "circle_bars": _plot_circle_bars,
    "delay_sweep": _plot_delay_sweep,
    "deviation_ts": _plot_deviation_ts,
    "neuron_ts": _plot_deviation_ts,
}


def render(spec: PlotSpec) -> str:
    """Draw the requested plot; writes ``spec.out`` and ``spec.out + '.data.csv'``.

    Inputs are never modified; nothing is written if the inputs are unusable.
    """
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    try:
        header, rows = _RENDERERS[spec.kind](spec, ax)
        fig.tight_layout()
        out_dir = os.path.dirname(os.path.abspath(spec.out))
        os.makedirs(out_dir, exist_ok=True)
        fig.savefig(spec.out)
    finally:
        plt.close(fig)
    _write_extract(spec.out, header, rows)
    return spec.out
