"""Report emission: bit-stable CSV, JSON summaries, SVG log-log plots,
and flat binary solution dumps.

CSV and JSON are byte-stable across runs and thread counts (fixed 12
significant digits, sorted keys, fixed newlines); SVG is best-effort.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "cmalab"


def fmt(x) -> str:
    """Fixed decimal formatting: 12 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{float(x):.12g}"
    return str(x)


def _jsonable(obj):
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return float(fmt(v))
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    return obj


def write_csv(path, header, rows):
    lines = [",".join(str(c) for c in header)]
    for row in rows:
        lines.append(",".join(fmt(c) for c in row))
    data = "\n".join(lines) + "\n"
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(data)
    return path


def write_json(path, payload):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        json.dump(_jsonable(payload), f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def write_solution_dump(path_base, fn):
    """Flat binary grid (C order float64) plus a JSON header."""
    dom = fn.domain
    raw = np.ascontiguousarray(fn.values, dtype="<f8").tobytes()
    with open(path_base + ".bin", "wb") as f:
        f.write(raw)
    write_json(path_base + ".json", {
        "dims": list(dom.grid_shape),
        "spacing": dom.h,
        "box_halfwidth": dom.box_halfwidth,
        "order": "C",
        "dtype": "<f8",
        "convention": "ddc = 2i d dbar; (ddc |z|^2)^n = 4^n n! dV",
        "name": fn.name,
    })
    return path_base + ".bin"


def plot_inequality(path, report):
    """Log-log scatter of the scanned points with the fitted bound curve."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    x = np.asarray(report.parameters, dtype=object)
    try:
        xf = np.asarray(report.parameters, dtype=float)
    except (TypeError, ValueError):
        xf = np.arange(len(report.parameters), dtype=float)
    lhs = np.asarray(report.lhs, float)
    rhs = np.asarray(report.rhs, float)
    ax.plot(xf, lhs, "o", color="#1c1c4a", label="measured")
    ax.plot(xf, rhs, "-", color="#742d18", label="fitted bound")
    pos = (xf > 0) & (lhs > 0)
    if pos.sum() >= 2 and (rhs > 0).all():
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(report.parameter_name)
    ax.set_ylabel("mass / value")
    ax.set_title(report.inequality_id)
    ax.legend(fontsize=8)
    fig.tight_layout()
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def plot_holder(path, report):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    d = np.asarray(report.deltas, float)
    g = np.asarray(report.sup_gaps, float)
    ax.plot(d, g, "o", color="#1c1c4a", label="sup gap")
    pred = np.asarray([row[3] for row in report.rows()], float)
    ax.plot(d, pred, "-", color="#742d18",
            label=f"fit slope {report.fit_exponent_raw:.3g}")
    ref = g.max() * (d / d.max()) ** report.alpha4 if g.max() > 0 else d * 0
    ax.plot(d, ref, "--", color="#555555",
            label=f"alpha4 = {report.alpha4:.3g}")
    if (g > 0).sum() >= 2:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("delta")
    ax.set_ylabel("sup gap on the shrunken domain")
    ax.legend(fontsize=8)
    fig.tight_layout()
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def emit_report(report, outdir, name, formats=("csv", "svg", "json")):
    """Write one report in the selected formats; returns the file list."""
    from .lab import HolderReport

    written = []
    base = os.path.join(outdir, name)
    if "csv" in formats:
        written.append(write_csv(base + ".csv", report.header(), report.rows()))
    if "svg" in formats:
        if isinstance(report, HolderReport):
            written.append(plot_holder(base + ".svg", report))
        else:
            written.append(plot_inequality(base + ".svg", report))
    if "json" in formats:
        payload = _report_payload(report)
        written.append(write_json(base + ".json", payload))
    return written


def _report_payload(report):
    from .lab import HolderReport

    if isinstance(report, HolderReport):
        return {
            "kind": "holder",
            "deltas": report.deltas, "eps": report.eps,
            "sup_gaps": report.sup_gaps, "l1_gaps": report.l1_gaps,
            "alpha": report.alpha, "alpha2": report.alpha2,
            "alpha3": report.alpha3, "alpha4": report.alpha4,
            "coupling_exponent": report.coupling_exponent,
            "delta0": report.delta0,
            "fit_exponent_raw": report.fit_exponent_raw,
            "empirical_alpha": report.empirical_alpha,
            "fit_residual": report.fit_residual,
            "lapest_slope": report.lapest_slope,
            "glue_constants": report.glue_constants,
            "lemma41_constants": report.lemma41_constants,
            "flags": report.flags, "stability": report.stability,
            "l1": report.l1, "notes": report.notes, "passed": report.passed,
        }
    return {
        "kind": "inequality",
        "id": report.inequality_id,
        "parameter": report.parameter_name,
        "parameters": report.parameters,
        "lhs": report.lhs, "rhs": report.rhs,
        "passed": report.passed, "worst_slack": report.worst_slack,
        "fitted": report.fitted, "notes": report.notes,
        "hypotheses_ok": report.hypotheses_ok,
    }


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
