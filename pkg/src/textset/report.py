"""Render evaluation results as aligned text tables, CSV histograms, and
deterministic JSON documents."""

from __future__ import annotations

import csv
import json

from .criteria import (
    AngleProfile,
    ConditionTally,
    NormRatioProfile,
    SingleConditionTally,
)

__all__ = [
    "MissingCell",
    "render_tally_table",
    "export_histogram",
    "summary_report",
    "dumps_canonical",
]

TOOL_VERSION = "0.1.0"


class MissingCell(ValueError):
    pass


def _grid_meta(grid) -> dict:
    return {"lo": grid.lo, "hi": grid.hi, "count": grid.count}


def tally_payload(tally) -> dict:
    """Full-precision JSON payload for one tally, including grid metadata."""
    if isinstance(tally, ConditionTally):
        return {
            "cells": tally.cells(),
            "n_samples": tally.n_samples,
            "n_grid_points": tally.n_grid_points,
            "grids": [_grid_meta(tally.grid1), _grid_meta(tally.grid2)],
        }
    if isinstance(tally, SingleConditionTally):
        return {
            "cells": tally.cells(),
            "n_samples": tally.n_samples,
            "n_grid_points": tally.n_grid_points,
            "grids": [_grid_meta(tally.grid)],
        }
    raise TypeError(f"not a tally: {type(tally).__name__}")


def render_tally_table(tallies: dict[str, ConditionTally | SingleConditionTally]) -> tuple[str, dict]:
    """Aligned text table (tt tf ft ff columns, 2 decimals) plus JSON dict.

    Keys are row labels (typically "model/measure"). Raises MissingCell for
    empty input or a tally computed over zero samples.
    """
    if not tallies:
        raise MissingCell("no tallies to render")
    for label, tally in tallies.items():
        if tally.n_samples == 0:
            raise MissingCell(f"tally {label!r} has no samples")
    present = set()
    for tally in tallies.values():
        present.update(tally.cells())
    headers = [h for h in ("tt", "tf", "ft", "ff", "t", "f") if h in present]
    label_w = max(len("label"), max(len(l) for l in tallies))
    lines = ["  ".join(["label".ljust(label_w)] + [h.rjust(7) for h in headers])]
    json_doc: dict = {}
    for label, tally in tallies.items():
        cells = tally.cells()
        row = [label.ljust(label_w)]
        for h in headers:
            val = cells.get(h)
            row.append(("-" if val is None else f"{val:.2f}").rjust(7))
        lines.append("  ".join(row))
        json_doc[label] = tally_payload(tally)
    return "\n".join(lines) + "\n", json_doc


def export_histogram(profile: AngleProfile | NormRatioProfile, path) -> None:
    """Write bin_left,bin_right,count CSV plus a .json sidecar with fractions."""
    edges = profile.bin_edges
    counts = profile.counts
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "count"])
        for i, cnt in enumerate(counts):
            writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                             int(cnt)])
    if isinstance(profile, AngleProfile):
        sidecar = dict(profile.summary)
    else:
        sidecar = {
            "median": profile.median,
            "comparable_fraction": profile.comparable_fraction,
            "n": profile.n,
        }
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(sidecar))


def summary_report(entries: list[dict], corpus_digest: str = "",
                   config: dict | None = None) -> dict:
    """Stable-schema summary document over all evaluated criteria.

    Each entry carries {model_id, measure, criterion, payload}; the document
    adds config, corpus digest, and tool version. Serialization via
    dumps_canonical is byte-deterministic for identical inputs.
    """
    if not entries:
        raise MissingCell("no criteria results to summarize")
    for e in entries:
        for key in ("model_id", "measure", "criterion", "payload"):
            if key not in e:
                raise MissingCell(f"entry missing {key!r}")
    ordered = sorted(entries,
                     key=lambda e: (e["criterion"], e["model_id"], e["measure"]))
    return {
        "config": config or {},
        "corpus_digest": corpus_digest,
        "entries": ordered,
        "tool_version": TOOL_VERSION,
    }


def dumps_canonical(obj) -> str:
    """JSON with sorted keys and shortest round-trip floats."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False,
                      default=_json_default)


def _json_default(obj):
    try:
        import numpy as np
    except ImportError:  # pragma: no cover
        raise TypeError(f"not serializable: {type(obj).__name__}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")
