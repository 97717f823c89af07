"""Panel ingestion, report emission, and run manifests.

Panel files are wide CSV: one row per unit, first column a unit
identifier, header row carrying period labels, every cell a finite
number.  Report CSVs put one row per horizon (plus a final "avg" row)
and one bias/mse/coverage column triple per method; report JSON embeds
the full run manifest.  Floats are written with 17 significant digits so
files round-trip bit-identically.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from ._version import __version__
from .exceptions import PanelFormatError
from .panel import PanelDataset

__all__ = [
    "RunManifest",
    "load_panel",
    "load_panel_config",
    "save_panel",
    "write_report",
    "read_report",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class RunManifest:
    """Provenance block embedded in every emitted report."""

    tool_version: str
    command: str
    config: dict
    seed: int | None
    input_digests: dict
    created_at: str
    wall_time_s: float

    @classmethod
    def create(cls, command, config, seed=None, inputs=(), wall_time_s=0.0) -> "RunManifest":
        digests = {}
        for path in inputs:
            h = hashlib.sha256()
            with open(path, "rb") as f:
                h.update(f.read())
            digests[str(path)] = h.hexdigest()
        return cls(
            tool_version=__version__,
            command=command,
            config=config,
            seed=seed,
            input_digests=digests,
            created_at=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            wall_time_s=float(wall_time_s),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)


def load_panel(path, treated, t0: int) -> tuple[PanelDataset, tuple[str, ...]]:
    """Read a wide CSV panel, reordering the treated units first.

    ``treated`` is a sequence of unit identifiers (strings as they appear
    in the first column).  Returns the dataset and the unit identifiers
    in storage order.
    """
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if len(rows) < 3:
        raise PanelFormatError(f"{path}: need a header and at least two unit rows")
    header = rows[0]
    width = len(header)
    if width < 3:
        raise PanelFormatError(f"{path}: need at least two period columns")
    period_labels = header[1:]

    ids = []
    data = []
    for rownum, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise PanelFormatError(
                f"{path}: row {rownum} has {len(row)} cells, expected {width}"
            )
        unit_id = row[0]
        if unit_id in ids:
            raise PanelFormatError(f"{path}: duplicate unit id {unit_id!r} (row {rownum})")
        values = []
        for col, cell in enumerate(row[1:], start=2):
            try:
                val = float(cell)
            except ValueError:
                raise PanelFormatError(
                    f"{path}: row {rownum} ({unit_id!r}), column {col} "
                    f"({period_labels[col - 2]!r}): cannot parse {cell!r}"
                ) from None
            if not np.isfinite(val):
                raise PanelFormatError(
                    f"{path}: row {rownum} ({unit_id!r}), column {col}: non-finite value"
                )
            values.append(val)
        ids.append(unit_id)
        data.append(values)

    treated = [str(u) for u in treated]
    if not treated:
        raise PanelFormatError("no treated units given")
    unknown = [u for u in treated if u not in ids]
    if unknown:
        raise PanelFormatError(f"treated ids not in panel: {unknown}")
    if len(set(treated)) != len(treated):
        raise PanelFormatError("duplicate treated ids")
    if len(treated) >= len(ids):
        raise PanelFormatError("at least one unit must remain untreated")
    n_periods = len(period_labels)
    if not 1 <= t0 < n_periods:
        raise PanelFormatError(
            f"t0 must lie in [1, {n_periods - 1}] for {n_periods} periods, got {t0}"
        )

    order = treated + [u for u in ids if u not in treated]
    index = {u: i for i, u in enumerate(ids)}
    Y = np.array([data[index[u]] for u in order], dtype=np.float64)
    panel = PanelDataset(Y=Y, n_treated=len(treated), t0=int(t0))
    return panel, tuple(order)


def load_panel_config(path) -> dict:
    """Sidecar JSON: {"treated": [...], "t0": int, "factors": int, "correction": {...}}."""
    with open(path, encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise PanelFormatError(f"{path}: config must be a JSON object")
    return cfg


def save_panel(path, Y, unit_ids=None, period_labels=None) -> None:
    """Write a wide CSV panel; floats use 17 significant digits."""
    Y = np.asarray(Y, dtype=np.float64)
    n, t = Y.shape
    if unit_ids is None:
        unit_ids = [f"unit{i + 1}" for i in range(n)]
    if period_labels is None:
        period_labels = [str(j + 1) for j in range(t)]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["unit", *period_labels])
        for i in range(n):
            w.writerow([unit_ids[i], *(_fmt(v) for v in Y[i])])


def _report_csv(report) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf)
    header = ["horizon"]
    for m in report.methods:
        header += [f"{m}_bias", f"{m}_mse", f"{m}_coverage"]
    w.writerow(header)
    for j, h in enumerate(report.horizons):
        row = [str(h)]
        for i in range(len(report.methods)):
            row += [_fmt(report.bias[i, j]), _fmt(report.mse[i, j]), _fmt(report.coverage[i, j])]
        w.writerow(row)
    row = ["avg"]
    for i in range(len(report.methods)):
        row += [
            _fmt(np.mean(report.bias[i])),
            _fmt(np.mean(report.mse[i])),
            _fmt(np.mean(report.coverage[i])),
        ]
    w.writerow(row)
    return buf.getvalue()


def write_report(report, path, format: str = "csv") -> None:
    """Emit a simulation report as CSV (tables only) or JSON (with manifest)."""
    if format == "csv":
        text = _report_csv(report)
    elif format == "json":
        text = json.dumps(report.payload(), indent=2, sort_keys=True) + "\n"
    else:
        raise PanelFormatError(f"unknown report format {format!r}")
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def read_report(path):
    """Read a JSON report back; inverse of ``write_report(..., "json")``."""
    from .mc import McReport

    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    return McReport.from_payload(payload)
