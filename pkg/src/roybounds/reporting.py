"""CSV/JSON artifact plumbing and cost-survival summaries.

Conventions shared by every artifact: long format, one grid cell per row;
floats written with repr() so re-ingestion is bit-exact; missing values as
empty fields, +inf as the string "inf"; an optional leading comment line
"# config: {...}" echoes the producing configuration.  Readers skip any
line starting with '#'.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import BoundSurface, IfBoundCurve, RandomCostCdfBounds
from .envelopes import EnvelopeTable, SandwichTable
from .errors import DomainError
from .estimation import ConditionalCdfTable
from .inference import ConfidenceBand
from .model import ObservationSample


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def parse_float(s: str) -> float:
    s = s.strip()
    if s == "":
        return math.nan
    if s == "inf":
        return math.inf
    if s == "-inf":
        return -math.inf
    return float(s)


def json_ready(obj):
    """Recursive conversion to JSON-safe structures (no NaN or Infinity)."""
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _open_writer(path, config):
    handle = open(path, "w", newline="")
    if config is not None:
        handle.write("# config: " + json.dumps(json_ready(config), sort_keys=True) + "\n")
    return handle, csv.writer(handle, lineterminator="\n")


def write_json_sidecar(csv_path, artifact: str, data: dict, config=None) -> Path:
    path = Path(csv_path).with_suffix(".json")
    payload = {"artifact": artifact, "config": json_ready(config),
               "data": json_ready(data)}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def ingest_csv(path) -> ObservationSample:
    """Parse an observation file with columns y, d, z (case-insensitive).

    An optional b_lower column sets the file-level support bound and must
    be constant.  Diagnostics name the physical line of the offending row.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = None
        cols = {}
        rows_y, rows_d, rows_z, rows_b, lines = [], [], [], [], []
        for row in reader:
            if not row or row[0].lstrip().startswith("#"):
                continue
            if header is None:
                header = [c.strip().lower() for c in row]
                cols = {name: k for k, name in enumerate(header)}
                missing = [c for c in ("y", "d", "z") if c not in cols]
                if missing:
                    raise DomainError(f"missing column(s): {', '.join(missing)}")
                continue
            line = reader.line_num

            def cell(name):
                k = cols[name]
                if k >= len(row):
                    raise DomainError(f"row {line}: missing value for column {name!r}")
                try:
                    return parse_float(row[k])
                except ValueError:
                    raise DomainError(
                        f"row {line}: column {name!r} is not numeric: {row[k]!r}") from None

            yv, dv, zv = cell("y"), cell("d"), cell("z")
            if dv not in (0.0, 1.0):
                raise DomainError(f"row {line}: d must be 0 or 1, got {row[cols['d']]!r}")
            if not (math.isfinite(yv) and math.isfinite(zv)):
                raise DomainError(f"row {line}: y and z must be finite")
            rows_y.append(yv)
            rows_d.append(dv)
            rows_z.append(zv)
            lines.append(line)
            if "b_lower" in cols:
                bv = cell("b_lower")
                rows_b.append(bv)
                if bv != rows_b[0]:
                    raise DomainError(
                        f"row {line}: b_lower must be constant across the file")
    if header is None:
        raise DomainError("empty file: no header row")
    if not rows_y:
        raise DomainError("no data rows")
    b_low = rows_b[0] if rows_b else 0.0
    y = np.array(rows_y)
    below = np.flatnonzero(y < b_low - 1e-12)
    if below.size:
        raise DomainError(
            f"{below.size} row(s) have y below the support bound {b_low!r}, "
            f"first at row {lines[below[0]]}")
    return ObservationSample(y=y, d=np.array(rows_d), z=np.array(rows_z),
                             lower_support_bound=float(b_low))


def write_sample_csv(sample: ObservationSample, path, config=None) -> None:
    handle, writer = _open_writer(path, config)
    with handle:
        writer.writerow(["y", "d", "z", "b_lower"])
        b = fmt(sample.lower_support_bound)
        for yi, di, zi in zip(sample.y, sample.d, sample.z):
            writer.writerow([fmt(yi), str(int(di)), fmt(zi), b])


def _write_grid_long(path, config, y, z, names, matrices, per_z=()):
    """Long-format writer: one row per (y, z), columns from matrices.

    per_z entries are (name, vector over z) appended to every row.
    """
    handle, writer = _open_writer(path, config)
    with handle:
        writer.writerow(["y", "z"] + list(names) + [n for n, _ in per_z])
        for iz, zv in enumerate(z):
            for iy, yv in enumerate(y):
                row = [fmt(yv), fmt(zv)] + [fmt(m[iy, iz]) for m in matrices]
                row += [fmt(v[iz]) for _, v in per_z]
                writer.writerow(row)


def write_table_csv(table: ConditionalCdfTable, path, config=None) -> None:
    _write_grid_long(path, config, table.grid.y, table.grid.z,
                     ["F", "F0", "F1"], [table.F, table.F0, table.F1],
                     per_z=[("p", table.p)])


def write_envelope_csv(env: EnvelopeTable, path, config=None) -> None:
    _write_grid_long(path, config, env.grid.y, env.grid.z,
                     ["Flow", "Fhigh"], [env.Flow, env.Fhigh])


def write_sandwich_csv(sw: SandwichTable, path, config=None) -> None:
    _write_grid_long(path, config, sw.grid.y, sw.grid.z, ["L", "U"],
                     [sw.L, sw.U])


def write_surface_csv(surface: BoundSurface, path, config=None) -> None:
    _write_grid_long(path, config, surface.grid.y, surface.grid.z,
                     ["clow", "chigh", "identified"],
                     [surface.Clow, surface.Chigh,
                      surface.identified_mask.astype(float)])


def write_if_curve_csv(curve: IfBoundCurve, path, config=None) -> None:
    handle, writer = _open_writer(path, config)
    with handle:
        writer.writerow(["z", "m", "m0b", "p", "clow", "chigh"])
        for k, zv in enumerate(curve.z_grid):
            writer.writerow([fmt(zv), fmt(curve.m[k]), fmt(curve.m0b[k]),
                             fmt(curve.p[k]), fmt(curve.Clow[k]),
                             fmt(curve.Chigh[k])])


def write_random_cost_csv(rc: RandomCostCdfBounds, path, config=None) -> None:
    handle, writer = _open_writer(path, config)
    with handle:
        writer.writerow(["c", "z", "FL", "FU"])
        for iz, zv in enumerate(rc.z_grid):
            for ic, cv in enumerate(rc.cost_grid):
                writer.writerow([fmt(cv), fmt(zv), fmt(rc.FL[ic, iz]),
                                 fmt(rc.FU[ic, iz])])


def write_band_csv(band: ConfidenceBand, path, config=None) -> None:
    _write_grid_long(path, config, band.grid.y, band.grid.z,
                     ["Cn", "estimate", "se", "critval", "identified"],
                     [band.Cn, band.Chat, band.se, band.critical_values,
                      band.identified_mask.astype(float)])


def read_long_csv(path):
    """Generic reader for any artifact CSV: (columns dict, config dict or None).

    Columns parse to float arrays; label columns that contain any
    non-numeric cell come back as string arrays instead.
    """
    config = None
    with open(path, newline="") as handle:
        header = None
        data = []
        reader = csv.reader(handle)
        for row in reader:
            if row and row[0].lstrip().startswith("#"):
                text = ",".join(row)
                stripped = text.lstrip().lstrip("#").strip()
                if stripped.startswith("config:"):
                    config = json.loads(stripped[len("config:"):])
                continue
            if header is None:
                header = [c.strip() for c in row]
                continue
            data.append(row)
    if header is None:
        raise DomainError("empty file: no header row")
    out = {}
    for k, name in enumerate(header):
        cells = [row[k] for row in data]
        try:
            out[name] = np.array([parse_float(c) for c in cells])
        except ValueError:
            out[name] = np.array(cells)
    return out, config


def band_values_at(band: ConfidenceBand, y, z):
    """Bilinear band interpolation, clamped to the grid hull.

    Returns (values, clamped flags).
    """
    yg, zg = band.grid.y, band.grid.z
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    yc = np.clip(y, yg[0], yg[-1])
    zc = np.clip(z, zg[0], zg[-1])
    clamped = (y != yc) | (z != zc)
    out = np.empty_like(yc)
    if zg.size == 1:
        out[:] = np.interp(yc, yg, band.Cn[:, 0])
        return out, clamped
    iz = np.clip(np.searchsorted(zg, zc, side="right") - 1, 0, zg.size - 2)
    for col in np.unique(iz):
        sel = iz == col
        w = (zc[sel] - zg[col]) / (zg[col + 1] - zg[col])
        v0 = np.interp(yc[sel], yg, band.Cn[:, col])
        v1 = np.interp(yc[sel], yg, band.Cn[:, col + 1])
        out[sel] = (1.0 - w) * v0 + w * v1
    return out, clamped


@dataclass(frozen=True)
class SurvivalSummary:
    """Proportions of individuals whose band cost exceeds thresholds."""

    thresholds_abs: np.ndarray
    thresholds_ratio: np.ndarray
    bin_edges: np.ndarray
    bin_counts: tuple
    prop_abs: np.ndarray
    prop_ratio: np.ndarray
    pooled_abs: np.ndarray
    pooled_ratio: np.ndarray
    clamped_count: int
    ratio_excluded: int


def cost_survival(band: ConfidenceBand, sample: ObservationSample,
                  thresholds_abs=None, thresholds_ratio=None,
                  z_bins=None) -> SurvivalSummary:
    """Per-individual band evaluation aggregated into exceedance curves.

    Ratio thresholds compare Cn(y_i, z_i) / y_i; rows with y <= 0 are
    excluded from the ratio denominators.  Empty z-bins report NaN
    proportions (serialized as nulls) rather than aborting.
    """
    values, clamped = band_values_at(band, sample.y, sample.z)
    if thresholds_abs is None:
        top = float(np.nanmax(values)) if values.size else 1.0
        thresholds_abs = np.linspace(0.0, max(top, 1e-12), 21)
    if thresholds_ratio is None:
        thresholds_ratio = np.linspace(0.0, 0.5, 11)
    thresholds_abs = np.asarray(thresholds_abs, dtype=float)
    thresholds_ratio = np.asarray(thresholds_ratio, dtype=float)
    if z_bins is None:
        z_bins = np.quantile(sample.z, [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])
    z_bins = np.asarray(z_bins, dtype=float)
    nbins = z_bins.size - 1
    which = np.clip(np.digitize(sample.z, z_bins[1:-1], right=False), 0, nbins - 1)

    pos = sample.y > 0
    ratio = np.full_like(values, np.nan)
    ratio[pos] = values[pos] / sample.y[pos]

    prop_abs = np.full((thresholds_abs.size, nbins), np.nan)
    prop_ratio = np.full((thresholds_ratio.size, nbins), np.nan)
    counts = []
    for b in range(nbins):
        sel = which == b
        counts.append(int(np.sum(sel)))
        if counts[-1]:
            prop_abs[:, b] = np.mean(values[sel][None, :]
                                     >= thresholds_abs[:, None], axis=1)
        selr = sel & pos
        if np.any(selr):
            prop_ratio[:, b] = np.mean(ratio[selr][None, :]
                                       >= thresholds_ratio[:, None], axis=1)
    pooled_abs = np.mean(values[None, :] >= thresholds_abs[:, None], axis=1)
    if np.any(pos):
        pooled_ratio = np.mean(ratio[pos][None, :]
                               >= thresholds_ratio[:, None], axis=1)
    else:
        pooled_ratio = np.full(thresholds_ratio.size, np.nan)
    return SurvivalSummary(thresholds_abs=thresholds_abs,
                           thresholds_ratio=thresholds_ratio,
                           bin_edges=z_bins, bin_counts=tuple(counts),
                           prop_abs=prop_abs, prop_ratio=prop_ratio,
                           pooled_abs=pooled_abs, pooled_ratio=pooled_ratio,
                           clamped_count=int(np.sum(clamped)),
                           ratio_excluded=int(np.sum(~pos)))


def write_survival_csv(summary: SurvivalSummary, path, config=None) -> None:
    handle, writer = _open_writer(path, config)
    with handle:
        writer.writerow(["kind", "threshold", "zbin", "proportion", "count"])
        edges = summary.bin_edges
        labels = [f"[{fmt(edges[b])},{fmt(edges[b + 1])})"
                  for b in range(edges.size - 1)]
        for kind, thresholds, props, pooled in (
                ("abs", summary.thresholds_abs, summary.prop_abs, summary.pooled_abs),
                ("ratio", summary.thresholds_ratio, summary.prop_ratio,
                 summary.pooled_ratio)):
            for it, t in enumerate(thresholds):
                for b, label in enumerate(labels):
                    writer.writerow([kind, fmt(t), label, fmt(props[it, b]),
                                     str(summary.bin_counts[b])])
                writer.writerow([kind, fmt(t), "pooled", fmt(pooled[it]),
                                 str(sum(summary.bin_counts))])


def survival_to_dict(summary: SurvivalSummary) -> dict:
    return {
        "thresholds_abs": summary.thresholds_abs,
        "thresholds_ratio": summary.thresholds_ratio,
        "bin_edges": summary.bin_edges,
        "bin_counts": list(summary.bin_counts),
        "prop_abs": summary.prop_abs,
        "prop_ratio": summary.prop_ratio,
        "pooled_abs": summary.pooled_abs,
        "pooled_ratio": summary.pooled_ratio,
        "clamped_count": summary.clamped_count,
        "ratio_excluded": summary.ratio_excluded,
    }
