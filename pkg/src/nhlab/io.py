"""JSON/CSV serialization of reports, atomic writes and re-ingestion."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from nhlab import __version__
from nhlab.audit import PbcObcComparison, RealityCertificate, SpectrumReport, SweepReport, SymmetryAudit
from nhlab.defect import DefectReport, InGapState, LocalizationMetrics, ZeroModeRow
from nhlab.errors import NHLabError
from nhlab.model import Encirclement, ModelParams
from nhlab.topology import BerryPhaseResult, HermitianConsistency, Trajectory


class SchemaError(NHLabError):
    """External data does not match the expected layout; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def pairs(values) -> list[list[float]]:
    """Complex values as [re, im] pairs."""
    return [[_num(z.real), _num(z.imag)] for z in np.asarray(values, dtype=complex).ravel()]


def params_json(p: ModelParams) -> dict:
    return {name: str(getattr(p, name)) for name in ("v", "r", "gamma")}


def to_json(obj):
    """Plain JSON structure for every report type of the package."""
    if isinstance(obj, SpectrumReport):
        out = {
            "params": params_json(obj.params),
            "n_cells": obj.n_cells,
            "precision_used": obj.precision_used,
            "eigenvalues": pairs(obj.eigenvalues),
            "residual_max": _num(obj.residual_max),
            "max_abs_imag": _num(obj.max_abs_imag),
            "audit": to_json(obj.audit),
            "audit_failed_at_max_precision": obj.audit_failed_at_max_precision,
            "attempts": obj.attempts,
            "certificate": None if obj.certificate is None else to_json(obj.certificate),
        }
        if obj.eigenvalues_lo is not None:
            out["eigenvalues_lo"] = pairs(obj.eigenvalues_lo)
        return out
    if isinstance(obj, SweepReport):
        return {
            "params": params_json(obj.params),
            "rows": [{k: _num(v) if not isinstance(v, str) else v for k, v in r.items()} for r in obj.rows],
            "spectra": [to_json(r) for r in obj.reports],
        }
    if isinstance(obj, RealityCertificate):
        return {
            "n_cells": obj.n_cells,
            "verdict": obj.verdict,
            "certified": obj.certified,
            "char_poly": [str(c) for c in obj.char_poly],
            "q": [str(c) for c in obj.q],
            "zero_multiplicity": obj.zero_multiplicity,
            "positive_roots_distinct": obj.positive_roots_distinct,
            "real_roots_with_multiplicity": obj.real_roots_with_multiplicity,
        }
    if isinstance(obj, PbcObcComparison):
        return {
            "n_cells": obj.n_cells,
            "pbc_eigenvalues": pairs(obj.pbc_eigenvalues),
            "obc": to_json(obj.obc),
            "hausdorff": _num(obj.hausdorff),
            "pbc_max_abs_imag": _num(obj.pbc_max_abs_imag),
            "obc_max_abs_imag": _num(obj.obc_max_abs_imag),
            "breakdown": obj.breakdown,
        }
    if isinstance(obj, Trajectory):
        return {
            "loop_period": obj.loop_period,
            "winding": obj.winding,
            "winding_raw": None if obj.winding_raw is None else _num(obj.winding_raw),
            "status": obj.status,
            "projection": obj.projection,
            "k": [_num(pt.k) for pt in obj.points],
            "sx": pairs([pt.sx for pt in obj.points]),
            "sz": pairs([pt.sz for pt in obj.points]),
        }
    if isinstance(obj, Encirclement):
        return {
            "status": obj.status,
            "encircled": obj.encircled,
            "center": _num(obj.center),
            "semi_axis_real": _num(obj.semi_axis_real),
            "semi_axis_imag": _num(obj.semi_axis_imag),
            "k": [_num(k) for k in obj.k],
            "delta": pairs(obj.delta),
        }
    if isinstance(obj, DefectReport):
        return {
            "target": pairs([obj.target])[0],
            "cluster": pairs(obj.cluster),
            "algebraic_mult": obj.algebraic_mult,
            "geometric_mult": obj.geometric_mult,
            "jordan_chain_lengths": list(obj.jordan_chain_lengths),
            "rank_sequence": list(obj.rank_sequence),
            "defective": obj.defective,
            "defect_gap": obj.defect_gap,
            "max_chain_length": obj.max_chain_length,
            "method": obj.method,
            "window": None if obj.window is None else _num(obj.window),
        }
    if isinstance(obj, InGapState):
        return {
            "energy": pairs([obj.energy])[0],
            "vector": pairs(obj.vector),
            "residual": _num(obj.residual),
            "exact_zero": obj.exact_zero,
        }
    if isinstance(obj, LocalizationMetrics):
        return {
            "ipr": _num(obj.ipr),
            "left_edge_weight": _num(obj.left_edge_weight),
            "cell_profile": [_num(x) for x in obj.cell_profile],
        }
    if isinstance(obj, ZeroModeRow):
        return {
            "n_cells": obj.n_cells,
            "min_abs_energy": _num(obj.min_abs_energy),
            "cluster": pairs(obj.cluster),
            "algebraic_mult": obj.algebraic_mult,
            "geometric_mult": obj.geometric_mult,
            "condition": _num(obj.condition),
            "biorthogonal_norm": _num(obj.biorthogonal_norm),
        }
    if isinstance(obj, (SymmetryAudit, BerryPhaseResult, HermitianConsistency)):
        return {k: (v if isinstance(v, str) else _num(v)) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: to_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json(v) for v in obj]
    if is_dataclass(obj):
        return to_json(asdict(obj))
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, complex):
        return pairs([obj])[0]
    return _num(obj)


def envelope(result: dict, config: dict, timestamp: str | None = None) -> dict:
    return {
        "meta": {
            "tool_version": __version__,
            "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "config_echo": config,
        },
        "result": result,
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def check_writable(path: str | os.PathLike) -> None:
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise NHLabError(f"output directory {parent} does not exist")
    if not os.access(parent, os.W_OK):
        raise NHLabError(f"output directory {parent} is not writable")


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the target directory and rename into place."""
    target = Path(path)
    check_writable(target)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.resolve().parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _spectrum_rows(rep: SpectrumReport):
    for z in rep.eigenvalues:
        yield rep.n_cells, float(z.real), float(z.imag)


def emit_plot_data(report, fmt: str = "csv", config: dict | None = None) -> str:
    """Plot-ready text for a report.

    CSV layouts: spectra ``n_cells, re_e, im_e`` (one block of rows per N),
    trajectories ``k, re_sx, im_sx, re_sz, im_sz``, discriminant loops
    ``k, re_delta, im_delta``, PBC/OBC comparisons ``boundary, re_e, im_e``;
    other reports become a single row of their scalar fields.
    """
    if fmt == "json":
        return dumps(envelope(to_json(report), config or {}))
    if fmt != "csv":
        raise NHLabError(f"format must be csv or json, got {fmt!r}")
    if isinstance(report, SpectrumReport):
        return _csv(["n_cells", "re_e", "im_e"], _spectrum_rows(report))
    if isinstance(report, SweepReport):
        rows = [row for rep in report.reports for row in _spectrum_rows(rep)]
        return _csv(["n_cells", "re_e", "im_e"], rows)
    if isinstance(report, Trajectory):
        rows = [
            (pt.k, pt.sx.real, pt.sx.imag, pt.sz.real, pt.sz.imag) for pt in report.points
        ]
        return _csv(["k", "re_sx", "im_sx", "re_sz", "im_sz"], rows)
    if isinstance(report, Encirclement):
        rows = [(float(k), float(d.real), float(d.imag)) for k, d in zip(report.k, report.delta)]
        return _csv(["k", "re_delta", "im_delta"], rows)
    if isinstance(report, PbcObcComparison):
        rows = [("pbc", float(z.real), float(z.imag)) for z in report.pbc_eigenvalues]
        rows += [("obc", float(z.real), float(z.imag)) for z in report.obc.eigenvalues]
        return _csv(["boundary", "re_e", "im_e"], rows)
    if isinstance(report, list) and report and isinstance(report[0], ZeroModeRow):
        rows = [
            (r.n_cells, r.min_abs_energy, r.algebraic_mult, r.geometric_mult, r.condition)
            for r in report
        ]
        return _csv(["n_cells", "min_abs_e", "algebraic_mult", "geometric_mult", "condition"], rows)
    flat = to_json(report)
    if not isinstance(flat, dict):
        raise NHLabError(f"no CSV layout for {type(report).__name__}")
    scalars = {k: v for k, v in flat.items() if not isinstance(v, (list, dict))}
    return _csv(list(scalars), [list(scalars.values())])


def _pair_list(data, path: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise SchemaError(path, "expected a non-empty list of [re, im] pairs")
    out = np.empty(len(data), dtype=complex)
    for i, z in enumerate(data):
        if (
            not isinstance(z, list)
            or len(z) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in z)
        ):
            raise SchemaError(f"{path}[{i}]", "expected a [re, im] pair of numbers")
        out[i] = complex(z[0], z[1])
    return out


def load_eigenvalues(doc, source: str = "$") -> list[tuple[str, np.ndarray, np.ndarray | None]]:
    """Eigenvalue sets found in an emitted document or a bare pair list.

    Returns ``(path, hi, lo)`` triples; ``lo`` holds the low words of quad
    eigenvalues when present.
    """
    if isinstance(doc, list):
        return [(source, _pair_list(doc, source), None)]
    if not isinstance(doc, dict):
        raise SchemaError(source, "expected an object or a list of [re, im] pairs")
    if "result" in doc:
        return load_eigenvalues(doc["result"], f"{source}.result")
    found = []
    if "eigenvalues" in doc:
        lo = doc.get("eigenvalues_lo")
        lo_arr = None if lo is None else _pair_list(lo, f"{source}.eigenvalues_lo")
        hi = _pair_list(doc["eigenvalues"], f"{source}.eigenvalues")
        if lo_arr is not None and len(lo_arr) != len(hi):
            raise SchemaError(f"{source}.eigenvalues_lo", "length differs from eigenvalues")
        found.append((f"{source}.eigenvalues", hi, lo_arr))
    if "spectra" in doc:
        if not isinstance(doc["spectra"], list):
            raise SchemaError(f"{source}.spectra", "expected a list")
        for i, s in enumerate(doc["spectra"]):
            found.extend(load_eigenvalues(s, f"{source}.spectra[{i}]"))
    if "obc" in doc:
        found.extend(load_eigenvalues(doc["obc"], f"{source}.obc"))
    if not found:
        raise SchemaError(source, "no 'eigenvalues' field found")
    return found
