"""File formats shared by the command-line tools.

Floats are written with ``repr`` precision and JSON keys are sorted, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from typing import Iterable

import numpy as np

from .errors import SchemaError
from .spectrum import BiphotonAmplitudes, CrystalConfig, azimuthal_marginal
from .tomography import MubSet, TomographyCounts

__all__ = [
    "write_json",
    "write_text",
    "spectrum_rows",
    "write_spectrum_csv",
    "spectrum_document",
    "write_marginal_csv",
    "write_curve_csv",
    "write_surface_csv",
    "write_counts_csv",
    "read_counts_csv",
    "density_document",
    "COUNTS_COLUMNS",
]

COUNTS_COLUMNS = ("projector_id", "basis_a", "state_a", "basis_b", "state_b", "counts", "seconds")


def _clean(obj):
    """Convert numpy scalars and arrays, tuples and complex numbers to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_text(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_json(path, obj) -> None:
    write_text(path, dumps(obj))


def _csv_text(header: Iterable[str], rows: Iterable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def spectrum_rows(amps: BiphotonAmplitudes) -> list:
    return [
        (ls, ps, li, pi, c.real, c.imag, abs(c) ** 2)
        for (ls, ps, li, pi), c in sorted(amps.entries.items())
    ]


def write_spectrum_csv(path, amps: BiphotonAmplitudes) -> None:
    header = ("l_s", "p_s", "l_i", "p_i", "re", "im", "prob")
    write_text(path, _csv_text(header, spectrum_rows(amps)))


def spectrum_document(amps: BiphotonAmplitudes, crystal: CrystalConfig) -> dict:
    return {
        "pump": amps.pump.to_dict(),
        "crystal": crystal.to_dict(),
        "window": {"l_max": amps.window.l_max, "p_max": amps.window.p_max},
        "boundary_fraction": amps.boundary_fraction,
        "raw_norm": amps.meta.get("raw_norm", amps.norm),
        "entries": [
            {"l_s": r[0], "p_s": r[1], "l_i": r[2], "p_i": r[3], "re": r[4], "im": r[5], "prob": r[6]}
            for r in spectrum_rows(amps)
        ],
    }


def write_marginal_csv(path, amps: BiphotonAmplitudes) -> None:
    """Bar-chart data: probability per ``(l_s, l_i)`` summed over radial orders."""
    rows = [(ls, li, p) for (ls, li), p in azimuthal_marginal(amps).items()]
    write_text(path, _csv_text(("l_s", "l_i", "prob"), rows))


def write_curve_csv(path, phases, values, value_name: str = "value") -> None:
    write_text(path, _csv_text(("phase", value_name), zip(np.asarray(phases, float), np.asarray(values, float))))


def write_surface_csv(path, theta_a, theta_b, values) -> None:
    """Dense grid, one row per ``theta_a`` sample; the header carries the ``theta_b`` axis."""
    theta_b = np.asarray(theta_b, float)
    header = ["theta_a\\theta_b"] + [repr(float(t)) for t in theta_b]
    rows = [[float(ta)] + [float(v) for v in row] for ta, row in zip(np.asarray(theta_a, float), np.asarray(values))]
    write_text(path, _csv_text(header, rows))


def write_counts_csv(path, counts: TomographyCounts) -> None:
    rows = []
    for pid, (lab, n, t) in enumerate(zip(counts.labels, counts.counts, counts.integration_time)):
        ba, sa, bb, sb = lab
        n = float(n)
        rows.append((pid, ba, sa, bb, sb, int(n) if n.is_integer() else n, float(t)))
    write_text(path, _csv_text(COUNTS_COLUMNS, rows))


def read_counts_csv(path, mub: MubSet) -> TomographyCounts:
    """Parse a counts file and order it by the projector labels of ``mub``."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(COUNTS_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise SchemaError(f"{os.fspath(path)}: missing columns {sorted(missing)}")
            records = list(reader)
    except OSError as exc:
        raise SchemaError(f"cannot read counts file {os.fspath(path)!r}: {exc}") from exc
    by_label = {}
    for k, rec in enumerate(records, start=2):
        try:
            lab = tuple(int(rec[c]) for c in ("basis_a", "state_a", "basis_b", "state_b"))
            n, t = float(rec["counts"]), float(rec["seconds"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{os.fspath(path)} line {k}: {exc}") from exc
        if n < 0 or not t > 0:
            raise SchemaError(f"{os.fspath(path)} line {k}: counts must be >= 0 and seconds > 0")
        if lab in by_label:
            raise SchemaError(f"{os.fspath(path)} line {k}: duplicate projector {lab}")
        by_label[lab] = (n, t)
    absent = [lab for lab in mub.labels if lab not in by_label]
    if absent:
        raise SchemaError(f"{os.fspath(path)}: {len(absent)} projectors of the {mub.mode} set are missing")
    extra = set(by_label) - set(mub.labels)
    if extra:
        raise SchemaError(f"{os.fspath(path)}: projectors {sorted(extra)[:3]} are not in the {mub.mode} set")
    n = np.array([by_label[lab][0] for lab in mub.labels])
    t = np.array([by_label[lab][1] for lab in mub.labels])
    return TomographyCounts(list(mub.labels), n, t)


def density_document(rho, metrics: dict) -> dict:
    rho = np.asarray(rho, complex)
    return {"rho_real": rho.real, "rho_imag": rho.imag, "metrics": metrics}
