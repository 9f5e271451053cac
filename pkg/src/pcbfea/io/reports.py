"""CSV tables for frequencies, participation, histories and summaries.

Floats are written with Python's shortest round-trip ``repr`` so files are
byte-identical for identical inputs on any platform.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from ..modal_post import DIRECTIONS, ModeComparison, ParticipationTable
from ..solvers.modal import ModeSet
from ..solvers.nonlinear import ConvergenceHistory
from ..solvers.transient import TransientResult


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows), encoding="utf-8")
    return path


def frequency_rows(modes: ModeSet):
    header = ["mode", "frequency_hz", "eigenvalue", "residual"]
    res = modes.residuals if modes.residuals is not None else [None] * len(modes)
    rows = [(i + 1, f, lam, r) for i, (f, lam, r) in enumerate(zip(modes.frequencies, modes.eigenvalues, res))]
    return header, rows


def participation_rows(table: ParticipationTable):
    """Effective masses per mode plus a totals row; rotations last, as in the usual table."""
    header = ["mode", "frequency_hz"] + [f"effective_mass_{d}" for d in DIRECTIONS] + [f"ratio_{d}" for d in DIRECTIONS]
    ratio = table.cumulative_ratio
    rows = [
        (i + 1, table.frequencies[i], *table.effective_mass[i], *ratio[i]) for i in range(len(table))
    ]
    rows.append(("total", None, *table.captured, *(table.captured / table.total)))
    return header, rows


def effective_mass_curve_rows(table: ParticipationTable):
    """(frequency, cumulative effective-mass ratio per direction)."""
    header = ["frequency_hz"] + [f"cumulative_ratio_{d}" for d in DIRECTIONS]
    return header, [(f, *r) for f, r in zip(table.frequencies, table.cumulative_ratio)]


def comparison_rows(cmp: ModeComparison):
    header = ["mode", "frequency_a_hz", "frequency_b_hz", "delta_hz", "percent", "paired_mode_b", "mac"]
    rows = [
        (i + 1, cmp.frequency_a[i], cmp.frequency_b[i], cmp.delta[i], cmp.percent[i], int(cmp.pairing[i]) + 1, cmp.paired_mac[i])
        for i in range(len(cmp.pairing))
    ]
    return header, rows


def history_rows(history: ConvergenceHistory):
    return list(ConvergenceHistory.COLUMNS), history.rows()


def substep_rows(history: ConvergenceHistory):
    header = ["substep", "load_factor", "iterations", "converged"]
    rows = [
        (i + 1, lf, it, ok)
        for i, (lf, it, ok) in enumerate(
            zip(history.substep_load_factor, history.substep_iterations, history.substep_converged)
        )
    ]
    return header, rows


def probe_rows(result: TransientResult, labels=None):
    labels = labels or [f"dof_{int(p)}" for p in result.probes]
    header = ["time_s"] + (["max_deformation_m"] if result.max_deformation is not None else []) + [f"u_{l}" for l in labels]
    rows = []
    for i, t in enumerate(result.times):
        extra = [result.max_deformation[i]] if result.max_deformation is not None else []
        rows.append((t, *extra, *result.displacement[i]))
    return header, rows


def summary_rows(items: dict):
    return ["quantity", "value"], [(k, v) for k, v in items.items()]


def report_tables(results: dict, out_dir) -> list[Path]:
    """Write every recognised result in ``results`` as CSV into ``out_dir``.

    Keys: ``modes``, ``participation``, ``comparison``, ``history``,
    ``transient`` and any ``*_summary`` dict. Files are written in sorted
    key order so the set is deterministic.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for key in sorted(results):
        val = results[key]
        if isinstance(val, ModeSet):
            written.append(write_csv(out / f"{key}_frequencies.csv", *frequency_rows(val)))
        elif isinstance(val, ParticipationTable):
            written.append(write_csv(out / f"{key}.csv", *participation_rows(val)))
            written.append(write_csv(out / f"{key}_curve.csv", *effective_mass_curve_rows(val)))
        elif isinstance(val, ModeComparison):
            written.append(write_csv(out / f"{key}.csv", *comparison_rows(val)))
        elif isinstance(val, ConvergenceHistory):
            written.append(write_csv(out / f"{key}.csv", *history_rows(val)))
            written.append(write_csv(out / f"{key}_substeps.csv", *substep_rows(val)))
        elif isinstance(val, TransientResult):
            written.append(write_csv(out / f"{key}.csv", *probe_rows(val)))
        elif isinstance(val, dict):
            written.append(write_csv(out / f"{key}.csv", *summary_rows(val)))
        else:
            raise TypeError(f"no CSV layout for {key!r} ({type(val).__name__})")
    return written
