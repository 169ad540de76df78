"""Report emission: merge replica outputs into tidy CSVs plus
gnuplot-compatible two-column .dat files, with no plotting dependency."""

from __future__ import annotations

import os

import numpy as np

from . import _csvio

REPORT_KINDS = ("impact-curve", "surface", "response", "decay", "coimpact")

_INPUT_HEADERS = {
    "impact-curve": ["phi", "impact", "stderr", "n"],
    "surface": ["T", "eta", "impact", "stderr", "n"],
    "response": ["tau", "value", "stderr", "n"],
    "decay": ["h", "ratio", "stderr"],
    "coimpact": ["phi", "impact", "stderr", "n"],
}


def _check_inputs(paths):
    if not paths:
        raise ValueError("no input files given")
    missing = [p for p in paths if not os.path.exists(p)]
    if missing:
        raise FileNotFoundError(
            "missing report inputs: " + ", ".join(str(p) for p in missing)
        )


def _merge(paths, header, key_cols):
    """Concatenate replica tables and pool rows sharing the key columns.

    Pooled value = count-weighted mean; pooled stderr combines replica
    standard errors in quadrature of the weighted mean.
    """
    tables = [_csvio.read_numeric(p, header) for p in paths]
    stacked = {name: np.concatenate([t[name] for t in tables]) for name in header}
    has_n = "n" in header
    counts = stacked["n"] if has_n else np.ones(len(stacked[header[0]]))
    value_col = header[len(key_cols)]
    err_col = header[len(key_cols) + 1] if len(header) > len(key_cols) + 1 else None
    keys = np.stack([stacked[c] for c in key_cols], axis=1)
    order = np.lexsort(keys.T[::-1])
    keys = keys[order]
    vals = stacked[value_col][order]
    errs = stacked[err_col][order] if err_col else np.zeros(len(vals))
    counts = counts[order]
    boundaries = np.concatenate([[True], (np.diff(keys, axis=0) != 0).any(axis=1)])
    starts = np.flatnonzero(boundaries)
    ends = np.append(starts[1:], len(vals))
    out_keys, out_vals, out_errs, out_counts = [], [], [], []
    for s, e in zip(starts, ends):
        w = counts[s:e]
        total = w.sum()
        out_keys.append(keys[s])
        out_vals.append(float((vals[s:e] * w).sum() / total))
        out_errs.append(float(np.sqrt(((errs[s:e] * w) ** 2).sum()) / total))
        out_counts.append(int(total))
    return (
        np.array(out_keys),
        np.array(out_vals),
        np.array(out_errs),
        np.array(out_counts, dtype=np.int64),
    )


def emit_report(paths, kind, out_dir):
    """Build the report for one curve kind from replica output CSVs.

    Writes report.csv (tidy) and one two-column .dat file per panel;
    returns the list of files written.  Missing inputs raise with the full
    list of absent paths.
    """
    if kind not in REPORT_KINDS:
        raise ValueError(f"unknown report kind {kind!r}; options: {REPORT_KINDS}")
    _check_inputs(paths)
    os.makedirs(out_dir, exist_ok=True)
    header = _INPUT_HEADERS[kind]
    written = []
    report_path = os.path.join(out_dir, "report.csv")
    if kind == "surface":
        keys, vals, errs, counts = _merge(paths, header, ["T", "eta"])
        _csvio.write_columns(
            report_path,
            ["T", "eta", "impact", "stderr", "n"],
            [keys[:, 0], keys[:, 1], vals, errs, counts],
        )
        written.append(report_path)
        for idx, T in enumerate(np.unique(keys[:, 0])):
            sel = keys[:, 0] == T
            dat = os.path.join(out_dir, f"impact_vs_eta_T{idx}.dat")
            _write_dat(dat, keys[sel, 1], vals[sel])
            written.append(dat)
        return written
    if kind == "decay":
        keys, vals, errs, counts = _merge(paths, header, ["h"])
        _csvio.write_columns(
            report_path,
            ["h", "ratio", "stderr", "n"],
            [keys[:, 0], vals, errs, counts],
        )
        dat = os.path.join(out_dir, "decay_ratio.dat")
        _write_dat(dat, keys[:, 0], vals)
        return [report_path, dat]
    key = header[0]
    keys, vals, errs, counts = _merge(paths, header, [key])
    value_name = header[1]
    _csvio.write_columns(
        report_path, [key, value_name, "stderr", "n"],
        [keys[:, 0], vals, errs, counts],
    )
    dat = os.path.join(out_dir, f"{value_name}_vs_{key}.dat")
    _write_dat(dat, keys[:, 0], vals)
    return [report_path, dat]


def _write_dat(path, x, y):
    with _csvio.atomic_write(path) as fh:
        for a, b in zip(x, y):
            fh.write(f"{repr(float(a))} {repr(float(b))}\n")
