"""Experiment reports, slope fits, and deterministic CSV/JSON output."""

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


def fit_loglog_slope(x, y):
    """Least-squares slope of log|y| against log x over all points.

    Points with y == 0 are dropped; returns nan if fewer than two remain.
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    keep = (x > 0) & (y > 0)
    if np.sum(keep) < 2:
        return float("nan")
    coeffs = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(coeffs[0])


@dataclass
class DecayReport:
    """Measured decay curve with its reference values and fitted slope.

    abscissae are the sweep values (epsilon or t), strictly monotone.
    """

    name: str
    abscissa_label: str
    abscissae: np.ndarray
    measured: np.ndarray
    reference: np.ndarray = field(default=None)
    slope: float = float("nan")
    extra_columns: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.abscissae = np.asarray(self.abscissae, dtype=float)
        self.measured = np.asarray(self.measured, dtype=float)
        d = np.diff(self.abscissae)
        if len(self.abscissae) > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigError("report abscissae must be strictly monotone")
        if self.reference is None:
            self.reference = np.full_like(self.measured, np.nan)
        self.reference = np.asarray(self.reference, dtype=float)
        if not len(self.abscissae) == len(self.measured) == len(self.reference):
            raise ConfigError("report columns must have equal length")
        for key, col in self.extra_columns.items():
            if len(col) != len(self.abscissae):
                raise ConfigError(f"extra column {key!r} has wrong length")

    def fit_slope(self):
        self.slope = fit_loglog_slope(self.abscissae, self.measured)
        return self.slope

    def columns(self):
        cols = {
            self.abscissa_label: self.abscissae,
            "measured": self.measured,
            "reference": self.reference,
        }
        cols.update(self.extra_columns)
        return cols


def format_float(x):
    """17 significant digits: lossless round-trip for 64-bit floats."""
    return f"{float(x):.17g}"


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_csv(path, columns):
    """Write named columns as CSV (dot-decimal, 17 significant digits)."""
    names = list(columns.keys())
    arrays = [np.atleast_1d(np.asarray(columns[k])) for k in names]
    length = len(arrays[0])
    if any(len(a) != length for a in arrays):
        raise ConfigError("CSV columns must have equal length")
    lines = [",".join(names)]
    for i in range(length):
        lines.append(",".join(format_float(a[i]) for a in arrays))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_report_csv(path, report):
    write_csv(path, report.columns())


def write_json(path, payload):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
