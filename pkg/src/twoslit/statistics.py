"""Counting statistics: background subtraction, significance, run
aggregation and pump-power correction.

The functions here accept any record type exposing the CountRecord fields;
:class:`twoslit.experiment.CountRecord` is the one used in practice.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import AggregationError, CorrectionError, DomainError


def subtract_background(raw, bg, duration_ratio=1.0):
    """Net counts and their Poisson uncertainty.

    ``duration_ratio`` is raw_duration / background_duration, so the
    background is rescaled to the raw acquisition time.
    """
    if raw < 0 or bg < 0:
        raise DomainError("counts must be non-negative")
    if not duration_ratio > 0:
        raise DomainError("duration_ratio must be positive")
    net = raw - bg * duration_ratio
    sigma = math.sqrt(raw + bg * duration_ratio**2)
    return net, sigma


def significance(net, sigma):
    """Distance of ``net`` from zero in units of ``sigma``."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return net / sigma


@dataclass
class RunSeries:
    """Runs of one configuration, optionally with the relative pump power of each."""

    records: list
    powers: list | None = None

    def __post_init__(self):
        self.records = list(self.records)
        if not self.records:
            raise AggregationError("a run series needs at least one record")
        if self.powers is not None:
            self.powers = [float(p) for p in self.powers]
            if len(self.powers) != len(self.records):
                raise CorrectionError("one power value per run is required")
            if not all(math.isfinite(p) and p > 0 for p in self.powers):
                raise CorrectionError("powers must be finite and positive")

    def __len__(self):
        return len(self.records)

    def __add__(self, other: RunSeries) -> RunSeries:
        if (self.powers is None) != (other.powers is None):
            raise AggregationError("cannot join series with and without power data")
        powers = None if self.powers is None else self.powers + other.powers
        return RunSeries(self.records + other.records, powers)


def aggregate_runs(series: RunSeries):
    """Sum counts, variances and durations over all runs, then subtract.

    All runs must share the raw/background duration ratio; mixing ratios would
    make a single rescaling of the summed background wrong.
    """
    recs = series.records
    ratios = np.array([r.raw_duration / r.background_duration for r in recs])
    if not np.allclose(ratios, ratios[0], rtol=1e-12, atol=0):
        raise AggregationError("runs have different raw/background duration ratios")
    first = recs[0]
    return replace(
        first,
        raw_coincidences=sum(r.raw_coincidences for r in recs),
        background_coincidences=sum(r.background_coincidences for r in recs),
        raw_duration=math.fsum(r.raw_duration for r in recs),
        background_duration=math.fsum(r.background_duration for r in recs),
        raw_variance=math.fsum(r.raw_var for r in recs),
        background_variance=math.fsum(r.background_var for r in recs),
    )


def power_correct(series: RunSeries, reference_power: float, exponent: float = 1.0) -> RunSeries:
    """Rescale every run to ``reference_power``.

    The coincidence rate is modelled as power**exponent, so raw and background
    counts of run i are multiplied by (reference / p_i)**exponent and their
    variances by the square of that factor.
    """
    if series.powers is None:
        raise CorrectionError("power correction needs a power value for every run")
    if not (math.isfinite(reference_power) and reference_power > 0):
        raise CorrectionError("reference_power must be positive")
    out = []
    for rec, p in zip(series.records, series.powers):
        f = (reference_power / p) ** exponent
        out.append(replace(
            rec,
            raw_coincidences=rec.raw_coincidences * f,
            background_coincidences=rec.background_coincidences * f,
            raw_variance=rec.raw_var * f * f,
            background_variance=rec.background_var * f * f,
        ))
    return RunSeries(out, [reference_power] * len(out))


SUMMARY_COLUMNS = ["label", "raw", "background", "raw_duration_s", "background_duration_s", "net", "net_sigma", "significance"]


def summary_csv(rows, metadata_lines=()) -> str:
    """CSV table of (label, record) rows."""
    buf = io.StringIO()
    for line in metadata_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for label, rec in rows:
        w.writerow([label, rec.raw_coincidences, rec.background_coincidences, rec.raw_duration,
                    rec.background_duration, repr(rec.net), repr(rec.net_sigma), repr(rec.significance)])
    return buf.getvalue()
