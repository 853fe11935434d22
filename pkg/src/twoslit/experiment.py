"""Virtual coincidence-counting experiment.

Relative rates become expected counts through a single calibration scale;
counts are drawn from Poisson distributions for the prompt window (signal plus
accidentals) and for the delayed window (accidentals only).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import CalibrationError, ConfigurationError, DomainError
from .statistics import RunSeries, aggregate_runs, significance, subtract_background


@dataclass(frozen=True)
class AcquisitionPlan:
    """``n_runs`` acquisitions of ``run_duration`` seconds, each followed by a
    delayed-window background run of the same length times ``background_factor``."""

    n_runs: int
    run_duration: float
    coincidence_window: float = 2.6e-9
    background_delay: float = 16e-9
    background_factor: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.n_runs, (int, np.integer)) and self.n_runs >= 1):
            raise ConfigurationError(f"must be a positive integer, got {self.n_runs!r}", "plan.n_runs")
        for name in ("run_duration", "coincidence_window", "background_delay", "background_factor"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"must be positive, got {v!r}", f"plan.{name}")
        if self.background_delay <= self.coincidence_window:
            raise ConfigurationError("must exceed the coincidence window", "plan.background_delay")

    @property
    def total_time(self) -> float:
        return self.n_runs * self.run_duration

    @property
    def background_duration(self) -> float:
        return self.run_duration * self.background_factor


@dataclass(frozen=True)
class CountRecord:
    """Prompt and delayed-window counts of one acquisition (or a sum of them).

    Variances default to the counts themselves (Poisson); they are carried
    separately so that rescaled records keep the right uncertainty.
    """

    raw_coincidences: float
    background_coincidences: float
    raw_duration: float
    background_duration: float
    raw_variance: float | None = None
    background_variance: float | None = None

    def __post_init__(self):
        if self.raw_coincidences < 0 or self.background_coincidences < 0:
            raise DomainError("counts must be non-negative")
        if not (self.raw_duration > 0 and self.background_duration > 0):
            raise DomainError("durations must be positive")

    @property
    def duration_ratio(self) -> float:
        return self.raw_duration / self.background_duration

    @property
    def raw_var(self) -> float:
        return self.raw_coincidences if self.raw_variance is None else self.raw_variance

    @property
    def background_var(self) -> float:
        return self.background_coincidences if self.background_variance is None else self.background_variance

    @property
    def net(self) -> float:
        return subtract_background(self.raw_coincidences, self.background_coincidences, self.duration_ratio)[0]

    @property
    def net_sigma(self) -> float:
        return math.sqrt(self.raw_var + self.background_var * self.duration_ratio**2)

    @property
    def significance(self) -> float:
        s = self.net_sigma
        return significance(self.net, s) if s > 0 else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(net=self.net, net_sigma=self.net_sigma, significance=self.significance)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> CountRecord:
        keys = ("raw_coincidences", "background_coincidences", "raw_duration", "background_duration",
                "raw_variance", "background_variance")
        return cls(**{k: d[k] for k in keys if k in d})


@dataclass(frozen=True)
class CalibrationScale:
    """Expected net counts per 30 minutes for a relative rate of 1."""

    counts_per_unit_rate_per_30min: float

    def __post_init__(self):
        v = self.counts_per_unit_rate_per_30min
        if not (math.isfinite(v) and v > 0):
            raise CalibrationError(f"calibration scale must be finite and positive, got {v!r}")

    def counts(self, relative_rate: float, duration: float = 1800.0) -> float:
        return self.counts_per_unit_rate_per_30min * relative_rate * duration / 1800.0

    def rate_hz(self, relative_rate: float) -> float:
        return self.counts(relative_rate, 1.0)


def accidental_rate(singles1, singles2, window):
    """Rate of chance coincidences between two uncorrelated detectors."""
    if singles1 < 0 or singles2 < 0 or window < 0:
        raise DomainError("singles rates and window must be non-negative")
    return singles1 * singles2 * window


def singles_for_accidental(rate, window):
    """Equal singles rates that produce the accidental ``rate``."""
    if rate < 0 or not window > 0:
        raise DomainError("rate must be non-negative and window positive")
    return math.sqrt(rate / window)


def calibrate(peak_rate, target_counts, plan: AcquisitionPlan) -> CalibrationScale:
    """Scale that makes ``peak_rate`` yield ``target_counts`` net per run of ``plan``."""
    if not (math.isfinite(peak_rate) and peak_rate > 0):
        raise CalibrationError(f"peak rate must be positive, got {peak_rate!r}")
    if not (math.isfinite(target_counts) and target_counts > 0):
        raise CalibrationError(f"target counts must be positive, got {target_counts!r}")
    return CalibrationScale(target_counts / peak_rate * 1800.0 / plan.run_duration)


def rates_for_target(expected_net, expected_sigma, plan: AcquisitionPlan):
    """Signal and accidental rates (Hz) giving ``expected_net`` +/- ``expected_sigma``
    summed over the whole plan.

    With prompt counts N + B and delayed counts B/f (f = background_factor
    rescaling) the variance is N + B + B f, so B = (sigma^2 - N) / (1 + f).
    """
    f = 1.0 / plan.background_factor
    b = (expected_sigma**2 - expected_net) / (1.0 + f)
    if expected_net < 0 or b < 0:
        raise ConfigurationError(
            f"sigma {expected_sigma} is too small for net {expected_net}: needs sigma^2 >= net", "scenario.expected_sigma")
    t = plan.total_time
    return expected_net / t, b / t


def _stream(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def simulate_runs(true_rate, accidental, plan: AcquisitionPlan, seed, powers=None, exponent=1.0):
    """One CountRecord per run.

    Run i draws from its own stream (seed, i), so any subset of runs can be
    regenerated independently.  With ``powers`` the signal of run i scales as
    powers[i]**exponent; accidentals are left unchanged.
    """
    if true_rate < 0 or accidental < 0:
        raise DomainError("rates must be non-negative")
    if powers is not None and len(powers) != plan.n_runs:
        raise ConfigurationError("one power value per run is required", "plan.powers")
    out = []
    for i in range(plan.n_runs):
        rng = _stream(seed, i)
        signal = true_rate * (1.0 if powers is None else powers[i] ** exponent)
        raw = int(rng.poisson((signal + accidental) * plan.run_duration))
        bg = int(rng.poisson(accidental * plan.background_duration))
        out.append(CountRecord(raw, bg, plan.run_duration, plan.background_duration))
    return out


def simulate_counts(true_rate, accidental, plan: AcquisitionPlan, seed) -> CountRecord:
    """Whole plan summed into one record."""
    return aggregate_runs(RunSeries(simulate_runs(true_rate, accidental, plan, seed)))


def simulate_many(true_rate, accidental, plan: AcquisitionPlan, seeds):
    """``simulate_counts`` for each seed; order of ``seeds`` is preserved."""
    return [simulate_counts(true_rate, accidental, plan, s) for s in seeds]


def records_to_jsonl(records, **common) -> str:
    lines = []
    for i, rec in enumerate(records):
        d = dict(common)
        d["index"] = i
        d.update(rec.to_dict())
        lines.append(json.dumps(d, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def records_from_jsonl(text: str):
    return [CountRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
