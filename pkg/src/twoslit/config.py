"""Run configuration: a versioned TOML file whose defaults are the reference
scenarios.

Every section maps onto a dataclass; unknown keys and out-of-range values are
rejected with the dotted field name in the message.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError
from .geometry import TWO_DEGREES, DetectorPlacement, ExperimentGeometry

SCHEMA_VERSION = 1


@dataclass
class GeometrySection:
    wavelength: float = 702e-9
    slit_separation: float = 100e-6
    slit_width: float = 10e-6
    incidence_angle_A: float = TWO_DEGREES
    incidence_angle_B: float = -TWO_DEGREES


@dataclass
class PatternSection:
    fixed_offset: float = -0.055
    fixed_distance: float = 1.5
    moving_distance: float = 1.21
    scan_start: float = -0.12
    scan_stop: float = 0.12
    scan_step: float = 0.002
    scan_offsets: list = field(default_factory=list)  # overrides start/stop/step when given
    lens_diameter: float = 6e-3
    quadrature_order: int = 16

    def offsets(self):
        if self.scan_offsets:
            return [float(v) for v in self.scan_offsets]
        n = int(round((self.scan_stop - self.scan_start) / self.scan_step))
        return [round(self.scan_start + i * self.scan_step, 12) for i in range(n + 1)]


@dataclass
class DbbSection:
    n_pairs: int = 10_000
    profile: str = "rect"
    quadrature_order: int = 64
    node_floor: float = 1e-30
    z_start: float = 1e-4
    halfwidth: float = 1e-3
    rtol: float = 5e-11
    atol: float = 1e-18
    max_step: float = 0.5
    first_step: float = 1e-7
    min_step: float = 1e-13
    fixed_step: float = 0.0  # 0 selects the adaptive controller
    placements: list = field(default_factory=lambda: [[-0.017, 1.21], [-0.055, 1.5]])
    probe_planes: list = field(default_factory=lambda: [0.5, 1.21])
    bins: int = 50


def _scenario_a():
    return {"name": "A", "offset1": -0.017, "distance1": 1.21, "offset2": -0.055, "distance2": 1.5,
            "n_runs": 35, "run_duration": 1800.0, "expected_net": 78.0, "expected_sigma": 10.0}


def _scenario_b():
    return {"name": "B", "offset1": -0.0444, "distance1": 1.21, "offset2": -0.117, "distance2": 1.5,
            "n_runs": 17, "run_duration": 3600.0, "expected_net": 41.0, "expected_sigma": 14.0}


SCENARIO_KEYS = ("name", "offset1", "distance1", "offset2", "distance2",
                 "n_runs", "run_duration", "expected_net", "expected_sigma")


@dataclass
class ExperimentSection:
    coincidence_window: float = 2.6e-9
    background_delay: float = 16e-9
    calibration_scenario: str = "A"
    n_seeds: int = 50
    power_exponent: float = 1.0
    scenarios: list = field(default_factory=lambda: [_scenario_a(), _scenario_b()])


@dataclass
class CompareSection:
    n_pairs: int = 2000
    configurations: list = field(default_factory=lambda: [
        {"name": "same_A", "offset1": -0.017, "distance1": 1.21, "offset2": -0.055, "distance2": 1.5},
        {"name": "same_B", "offset1": -0.0444, "distance1": 1.21, "offset2": -0.117, "distance2": 1.5},
        {"name": "peak", "offset1": 0.04225, "distance1": 1.21, "offset2": -0.05238, "distance2": 1.5},
    ])


@dataclass
class OutputSection:
    dir: str = "out"


SECTIONS = {
    "geometry": GeometrySection,
    "pattern": PatternSection,
    "dbb": DbbSection,
    "experiment": ExperimentSection,
    "compare": CompareSection,
    "output": OutputSection,
}


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 20240601
    geometry: GeometrySection = field(default_factory=GeometrySection)
    pattern: PatternSection = field(default_factory=PatternSection)
    dbb: DbbSection = field(default_factory=DbbSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    compare: CompareSection = field(default_factory=CompareSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema version {version!r}", "schema_version")
        seed = data.pop("seed", cls.seed)
        kw = {}
        for name, section_cls in SECTIONS.items():
            raw = data.pop(name, {})
            if not isinstance(raw, dict):
                raise ConfigurationError("must be a table", name)
            kw[name] = _build_section(name, section_cls, raw)
        if data:
            raise ConfigurationError(f"unknown key(s) {sorted(data)}", next(iter(sorted(data))))
        cfg = cls(schema_version=version, seed=seed, **kw)
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, text: str) -> RunConfig:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"invalid TOML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            with open(path, "rb") as fh:
                text = fh.read().decode("utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read {path}: {exc.strerror}", "--config") from exc
        return cls.from_toml(text)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    # -- validation --------------------------------------------------------

    def validate(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigurationError("must be a non-negative integer", "seed")
        g = self.geometry
        try:
            ExperimentGeometry(g.wavelength, g.slit_separation, g.slit_width, g.incidence_angle_A, g.incidence_angle_B)
        except ValueError as exc:
            raise ConfigurationError(str(exc), "geometry") from exc

        p = self.pattern
        _positive(p, "pattern", "fixed_distance", "moving_distance", "lens_diameter")
        if not p.scan_offsets:
            _positive(p, "pattern", "scan_step")
            if not p.scan_stop >= p.scan_start:
                raise ConfigurationError("scan_stop must not be below scan_start", "pattern.scan_stop")
        if not p.offsets():
            raise ConfigurationError("no scan offsets", "pattern.scan_offsets")
        _int_at_least(p.quadrature_order, 2, "pattern.quadrature_order")
        _placement(p.fixed_offset, p.fixed_distance, p.lens_diameter, "pattern.fixed_offset")

        d = self.dbb
        _int_at_least(d.n_pairs, 1, "dbb.n_pairs")
        _int_at_least(d.bins, 2, "dbb.bins")
        _int_at_least(d.quadrature_order, 2, "dbb.quadrature_order")
        if d.quadrature_order % 2:
            raise ConfigurationError("must be even", "dbb.quadrature_order")
        if d.profile not in ("rect", "gaussian"):
            raise ConfigurationError("must be 'rect' or 'gaussian'", "dbb.profile")
        _positive(d, "dbb", "node_floor", "z_start", "halfwidth", "rtol", "max_step", "first_step", "min_step")
        if not d.atol >= 0 or not d.fixed_step >= 0:
            raise ConfigurationError("must be non-negative", "dbb.atol" if not d.atol >= 0 else "dbb.fixed_step")
        if len(d.placements) != 2:
            raise ConfigurationError("exactly two [offset, distance] pairs are needed", "dbb.placements")
        for i, pl in enumerate(d.placements):
            _pair(pl, f"dbb.placements[{i}]")
            _placement(pl[0], pl[1], p.lens_diameter, f"dbb.placements[{i}]")
        for z in d.probe_planes:
            if not (_is_number(z) and z > d.z_start):
                raise ConfigurationError(f"probe plane {z!r} must lie beyond z_start", "dbb.probe_planes")

        e = self.experiment
        _positive(e, "experiment", "coincidence_window", "background_delay", "power_exponent")
        if e.background_delay <= e.coincidence_window:
            raise ConfigurationError("must exceed the coincidence window", "experiment.background_delay")
        _int_at_least(e.n_seeds, 1, "experiment.n_seeds")
        if not e.scenarios:
            raise ConfigurationError("at least one scenario is required", "experiment.scenarios")
        names = []
        for i, sc in enumerate(e.scenarios):
            where = f"experiment.scenarios[{i}]"
            _record(sc, SCENARIO_KEYS, where)
            _placement(sc["offset1"], sc["distance1"], p.lens_diameter, where + ".offset1")
            _placement(sc["offset2"], sc["distance2"], p.lens_diameter, where + ".offset2")
            _int_at_least(sc["n_runs"], 1, where + ".n_runs")
            for key in ("run_duration", "expected_net", "expected_sigma"):
                if not sc[key] > 0:
                    raise ConfigurationError("must be positive", f"{where}.{key}")
            if sc["expected_sigma"] ** 2 < sc["expected_net"]:
                raise ConfigurationError("sigma^2 must be at least the expected net", where + ".expected_sigma")
            names.append(sc["name"])
        if len(set(names)) != len(names):
            raise ConfigurationError("scenario names must be unique", "experiment.scenarios")
        if e.calibration_scenario not in names:
            raise ConfigurationError(f"no scenario named {e.calibration_scenario!r}", "experiment.calibration_scenario")

        c = self.compare
        _int_at_least(c.n_pairs, 1, "compare.n_pairs")
        if not c.configurations:
            raise ConfigurationError("at least one configuration is required", "compare.configurations")
        for i, row in enumerate(c.configurations):
            where = f"compare.configurations[{i}]"
            _record(row, ("name", "offset1", "distance1", "offset2", "distance2"), where)
            _placement(row["offset1"], row["distance1"], p.lens_diameter, where + ".offset1")
            _placement(row["offset2"], row["distance2"], p.lens_diameter, where + ".offset2")

        if not isinstance(self.output.dir, str) or not self.output.dir:
            raise ConfigurationError("must be a non-empty path", "output.dir")

    # -- derived objects -----------------------------------------------------

    def experiment_geometry(self) -> ExperimentGeometry:
        g = self.geometry
        return ExperimentGeometry(g.wavelength, g.slit_separation, g.slit_width, g.incidence_angle_A, g.incidence_angle_B)

    def placement(self, offset, distance) -> DetectorPlacement:
        return DetectorPlacement(float(offset), float(distance), self.pattern.lens_diameter)


def _build_section(name, section_cls, raw):
    known = {f.name: f for f in fields(section_cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigurationError("unknown key", f"{name}.{unknown[0]}")
    default = section_cls()
    for key, value in raw.items():
        ref = getattr(default, key)
        if isinstance(ref, bool):
            ok = isinstance(value, bool)
        elif isinstance(ref, int):
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif isinstance(ref, float):
            ok = _is_number(value)
            value = float(value) if ok else value
        elif isinstance(ref, str):
            ok = isinstance(value, str)
        else:
            ok = isinstance(value, list)
        if not ok:
            raise ConfigurationError(f"expected {type(ref).__name__}, got {value!r}", f"{name}.{key}")
        raw = {**raw, key: value}
    return section_cls(**raw)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _positive(section, prefix, *names):
    for n in names:
        v = getattr(section, n)
        if not (_is_number(v) and v > 0):
            raise ConfigurationError(f"must be positive, got {v!r}", f"{prefix}.{n}")


def _int_at_least(v, lo, where):
    if not (isinstance(v, int) and not isinstance(v, bool) and v >= lo):
        raise ConfigurationError(f"must be an integer >= {lo}, got {v!r}", where)


def _pair(v, where):
    if not (isinstance(v, list) and len(v) == 2 and all(_is_number(x) for x in v)):
        raise ConfigurationError("must be [offset, distance]", where)


def _record(row, keys, where):
    if not isinstance(row, dict):
        raise ConfigurationError("must be a table", where)
    missing = [k for k in keys if k not in row]
    extra = sorted(set(row) - set(keys))
    if missing:
        raise ConfigurationError("missing key", f"{where}.{missing[0]}")
    if extra:
        raise ConfigurationError("unknown key", f"{where}.{extra[0]}")
    for k in keys:
        if k == "name":
            if not isinstance(row[k], str) or not row[k]:
                raise ConfigurationError("must be a non-empty string", f"{where}.name")
        elif k == "n_runs":
            continue
        elif not _is_number(row[k]):
            raise ConfigurationError(f"must be a number, got {row[k]!r}", f"{where}.{k}")


def _placement(offset, distance, lens, where):
    try:
        DetectorPlacement(float(offset), float(distance), lens)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc), where) from exc
