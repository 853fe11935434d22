"""Command-line entry point: ``twoslit {pattern,dbb,experiment,compare}``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .biphoton import TwoPhotonState, lens_pair_probability
from .config import RunConfig
from .errors import ConfigurationError, TwoSlitError
from .experiment import (
    AcquisitionPlan,
    calibrate,
    rates_for_target,
    records_to_jsonl,
    simulate_counts,
    singles_for_accidental,
)
from .geometry import DetectorPlacement, angle_from_position, position_from_angle
from .sqm_pattern import aperture_averaged_rate, envelope_zeros, fringe_period_sin, pattern_scan
from .statistics import summary_csv
from .trajectories import (
    IntegratorSettings,
    SamplingSettings,
    coincidence_mask,
    ensemble_coincidence_rate,
    equivariance_check,
    integrate_ensemble,
    sample_initial_pairs,
)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


# -- shared helpers ----------------------------------------------------------

def metadata(cfg: RunConfig, command: str) -> dict:
    return {"tool": "twoslit", "version": __version__, "command": command, "config": cfg.to_dict()}


def metadata_lines(cfg: RunConfig, command: str):
    meta = metadata(cfg, command)
    return [f"tool = twoslit {meta['version']}", f"command = {command}",
            "config = " + json.dumps(meta["config"], sort_keys=True, separators=(",", ":"))]


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def build_state(cfg: RunConfig) -> TwoPhotonState:
    d = cfg.dbb
    return TwoPhotonState.from_geometry(
        cfg.experiment_geometry(), d.profile, d.z_start,
        quadrature_order=d.quadrature_order, node_floor=d.node_floor,
    )


def integrator_settings(cfg: RunConfig) -> IntegratorSettings:
    d = cfg.dbb
    return IntegratorSettings(d.rtol, d.atol, d.max_step, d.first_step, d.min_step, d.fixed_step or None)


def sampling_settings(cfg: RunConfig) -> SamplingSettings:
    return SamplingSettings(z_start=cfg.dbb.z_start, halfwidth=cfg.dbb.halfwidth)


def peak_placements(cfg: RunConfig, d1: float = 1.21, d2: float = 1.5):
    """Lenses centred on the opposite-semiplane maximum theta1 = theta_A, theta2 = theta_B."""
    g = cfg.geometry
    return (cfg.placement(position_from_angle(g.incidence_angle_A, d1), d1),
            cfg.placement(position_from_angle(g.incidence_angle_B, d2), d2))


def _same_side(p1: DetectorPlacement, p2: DetectorPlacement) -> bool:
    return (p1.lateral_offset < 0) == (p2.lateral_offset < 0)


def calibration(cfg: RunConfig):
    """Scale fixed at the peak so that the calibration scenario expects its net count.

    Returns (scale, peak relative rate, target net per run at the peak).
    """
    geom = cfg.experiment_geometry()
    sc = next(s for s in cfg.experiment.scenarios if s["name"] == cfg.experiment.calibration_scenario)
    p1, p2 = peak_placements(cfg, sc["distance1"], sc["distance2"])
    peak = aperture_averaged_rate(p1, p2, geom)
    rate = aperture_averaged_rate(cfg.placement(sc["offset1"], sc["distance1"]),
                                  cfg.placement(sc["offset2"], sc["distance2"]), geom)
    plan = AcquisitionPlan(sc["n_runs"], sc["run_duration"])
    target = sc["expected_net"] / sc["n_runs"] * peak / rate
    return calibrate(peak, target, plan), peak, target


# -- commands ----------------------------------------------------------------

def cmd_pattern(cfg: RunConfig, out: Path) -> dict:
    p = cfg.pattern
    geom = cfg.experiment_geometry()
    fixed = cfg.placement(p.fixed_offset, p.fixed_distance)
    pat = pattern_scan(fixed, p.offsets(), p.moving_distance, geom, p.lens_diameter, p.quadrature_order)
    _write(out, "pattern.csv", pat.to_csv(metadata_lines(cfg, "pattern")))
    angles = pat.angles
    expected_peak = position_from_angle(geom.incidence_angle_A, p.moving_distance)
    summary = {
        "metadata": metadata(cfg, "pattern"),
        "peak_offset_m": pat.peak_offset,
        "peak_angle_rad": angle_from_position(pat.peak_offset, p.moving_distance),
        "expected_peak_offset_m": expected_peak,
        "fringe_period_sin": fringe_period_sin(geom),
        "fringe_period_m_at_moving_plane": fringe_period_sin(geom) * p.moving_distance,
        "envelope_zeros_rad": envelope_zeros(geom, float(angles.min()), float(angles.max())),
        "normalization": pat.normalization,
        "n_points": len(pat.offsets),
    }
    _write(out, "pattern_summary.json", _json(summary))
    return summary


def cmd_dbb(cfg: RunConfig, out: Path) -> dict:
    d = cfg.dbb
    state = build_state(cfg)
    placements = tuple(cfg.placement(o, z) for o, z in d.placements)
    report, ens = ensemble_coincidence_rate(
        state, placements, d.n_pairs, cfg.seed, integrator_settings(cfg), sampling_settings(cfg),
        extra_planes=d.probe_planes,
    )
    fits = []
    for z in d.probe_planes:
        for kind in ("marginal", "joint"):
            fits.append(vars(equivariance_check(state, ens.at(z), z, d.bins, kind)))
    lens = [(*p.edges, p.plane_distance) for p in placements]
    doc = {
        "metadata": metadata(cfg, "dbb"),
        "report": report.to_dict(),
        "equivariance": fits,
        "sqm_lens_pair_probability": lens_pair_probability(state, *lens),
        "flagged_fraction": report.n_flagged / report.n_pairs,
    }
    _write(out, "dbb_report.json", _json(doc))
    return doc


def simulate_scenario(cfg: RunConfig, index: int, sc: dict):
    """Tune the plan of scenario ``sc`` and simulate it for every seed."""
    e = cfg.experiment
    plan = AcquisitionPlan(sc["n_runs"], sc["run_duration"], e.coincidence_window, e.background_delay)
    true_rate, acc = rates_for_target(sc["expected_net"], sc["expected_sigma"], plan)
    records = [simulate_counts(true_rate, acc, plan, [cfg.seed, index, j]) for j in range(e.n_seeds)]
    return plan, true_rate, acc, records


def cmd_experiment(cfg: RunConfig, out: Path) -> dict:
    geom = cfg.experiment_geometry()
    scale, peak, target = calibration(cfg)
    lines, rows, scenarios = [], [], []
    for i, sc in enumerate(cfg.experiment.scenarios):
        p1 = cfg.placement(sc["offset1"], sc["distance1"])
        p2 = cfg.placement(sc["offset2"], sc["distance2"])
        rate = aperture_averaged_rate(p1, p2, geom)
        plan, true_rate, acc, records = simulate_scenario(cfg, i, sc)
        lines.append(records_to_jsonl(records, scenario=sc["name"]))
        rows += [(f"{sc['name']}/{j}", r) for j, r in enumerate(records)]
        sig = np.array([r.significance for r in records])
        sqm_shared = scale.counts(rate, plan.run_duration) * plan.n_runs
        scenarios.append({
            "name": sc["name"],
            "same_semiplane": _same_side(p1, p2),
            "sqm_relative_rate": rate,
            "expected_net": sc["expected_net"],
            "expected_sigma": sc["expected_sigma"],
            "true_rate_hz": true_rate,
            "accidental_rate_hz": acc,
            "equivalent_singles_hz": singles_for_accidental(acc, plan.coincidence_window),
            "sqm_net_shared_calibration": sqm_shared,
            # dBB claim from the non-crossing argument: nothing in the same semiplane
            "dbb_noncrossing_net": 0.0 if _same_side(p1, p2) else sqm_shared,
            "n_seeds": len(records),
            "significance_mean": float(sig.mean()),
            "significance_std": float(sig.std(ddof=1)) if len(sig) > 1 else 0.0,
            "significance_min": float(sig.min()),
            "significance_max": float(sig.max()),
            "net_mean": float(np.mean([r.net for r in records])),
            "net_sigma_mean": float(np.mean([r.net_sigma for r in records])),
        })
    _write(out, "experiment_records.jsonl", "".join(lines))
    _write(out, "experiment_summary.csv", summary_csv(rows, metadata_lines(cfg, "experiment")))
    doc = {
        "metadata": metadata(cfg, "experiment"),
        "calibration": {
            "peak_relative_rate": peak,
            "peak_net_per_30min": scale.counts(peak),
            "target_net_per_run_at_peak": target,
            "counts_per_unit_rate_per_30min": scale.counts_per_unit_rate_per_30min,
            "scenario": cfg.experiment.calibration_scenario,
        },
        "scenarios": scenarios,
    }
    _write(out, "experiment_summary.json", _json(doc))
    return doc


COMPARE_COLUMNS = [
    "name", "offset1_m", "distance1_m", "offset2_m", "distance2_m", "same_semiplane",
    "sqm_relative_rate", "sqm_net_per_30min", "sqm_lens_pair_probability",
    "dbb_fraction", "dbb_fraction_err", "dbb_net_per_30min", "dbb_noncrossing_net_per_30min", "dbb_vs_sqm_z",
]


def cmd_compare(cfg: RunConfig, out: Path) -> dict:
    import csv
    import io

    c = cfg.compare
    geom = cfg.experiment_geometry()
    state = build_state(cfg)
    scale, _, _ = calibration(cfg)
    configs = [(row, cfg.placement(row["offset1"], row["distance1"]), cfg.placement(row["offset2"], row["distance2"]))
               for row in c.configurations]
    planes = sorted({p.plane_distance for _, a, b in configs for p in (a, b)})
    initial = sample_initial_pairs(state, c.n_pairs, cfg.seed, sampling_settings(cfg))
    ens = integrate_ensemble(state, initial, planes, integrator_settings(cfg), cfg.dbb.z_start)
    n = ens.n
    rows = []
    for row, p1, p2 in configs:
        rate = aperture_averaged_rate(p1, p2, geom)
        prob = lens_pair_probability(state, (*p1.edges, p1.plane_distance), (*p2.edges, p2.plane_distance))
        hits = int(coincidence_mask(ens, p1, p2).sum())
        frac = hits / n
        sqm_net = scale.counts(rate)
        # dBB counts under the same scale, through the ratio of the two probabilities
        dbb_net = sqm_net * frac / prob if prob > 0 else 0.0
        z = (frac - prob) / math.sqrt(prob * (1 - prob) / n) if 0 < prob < 1 else 0.0
        same = _same_side(p1, p2)
        rows.append({
            "name": row["name"], "offset1_m": p1.lateral_offset, "distance1_m": p1.plane_distance,
            "offset2_m": p2.lateral_offset, "distance2_m": p2.plane_distance, "same_semiplane": same,
            "sqm_relative_rate": rate, "sqm_net_per_30min": sqm_net, "sqm_lens_pair_probability": prob,
            "dbb_fraction": frac, "dbb_fraction_err": math.sqrt(max(hits, 1)) / n, "dbb_net_per_30min": dbb_net,
            "dbb_noncrossing_net_per_30min": 0.0 if same else sqm_net, "dbb_vs_sqm_z": z,
        })
    buf = io.StringIO()
    for line in metadata_lines(cfg, "compare"):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for r in rows:
        w.writerow([r[k] if isinstance(r[k], (str, bool)) else repr(float(r[k])) for k in COMPARE_COLUMNS])
    _write(out, "compare.csv", buf.getvalue())
    return {"metadata": metadata(cfg, "compare"), "rows": rows, "n_pairs": n}


COMMANDS = {"pattern": cmd_pattern, "dbb": cmd_dbb, "experiment": cmd_experiment, "compare": cmd_compare}


# -- argument handling -------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message, "arguments")


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration (defaults reproduce the reference scenarios)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    common.add_argument("--threads", type=int, default=0, help="worker threads for the trajectory engine, 0 = all cores")
    common.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    parser = _Parser(prog="twoslit", description="Two-photon double-slit simulator")
    parser.add_argument("--version", action="version", version=f"twoslit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("pattern", "SQM coincidence pattern scan"),
        ("dbb", "Bohmian trajectory ensemble and invariant checks"),
        ("experiment", "simulated counting experiment for the reference scenarios"),
        ("compare", "SQM versus dBB table over detector configurations"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output.dir = args.out
    cfg.validate()
    return cfg


def _set_threads(n: int):
    if n < 0:
        raise ConfigurationError("must be >= 0", "--threads")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS) if n else numba.config.NUMBA_NUM_THREADS)


def _prepare_out(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create {path}: {exc.strerror}", "output.dir") from exc
    if not os.access(out, os.W_OK):
        raise ConfigurationError(f"{path} is not writable", "output.dir")
    return out


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        cfg = load_config(args)
        if args.dump_config:
            sys.stdout.write(cfg.to_toml())
            return EXIT_OK
        _set_threads(args.threads)
        out = _prepare_out(cfg.output.dir)
    except (ConfigurationError, ValueError) as exc:
        print(f"twoslit: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        COMMANDS[args.command](cfg, out)
    except ConfigurationError as exc:
        print(f"twoslit: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TwoSlitError, OSError, ArithmeticError) as exc:
        print(f"twoslit: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"twoslit {args.command}: wrote results to {out}")
    return EXIT_OK
