"""Command-line front end for the simulator.

Subcommands map one-to-one onto the measurement campaigns: mandel (dip
scan), teleport (fringe scan), noise (source-blocking backgrounds),
stability (drift and feedforward traces), validate-timing (gate slack
arithmetic), and limits (the classical and cloning benchmark table).

Scan commands read a flat key=value configuration file whose keys are
exactly the ExperimentConfig field names, print a JSON summary with the
resolved configuration embedded, and optionally write a CSV table.  All
output is deterministic for a given seed, byte for byte.

Exit codes: 0 on success, 2 for configuration problems (unknown keys,
malformed values, bad flag combinations), 3 for numeric failures
(fits that do not converge, truncation overflows, discarded tails).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace
from typing import Dict, List, Optional, Sequence, Union, get_args, get_origin, get_type_hints

from .analysis import (
    CLASSICAL_VISIBILITY_LIMIT,
    CLONING_VISIBILITY_LIMIT,
    classify_visibility,
    fidelity_from_visibility,
    fit_dip,
    fit_fringe,
    net_visibility,
)
from .detection import TimingBudget, validate_timing
from .errors import ConfigError, QRelayError
from .scenarios import (
    BLOCK_CHOICES,
    ExperimentConfig,
    RUN_MODES,
    background_probability,
    build_default_config,
    mismatch_grid,
    phase_grid,
    run_blocking,
    run_mandel_scan,
    run_teleport_scan,
    teleport_acceptance,
)
from .stability import DRIFT_KINDS, Controller, DriftModel, simulate


def _field_types() -> Dict[str, type]:
    hints = get_type_hints(ExperimentConfig)
    out = {}
    for name, hint in hints.items():
        if get_origin(hint) is Union:
            args = [a for a in get_args(hint) if a is not type(None)]
            hint = args[0]
        out[name] = hint
    return out


_BOOL_WORDS = {
    "true": True,
    "1": True,
    "yes": True,
    "on": True,
    "false": False,
    "0": False,
    "no": False,
    "off": False,
}


def _convert(name: str, hint: type, raw: str):
    if hint is bool:
        try:
            return _BOOL_WORDS[raw.lower()]
        except KeyError:
            raise ConfigError(f"config key {name!r} expects a boolean, got {raw!r}")
    if hint is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config key {name!r} expects an integer, got {raw!r}")
    if hint is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config key {name!r} expects a number, got {raw!r}")
    return raw


def parse_config_text(text: str) -> Dict[str, object]:
    """key = value lines into typed values; unknown keys are rejected."""
    types = _field_types()
    values: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in types:
            raise ConfigError(f"unknown config key {key!r} (line {lineno})")
        if key in values:
            raise ConfigError(f"duplicate config key {key!r} (line {lineno})")
        values[key] = _convert(key, types[key], raw)
    if "pair_mean" in values and ("pair_mean_alice" in values or "pair_mean_epr" in values):
        raise ConfigError(
            "pair_mean conflicts with pair_mean_alice/pair_mean_epr; set one form"
        )
    return values


def load_config(path: Optional[str], overrides: Dict[str, object]) -> ExperimentConfig:
    values: Dict[str, object] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        values = parse_config_text(text)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return replace(build_default_config(), **values)


def _format_value(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_format_value(v) for v in row) + "\n")


def _emit_json(document: Dict[str, object]) -> None:
    print(json.dumps(document, indent=2, sort_keys=True))


def _common_overrides(args) -> Dict[str, object]:
    return {
        "seed": getattr(args, "seed", None),
        "mode": getattr(args, "mode", None),
        "trials": getattr(args, "trials", None),
    }


def _fit_to_dict(fit) -> Dict[str, object]:
    return {
        "visibility": fit.visibility,
        "visibility_sigma": fit.visibility_sigma,
        "phase0_rad": fit.phase0,
        "offset": fit.offset,
        "constrained": fit.constrained,
        "unconstrained_visibility": fit.unconstrained_visibility,
    }


def _cmd_mandel(args) -> int:
    cfg = load_config(args.config, _common_overrides(args))
    xs = mismatch_grid(args.points, args.span_um)
    short, long_ = run_mandel_scan(cfg, xs)
    fit_short = fit_dip(xs, short.counts)
    fit_long = fit_dip(xs, long_.counts)
    if args.out:
        _write_csv(
            args.out,
            ("delta_x_um", "coinc_short", "coinc_long"),
            zip(xs.tolist(), short.counts.tolist(), long_.counts.tolist()),
        )
    _emit_json(
        {
            "scenario": "mandel",
            "visibility": fit_short.depth,
            "visibility_sigma": fit_short.depth_sigma,
            "fwhm_um": fit_short.fwhm,
            "fwhm_sigma_um": fit_short.fwhm_sigma,
            "center_short_um": fit_short.center,
            "center_long_um": fit_long.center,
            "depth_long": fit_long.depth,
            "pulses_per_point": short.pulses,
            "csv": args.out,
            "config": asdict(cfg),
        }
    )
    return 0


def _teleport_net_section(cfg, fit, pulses) -> Dict[str, object]:
    background = background_probability(cfg) * pulses
    section: Dict[str, object] = {"background_counts": background}
    try:
        nv = net_visibility(fit.visibility, fit.offset, background)
    except ConfigError as exc:
        section.update({"visibility_net": None, "note": str(exc)})
        return section
    section.update(
        {
            "visibility_net": nv.value,
            "capped": nv.capped,
            "fidelity_net": fidelity_from_visibility(nv.value),
            "classification_net": classify_visibility(nv.value),
        }
    )
    return section


def _cmd_teleport(args) -> int:
    overrides = _common_overrides(args)
    if args.heralded:
        overrides["heralded"] = True
    cfg = load_config(args.config, overrides)
    phases = phase_grid(args.points, args.periods)
    scan = run_teleport_scan(cfg, phases)
    fit = fit_fringe(scan.control, scan.counts)
    if args.out:
        _write_csv(
            args.out,
            ("phi_b_rad", "counts", "expected_prob"),
            zip(scan.control.tolist(), scan.counts.tolist(), scan.probability.tolist()),
        )
    _emit_json(
        {
            "scenario": "teleport",
            "visibility_raw": fit.visibility,
            "visibility_sigma": fit.visibility_sigma,
            "fidelity_raw": fidelity_from_visibility(fit.visibility),
            "classification_raw": classify_visibility(fit.visibility),
            "fringe": _fit_to_dict(fit),
            "acceptance_probability": teleport_acceptance(cfg),
            "net": _teleport_net_section(cfg, fit, scan.pulses),
            "pulses_per_point": scan.pulses,
            "csv": args.out,
            "config": asdict(cfg),
        }
    )
    return 0


def _cmd_noise(args) -> int:
    cfg = load_config(args.config, _common_overrides(args))
    probs = {mode: run_blocking(cfg, mode) for mode in BLOCK_CHOICES}
    if args.out:
        _write_csv(
            args.out,
            ("blocked", "probability"),
            ((mode, probs[mode]) for mode in BLOCK_CHOICES),
        )
    _emit_json(
        {
            "scenario": "noise",
            "blocking_probabilities": probs,
            "background_probability": background_probability(cfg),
            "csv": args.out,
            "config": asdict(cfg),
        }
    )
    return 0


def _cmd_stability(args) -> int:
    drift = DriftModel(
        kind=args.kind,
        amplitude_k=args.amplitude_k,
        period_h=args.period_h,
    )
    controller = None if args.no_controller else Controller(gain_um_per_hz=args.gain)
    trace = simulate(
        drift,
        controller,
        duration_s=args.duration_h * 3600.0,
        dt_s=args.dt_s,
        seed=args.seed,
    )
    if args.out:
        _write_csv(
            args.out,
            ("t", "delta_x_um", "rep_rate_hz", "motor_um", "norm_coincidences"),
            zip(
                trace.time_s.tolist(),
                trace.delta_x_um.tolist(),
                trace.rep_rate_hz.tolist(),
                trace.motor_um.tolist(),
                trace.norm_coincidences.tolist(),
            ),
        )
    floor = float(trace.norm_coincidences.min())
    peak = float(trace.norm_coincidences.max())
    _emit_json(
        {
            "scenario": "stability",
            "controlled": controller is not None,
            "kind": args.kind,
            "duration_h": args.duration_h,
            "floor": floor,
            "peak": peak,
            "held_within_tenth": bool(peak <= floor + 0.1),
            "max_mismatch_um": float(abs(trace.delta_x_um).max()),
            "csv": args.out,
        }
    )
    return 0


def _cmd_validate_timing(args) -> int:
    budget = TimingBudget(
        alice_spool_m=args.alice_spool_m,
        charlie_spool_m=args.charlie_spool_m,
        quantum_fiber_m=args.quantum_fiber_m,
        classical_fiber_m=args.classical_fiber_m,
        bob_spool_m=args.bob_spool_m,
        group_index=args.group_index,
        decision_latency_s=args.latency_ns * 1e-9,
    )
    slack = validate_timing(budget)
    print(f"slack_ns {slack * 1e9:.9g}")
    print("gate_order " + ("trigger-first" if slack > 0 else "photon-first"))
    return 0


def _cmd_limits(_args) -> int:
    rows = [
        ("classical_visibility_limit", "1/3", CLASSICAL_VISIBILITY_LIMIT),
        ("cloning_visibility_limit", "2/3", CLONING_VISIBILITY_LIMIT),
        ("classical_fidelity_limit", "2/3", fidelity_from_visibility(CLASSICAL_VISIBILITY_LIMIT)),
        ("cloning_fidelity_limit", "5/6", fidelity_from_visibility(CLONING_VISIBILITY_LIMIT)),
    ]
    for name, fraction, value in rows:
        print(f"{name:<28} {fraction:>4} {value:.9f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrelay",
        description="time-bin teleportation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scan_flags(p, points_default):
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mode", choices=RUN_MODES, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--out", help="write the scan table to this CSV path")
        p.add_argument("--points", type=int, default=points_default)

    p_mandel = sub.add_parser("mandel", help="coincidence dip versus path mismatch")
    add_scan_flags(p_mandel, 41)
    p_mandel.add_argument("--span-um", type=float, default=300.0)
    p_mandel.set_defaults(func=_cmd_mandel)

    p_tel = sub.add_parser("teleport", help="fringe versus receiver analyzer phase")
    add_scan_flags(p_tel, 24)
    p_tel.add_argument("--periods", type=float, default=2.0)
    p_tel.add_argument("--heralded", action="store_true")
    p_tel.set_defaults(func=_cmd_teleport)

    p_noise = sub.add_parser("noise", help="source-blocking background probabilities")
    p_noise.add_argument("--config")
    p_noise.add_argument("--seed", type=int, default=None)
    p_noise.add_argument("--out")
    p_noise.set_defaults(func=_cmd_noise)

    p_stab = sub.add_parser("stability", help="drift and feedforward time series")
    p_stab.add_argument("--kind", choices=DRIFT_KINDS, default="sinusoid")
    p_stab.add_argument("--amplitude-k", type=float, default=1.0)
    p_stab.add_argument("--period-h", type=float, default=48.0)
    p_stab.add_argument("--duration-h", type=float, default=24.0)
    p_stab.add_argument("--dt-s", type=float, default=60.0)
    p_stab.add_argument("--seed", type=int, default=0)
    p_stab.add_argument("--gain", type=float, default=0.07)
    p_stab.add_argument("--no-controller", action="store_true")
    p_stab.add_argument("--out")
    p_stab.set_defaults(func=_cmd_stability)

    p_time = sub.add_parser("validate-timing", help="receiver gate slack in ns")
    p_time.add_argument("--alice-spool-m", type=float, default=177.0)
    p_time.add_argument("--charlie-spool-m", type=float, default=179.72)
    p_time.add_argument("--quantum-fiber-m", type=float, default=800.0)
    p_time.add_argument("--classical-fiber-m", type=float, default=800.0)
    p_time.add_argument("--bob-spool-m", type=float, default=250.0)
    p_time.add_argument("--group-index", type=float, default=1.468)
    p_time.add_argument("--latency-ns", type=float, default=220.0)
    p_time.set_defaults(func=_cmd_validate_timing)

    p_lim = sub.add_parser("limits", help="classical and cloning benchmarks")
    p_lim.set_defaults(func=_cmd_limits)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QRelayError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
