"""Command-line interface.

Subcommands mirror the experiments and the data-reduction steps; configs are
JSON documents whose blocks map one-to-one onto the library's configuration
types (units embedded in the field names, unknown keys rejected).  Outputs
are CSV spectra and JSON fit reports, written atomically; repeated runs with
the same config and seed are byte-identical.  Exit codes: 0 success,
2 configuration/usage error, 3 solver or fit failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import analysis, corrections, spectroscopy
from .dynamics import (DegenerateSteadyStateError, EnsembleKernelError,
                       EnsembleSpec, StiffIntegrationError)
from .spinmodel import (ConfigError, DriveField, HyperfineConfig,
                        InhomogeneityConfig, RelaxationConfig, ZeemanConfig)

_SOLVER_ERRORS = (DegenerateSteadyStateError, StiffIntegrationError,
                  EnsembleKernelError, analysis.DegenerateDataError,
                  analysis.DipNotFoundError, RuntimeError)


# ---------------------------------------------------------------------------
# Config ingestion
# ---------------------------------------------------------------------------

def _check_keys(data: dict, where: str, allowed: set[str]) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")


def _build_zeeman(data: dict) -> ZeemanConfig:
    _check_keys(data, "zeeman", {"g_e", "g_h", "b_tesla", "e0_ev"})
    return ZeemanConfig(**data)


def _build_hyperfine(data: dict) -> HyperfineConfig:
    _check_keys(data, "hyperfine", {"nuclear_spin", "spacing_mhz", "weights"})
    if data.get("weights") is not None:
        data = dict(data, weights=tuple(data["weights"]))
    return HyperfineConfig(**data)


def _build_relaxation(data: dict) -> RelaxationConfig:
    _check_keys(data, "relaxation", {"gamma_x_ghz", "branch_up", "gamma_spin_ghz",
                                     "gamma_deph_opt_ghz", "gamma_deph_spin_ghz"})
    return RelaxationConfig(**data)


def _build_inhomogeneity(data: dict) -> InhomogeneityConfig:
    _check_keys(data, "inhomogeneity",
                {"sigma_opt_ghz", "shift_mode", "n_samples", "seed"})
    return InhomogeneityConfig(**data)


def _build_drive(data: dict, where: str) -> DriveField:
    _check_keys(data, where, {"role", "target", "rabi_ghz", "detuning_ghz",
                              "energy_ev"})
    return DriveField(**data)


def _build_beamsplitter(data: dict) -> corrections.BeamsplitterModel:
    _check_keys(data, "beamsplitter", {"offset", "amplitude", "period_mev",
                                       "phase_rad", "mean_reflectance", "e_ref_ev"})
    return corrections.BeamsplitterModel(**data)


_TOP_KEYS = {"experiment", "zeeman", "hyperfine", "relaxation", "inhomogeneity",
             "drives", "scan", "model_dim", "detection_scalar", "seed",
             "pump_detuning_ghz", "pump_detunings_ghz", "duration_ns", "n_points",
             "b_fields_tesla", "angles_deg", "gaussian_sigma_uev",
             "lorentzian_gamma_uev", "phase0_deg", "beamsplitter",
             "background_windows_ev"}


def load_config(path: str, args) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    _check_keys(cfg, path, _TOP_KEYS)
    if args.b_field is not None:
        cfg.setdefault("zeeman", {})["b_tesla"] = args.b_field
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.pump_detuning_ghz is not None:
        cfg["pump_detuning_ghz"] = args.pump_detuning_ghz
    return cfg


def _build_axis(scan: dict) -> dict:
    _check_keys(scan, "scan", {"start_ghz", "stop_ghz", "step_ghz",
                               "coarse_span_ghz", "coarse_step_ghz",
                               "fine_span_ghz", "fine_step_ghz",
                               "fine_center_ghz"})
    if "coarse_span_ghz" in scan:
        axis = spectroscopy.composite_axis(
            scan["coarse_span_ghz"], scan["coarse_step_ghz"],
            scan.get("fine_span_ghz", 0.0) or scan["coarse_span_ghz"] / 10,
            scan.get("fine_step_ghz", scan["coarse_step_ghz"]),
            scan.get("fine_center_ghz", 0.0))
        return {"axis_ghz": axis}
    return {"start_ghz": scan.get("start_ghz"), "stop_ghz": scan.get("stop_ghz"),
            "step_ghz": scan.get("step_ghz")}


def build_plan(cfg: dict, n_drives: int | None) -> spectroscopy.ScanPlan:
    drives = tuple(_build_drive(d, f"drives[{i}]")
                   for i, d in enumerate(cfg.get("drives", [])))
    if n_drives is not None and len(drives) != n_drives:
        raise ConfigError(f"this experiment needs exactly {n_drives} drive(s), "
                          f"got {len(drives)}")
    inhom = _build_inhomogeneity(cfg.get("inhomogeneity", {}))
    if "seed" in cfg:
        inhom = replace(inhom, seed=int(cfg["seed"]))
    ensemble = EnsembleSpec(_build_hyperfine(cfg.get("hyperfine", {})), inhom)
    axis_kwargs = _build_axis(cfg.get("scan", {})) if "scan" in cfg else {}
    return spectroscopy.ScanPlan(
        zeeman=_build_zeeman(cfg.get("zeeman", {})),
        relaxation=_build_relaxation(cfg.get("relaxation", {})),
        drives=drives,
        ensemble=ensemble,
        model_dim=int(cfg.get("model_dim", 4)),
        detection_scalar=float(cfg.get("detection_scalar", 1.0)),
        **axis_kwargs)


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_spectrum(spectrum: spectroscopy.Spectrum, path: str) -> None:
    lines = [f"# axis_kind={spectrum.axis_kind}"]
    for key in sorted(spectrum.meta):
        lines.append(f"# {key}={spectrum.meta[key]}")
    lines.append("axis,counts")
    for x, y in zip(spectrum.axis, spectrum.counts):
        lines.append(f"{x:.12g},{y:.12g}")
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(obj, path: str) -> None:
    _atomic_write(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def render_svg(spectrum: spectroscopy.Spectrum, overlay=None,
               width: int = 800, height: int = 500) -> str:
    """Deterministic SVG line plot of a spectrum, optional fit overlay."""
    pad = 60.0
    x, y = spectrum.axis, spectrum.counts
    x0, x1 = float(x.min()), float(x.max())
    ys = [y] + ([overlay] if overlay is not None else [])
    y0 = min(float(np.min(v)) for v in ys)
    y1 = max(float(np.max(v)) for v in ys)
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    def polyline(vals, color):
        pts = " ".join(f"{sx(a):.3f},{sy(b):.3f}" for a, b in zip(x, vals))
        return (f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                f'points="{pts}"/>')

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 15}" text-anchor="middle" '
        f'font-size="14">{spectrum.axis_kind}</text>',
        f'<text x="18" y="{height / 2:.0f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {height / 2:.0f})">counts</text>',
        polyline(y, "steelblue"),
    ]
    if overlay is not None:
        parts.append(polyline(np.asarray(overlay, dtype=float), "crimson"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _emit_spectrum(spectrum, cfg, args) -> None:
    spectrum.meta["config_hash"] = _config_hash(cfg)
    write_spectrum(spectrum, args.out)
    if args.plot:
        _atomic_write(args.out + ".svg", render_svg(spectrum))


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_simulate_ple(args) -> int:
    cfg = load_config(args.config, args)
    plan = build_plan(cfg, 1)
    _emit_spectrum(spectroscopy.simulate_single_laser_ple(plan), cfg, args)
    return 0


def _cmd_simulate_two_laser(args) -> int:
    cfg = load_config(args.config, args)
    plan = build_plan(cfg, 2)
    _emit_spectrum(spectroscopy.simulate_two_laser_ple(plan), cfg, args)
    return 0


def _cmd_simulate_cpt(args) -> int:
    cfg = load_config(args.config, args)
    plan = build_plan(cfg, 2)
    delta = float(cfg.get("pump_detuning_ghz", 0.0))
    _emit_spectrum(spectroscopy.simulate_cpt_scan(plan, delta), cfg, args)
    return 0


def _cmd_simulate_pumping(args) -> int:
    cfg = load_config(args.config, args)
    plan = build_plan(cfg, None)
    spectrum = spectroscopy.simulate_pumping_transient(
        plan, float(cfg.get("duration_ns", 50.0)), int(cfg.get("n_points", 401)))
    _emit_spectrum(spectrum, cfg, args)
    return 0


def _cmd_simulate_magneto(args) -> int:
    cfg = load_config(args.config, args)
    zeeman = _build_zeeman(cfg.get("zeeman", {}))
    b_values = cfg.get("b_fields_tesla")
    if not b_values or len(b_values) < 2:
        raise ConfigError("b_fields_tesla must list at least two fields")
    points = spectroscopy.simulate_magneto_pl(zeeman, b_values)
    spectrum = spectroscopy.Spectrum(
        np.array([p.b_tesla for p in points]),
        np.array([p.splitting_mev for p in points]),
        axis_kind="b_tesla",
        meta={"counts_kind": "splitting_mev",
              "e0_ev": f"{zeeman.e0_ev:.12g}",
              "config_hash": _config_hash(cfg)})
    write_spectrum(spectrum, args.out)
    if args.plot:
        _atomic_write(args.out + ".svg", render_svg(spectrum))
    return 0


def _cmd_simulate_polarization(args) -> int:
    cfg = load_config(args.config, args)
    zeeman = _build_zeeman(cfg.get("zeeman", {}))
    angles = cfg.get("angles_deg")
    if not angles or len(angles) < 8:
        raise ConfigError("angles_deg must list at least eight angles")
    scan = spectroscopy.simulate_polarization_pl(
        zeeman, angles, float(cfg.get("gaussian_sigma_uev", 50.0)),
        float(cfg.get("lorentzian_gamma_uev", 0.0)),
        float(cfg.get("phase0_deg", 0.0)))
    lines = [f"# b_tesla={zeeman.b_tesla:.12g}",
             f"# resolved_doublet={str(scan.resolved_doublet).lower()}",
             f"# config_hash={_config_hash(cfg)}",
             "phi_deg,e_low_ev,e_high_ev"]
    for p in scan.points:
        lines.append(f"{p.phi_deg:.12g},{p.e_low_ev:.12g},{p.e_high_ev:.12g}")
    _atomic_write(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_fit_voigt(args) -> int:
    spectrum = spectroscopy.read_spectrum_csv(args.input)
    fit = analysis.fit_voigt(spectrum)
    write_json(fit.to_json_dict(), args.out)
    if args.plot:
        overlay = analysis.voigt_eval(fit.params, spectrum.axis)
        _atomic_write(args.out + ".svg", render_svg(spectrum, overlay))
    return 0


def _cmd_fit_cpt(args) -> int:
    spectrum = spectroscopy.read_spectrum_csv(args.input)
    fit = analysis.fit_peak_with_dip(spectrum)
    write_json(fit.to_json_dict(), args.out)
    if args.plot:
        overlay = fit.params.eval(spectrum.axis)
        _atomic_write(args.out + ".svg", render_svg(spectrum, overlay))
    return 0


def _parse_windows(args, cfg) -> list:
    windows = []
    for w in args.background_window or []:
        lo, _, hi = w.partition(":")
        try:
            windows.append((float(lo), float(hi)))
        except ValueError:
            raise ConfigError(f"bad --background-window {w!r}, expected lo:hi")
    for w in cfg.get("background_windows_ev", []):
        windows.append((float(w[0]), float(w[1])))
    if not windows:
        raise ConfigError("no background window given "
                          "(--background-window lo:hi or background_windows_ev)")
    return windows


def _cmd_correct_background(args) -> int:
    cfg = load_config(args.config, args) if args.config else {}
    spectrum = spectroscopy.read_spectrum_csv(args.input)
    model = _build_beamsplitter(cfg.get("beamsplitter", {}))
    windows = _parse_windows(args, cfg)
    estimate = corrections.estimate_phase(spectrum, windows, model)
    if estimate.status == "no_oscillation":
        out = spectroscopy.Spectrum(spectrum.axis, spectrum.counts,
                                    spectrum.axis_kind, dict(spectrum.meta))
        out.meta["background_correction"] = "skipped: no oscillation detected"
    else:
        out = corrections.apply_correction(spectrum, estimate.model)
        out.meta["background_phase_rad"] = f"{estimate.phase_rad:.12g}"
    write_spectrum(out, args.out)
    if args.plot:
        _atomic_write(args.out + ".svg", render_svg(out))
    return 0


def _cmd_extract_gfactors(args) -> int:
    if not args.magneto and not args.polarization:
        raise ConfigError("give --magneto and/or --polarization input files")
    report = {}
    if args.magneto:
        spectrum = spectroscopy.read_spectrum_csv(args.magneto)
        fit = analysis.fit_zeeman_splitting(
            list(zip(spectrum.axis, spectrum.counts)))
        report["magneto"] = {"g_tot": fit.g_tot, "g_tot_err": fit.g_tot_err,
                             "slope_mev_per_t": fit.slope_mev_per_t}
    if args.polarization:
        b_tesla, low, high = _read_polarization_csv(args.polarization)
        fit = analysis.fit_polarization_positions(low, high, b_tesla)
        report["polarization"] = {
            "g_e_perp": fit.g_e_perp,
            "g_h_perp_lower_bound": fit.g_h_perp_lower_bound,
            "period_deg_low": fit.low.period_deg,
            "period_deg_high": fit.high.period_deg,
        }
    write_json(report, args.out)
    return 0


def _read_polarization_csv(path: str):
    b_tesla = None
    low, high = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("phi_deg"):
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key == "b_tesla":
                    b_tesla = float(value)
                continue
            phi, e_low, e_high = (float(v) for v in line.split(","))
            low.append((phi, e_low))
            high.append((phi, e_high))
    if b_tesla is None:
        raise ConfigError(f"{path}: missing '# b_tesla=' header")
    return b_tesla, low, high


def _cmd_dip_slope(args) -> int:
    cfg = load_config(args.config, args)
    plan = build_plan(cfg, 2)
    detunings = cfg.get("pump_detunings_ghz")
    if not detunings or len(detunings) < 3:
        raise ConfigError("pump_detunings_ghz must list at least three detunings")
    scans = [(float(d), spectroscopy.simulate_cpt_scan(plan, float(d)))
             for d in detunings]
    fit = analysis.dip_shift_slope(scans)
    write_json({"slope": fit.slope, "slope_err": fit.slope_err,
                "intercept": fit.intercept, "dip_centers_ghz": list(fit.centers),
                "pump_detunings_ghz": [float(d) for d in detunings],
                "config_hash": _config_hash(cfg)}, args.out)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------

_HANDLERS = {
    "simulate-ple": (_cmd_simulate_ple, True, False),
    "simulate-two-laser": (_cmd_simulate_two_laser, True, False),
    "simulate-cpt": (_cmd_simulate_cpt, True, False),
    "simulate-pumping": (_cmd_simulate_pumping, True, False),
    "simulate-magneto": (_cmd_simulate_magneto, True, False),
    "simulate-polarization": (_cmd_simulate_polarization, True, False),
    "fit-voigt": (_cmd_fit_voigt, False, True),
    "fit-cpt": (_cmd_fit_cpt, False, True),
    "correct-background": (_cmd_correct_background, False, True),
    "extract-gfactors": (_cmd_extract_gfactors, False, False),
    "dip-slope": (_cmd_dip_slope, True, False),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="donorspin",
        description="Donor-bound-exciton spin spectroscopy: simulation and analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, needs_config, needs_input) in _HANDLERS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config,
                       help="JSON configuration file")
        p.add_argument("--out", required=True, help="output file path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--plot", action="store_true",
                       help="also write an SVG plot next to the output")
        p.add_argument("--b-field", type=float, default=None, dest="b_field",
                       help="override zeeman.b_tesla")
        p.add_argument("--pump-detuning-ghz", type=float, default=None,
                       dest="pump_detuning_ghz")
        if needs_input:
            p.add_argument("--in", required=True, dest="input",
                           help="input spectrum CSV")
        if name == "correct-background":
            p.add_argument("--background-window", action="append",
                           metavar="LO:HI", help="off-resonant window in eV")
            p.set_defaults(config=None)
        if name == "extract-gfactors":
            p.add_argument("--magneto", help="CSV of splitting vs field")
            p.add_argument("--polarization", help="CSV of peak position vs angle")
    return parser


def run(argv) -> int:
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = _HANDLERS[args.command][0]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _SOLVER_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
