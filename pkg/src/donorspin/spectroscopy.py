"""Experiment emulation: excitation scans, transients, magneto- and
polarization-resolved photoluminescence.

Every scan produces a `Spectrum`.  The detected signal is the steady-state
exciton population times the decay rate times a detection scalar, i.e. an
emission rate in arbitrary units; red-shifted detection channels are
absorbed into the scalar.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import _voigt_shape
from .dynamics import (DensityMatrix, EnsembleSpec, ensemble_average, evolve_path,
                       steady_state_batch)
from .spinmodel import (EV_TO_GHZ, ConfigError, DriveField, LevelScheme,
                        RelaxationConfig, ZeemanConfig, apply_energy_shift,
                        build_level_scheme, build_liouvillian,
                        build_liouvillian_pencil, excited_splitting,
                        ground_splitting)


# ---------------------------------------------------------------------------
# Spectrum container and CSV round trip
# ---------------------------------------------------------------------------

@dataclass
class Spectrum:
    """A sampled 1-D signal: strictly monotone axis, non-negative counts."""

    axis: np.ndarray
    counts: np.ndarray
    axis_kind: str = "detuning_ghz"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.axis.ndim != 1 or len(self.axis) < 2:
            raise ConfigError("axis must be 1-D with at least two points")
        if len(self.axis) != len(self.counts):
            raise ConfigError("axis and counts must have equal length")
        d = np.diff(self.axis)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigError("axis must be strictly monotone")
        if np.min(self.counts) < -1e-8:
            raise ConfigError("counts must be non-negative")
        self.counts = np.clip(self.counts, 0.0, None)

    def peak_value(self) -> float:
        return float(np.max(self.counts))


def write_spectrum_csv(spectrum: Spectrum, path) -> None:
    """Write `# key=value` metadata lines, then `axis,counts` float rows
    (12 significant digits)."""
    lines = [f"# axis_kind={spectrum.axis_kind}"]
    for key in sorted(spectrum.meta):
        lines.append(f"# {key}={spectrum.meta[key]}")
    lines.append("axis,counts")
    for x, y in zip(spectrum.axis, spectrum.counts):
        lines.append(f"{x:.12g},{y:.12g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrum_csv(path) -> Spectrum:
    meta: dict = {}
    axis: list[float] = []
    counts: list[float] = []
    axis_kind = "detuning_ghz"
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key == "axis_kind":
                    axis_kind = value
                else:
                    meta[key] = value
                continue
            if line.startswith("axis"):
                continue
            a, _, c = line.partition(",")
            axis.append(float(a))
            counts.append(float(c))
    return Spectrum(np.array(axis), np.array(counts), axis_kind, meta)


# ---------------------------------------------------------------------------
# Scan plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanPlan:
    """A scan definition: fixed physics plus the scanned-axis grid.

    The axis is the scanned drive's detuning (GHz) from its nominal target
    transition; either start/stop/step or an explicit grid may be given.
    """

    zeeman: ZeemanConfig
    relaxation: RelaxationConfig
    drives: tuple[DriveField, ...]
    ensemble: EnsembleSpec = EnsembleSpec()
    start_ghz: float | None = None
    stop_ghz: float | None = None
    step_ghz: float | None = None
    axis_ghz: tuple[float, ...] | None = None
    model_dim: int = 4
    detection_scalar: float = 1.0

    def __post_init__(self):
        if self.detection_scalar < 0:
            raise ConfigError("detection_scalar must be >= 0")
        if self.axis_ghz is None and self.start_ghz is not None:
            if self.step_ghz is None or self.step_ghz <= 0:
                raise ConfigError("step_ghz must be > 0")
            if self.stop_ghz is None or not self.start_ghz < self.stop_ghz:
                raise ConfigError("need start < stop")

    def axis(self) -> np.ndarray:
        if self.axis_ghz is not None:
            ax = np.asarray(self.axis_ghz, dtype=float)
            if len(ax) < 2 or np.any(np.diff(ax) <= 0):
                raise ConfigError("explicit axis must be strictly increasing")
            return ax
        if self.start_ghz is None:
            raise ConfigError("scan axis not specified")
        n = int(round((self.stop_ghz - self.start_ghz) / self.step_ghz))
        return self.start_ghz + self.step_ghz * np.arange(n + 1)

    def drive(self, role: str) -> DriveField:
        for dr in self.drives:
            if dr.role == role:
                return dr
        raise ConfigError(f"plan has no {role!r} drive")


def composite_axis(coarse_span_ghz: float, coarse_step_ghz: float,
                   fine_span_ghz: float, fine_step_ghz: float,
                   center_ghz: float = 0.0) -> tuple[float, ...]:
    """Coarse grid over the full window merged with a fine grid around
    `center_ghz`; used to resolve a narrow dip on a wide peak in one scan."""
    nc = int(round(2 * coarse_span_ghz / coarse_step_ghz))
    coarse = -coarse_span_ghz + coarse_step_ghz * np.arange(nc + 1)
    nf = int(round(2 * fine_span_ghz / fine_step_ghz))
    fine = center_ghz - fine_span_ghz + fine_step_ghz * np.arange(nf + 1)
    merged = np.unique(np.round(np.concatenate([coarse, fine]), 9))
    return tuple(merged)


# ---------------------------------------------------------------------------
# Steady-state excitation scans
# ---------------------------------------------------------------------------

def _scan_counts(plan: ScanPlan, drives: list[DriveField], scan_role: str,
                 scheme: LevelScheme, axis: np.ndarray) -> np.ndarray:
    scanned = next(dr for dr in drives if dr.role == scan_role)
    target_ev = scheme.transition_energy(scanned.target)
    nominal_det = (scanned.photon_energy_ev(scheme) - target_ev) * EV_TO_GHZ
    offsets = axis - nominal_det
    mode = plan.ensemble.inhomogeneity.shift_mode

    def kernel(hf_shift: float, opt_shift: float) -> np.ndarray:
        scheme_m = apply_energy_shift(scheme, opt_shift, mode)
        model, pencil = build_liouvillian_pencil(
            scheme_m, drives, plan.relaxation, hf_shift,
            dim=plan.model_dim, scan_role=scan_role)
        rho = steady_state_batch(model.matrix, pencil, offsets)
        pops = np.real(np.diagonal(rho, axis1=1, axis2=2))
        excited = pops[:, list(model.excited_indices)].sum(axis=1)
        return excited * model.gamma_x_ghz * plan.detection_scalar

    return ensemble_average(kernel, plan.ensemble)


def _base_meta(plan: ScanPlan, scheme: LevelScheme, drives: list[DriveField],
               scan_role: str) -> dict:
    scanned = next(dr for dr in drives if dr.role == scan_role)
    meta = {
        "scan_role": scan_role,
        "scan_target": scanned.target,
        "scan_target_energy_ev": f"{scheme.transition_energy(scanned.target):.12g}",
        "gamma_x_ghz": f"{plan.relaxation.gamma_x_ghz:.12g}",
        "detection_scalar": f"{plan.detection_scalar:.12g}",
        "model_dim": str(plan.model_dim),
        "b_tesla": f"{plan.zeeman.b_tesla:.12g}",
        "sigma_opt_ghz": f"{plan.ensemble.inhomogeneity.sigma_opt_ghz:.12g}",
        "shift_mode": plan.ensemble.inhomogeneity.shift_mode,
        "seed": str(plan.ensemble.inhomogeneity.seed),
    }
    for dr in drives:
        if dr.role != scan_role:
            meta[f"{dr.role}_energy_ev"] = f"{dr.photon_energy_ev(scheme):.12g}"
            meta[f"{dr.role}_target"] = dr.target
    return meta


def simulate_single_laser_ple(plan: ScanPlan) -> Spectrum:
    """Excitation scan with one laser tuned across its target transition."""
    if len(plan.drives) != 1:
        raise ConfigError("single-laser scan needs exactly one drive")
    scheme = build_level_scheme(plan.zeeman)
    drives = [dr.resolved(scheme) for dr in plan.drives]
    axis = plan.axis()
    counts = _scan_counts(plan, drives, drives[0].role, scheme, axis)
    return Spectrum(axis, counts, "detuning_ghz",
                    _base_meta(plan, scheme, drives, drives[0].role))


def simulate_two_laser_ple(plan: ScanPlan) -> Spectrum:
    """Probe scan across its target manifold with the pump fixed; shows the
    recovered (re-pumped) peak."""
    if len(plan.drives) != 2:
        raise ConfigError("two-laser scan needs exactly two drives")
    scheme = build_level_scheme(plan.zeeman)
    drives = [dr.resolved(scheme) for dr in plan.drives]
    axis = plan.axis()
    counts = _scan_counts(plan, drives, "probe", scheme, axis)
    return Spectrum(axis, counts, "detuning_ghz",
                    _base_meta(plan, scheme, drives, "probe"))


def _expected_dip_width_ghz(plan: ScanPlan) -> float:
    hf = plan.ensemble.hyperfine
    span = (hf.n_lines - 1) * hf.spacing_mhz * 1e-3
    relax = plan.relaxation
    gamma12 = relax.gamma_spin_ghz + relax.gamma_deph_spin_ghz
    gamma_opt = relax.gamma_x_ghz + 2.0 * relax.gamma_deph_opt_ghz
    rabi2 = sum(dr.rabi_ghz ** 2 for dr in plan.drives)
    power = rabi2 / gamma_opt if gamma_opt > 0 else 0.0
    return span + 2.0 * gamma12 + power


def simulate_cpt_scan(plan: ScanPlan, pump_detuning_ghz: float = 0.0) -> Spectrum:
    """Two-laser probe scan across the two-photon resonance.

    The dip sits where the probe-pump energy difference matches the (shifted)
    ground splitting, i.e. at probe detuning = pump detuning on this axis.
    A grid coarser than a fifth of the expected dip width around that point
    sets meta['coarse_grid_warning'].
    """
    if len(plan.drives) != 2:
        raise ConfigError("a CPT scan needs pump and probe drives")
    scheme = build_level_scheme(plan.zeeman)
    drives = []
    for dr in plan.drives:
        dr = dr.resolved(scheme)
        if dr.role == "pump":
            dr = replace(dr, energy_ev=dr.energy_ev + pump_detuning_ghz / EV_TO_GHZ)
        drives.append(dr)
    axis = plan.axis()
    counts = _scan_counts(plan, drives, "probe", scheme, axis)
    meta = _base_meta(plan, scheme, drives, "probe")
    meta["pump_detuning_ghz"] = f"{pump_detuning_ghz:.12g}"
    width = _expected_dip_width_ghz(plan)
    window = (axis > pump_detuning_ghz - width) & (axis < pump_detuning_ghz + width)
    if np.count_nonzero(window) > 1:
        local_step = float(np.max(np.diff(axis[window])))
    else:
        local_step = float(np.max(np.diff(axis)))
    if local_step > width / 5.0:
        meta["coarse_grid_warning"] = "true"
    return Spectrum(axis, counts, "detuning_ghz", meta)


# ---------------------------------------------------------------------------
# Optical pumping transient
# ---------------------------------------------------------------------------

def simulate_pumping_transient(plan: ScanPlan, duration_ns: float,
                               n_points: int = 401) -> Spectrum:
    """Step-on response from the unpolarized ground mixture: the emission
    rate versus time after the configured drives switch on at t = 0."""
    if duration_ns <= 0:
        raise ConfigError("duration_ns must be > 0")
    if n_points < 2:
        raise ConfigError("n_points must be >= 2")
    scheme = build_level_scheme(plan.zeeman)
    drives = [dr.resolved(scheme) for dr in plan.drives]
    times = np.linspace(0.0, duration_ns, n_points)
    mode = plan.ensemble.inhomogeneity.shift_mode

    def kernel(hf_shift: float, opt_shift: float) -> np.ndarray:
        scheme_m = apply_energy_shift(scheme, opt_shift, mode)
        model = build_liouvillian(scheme_m, drives, plan.relaxation, hf_shift,
                                  dim=plan.model_dim)
        rho0 = DensityMatrix.thermal_ground(len(model.labels))
        states = evolve_path(model, rho0, times[1:])
        pops = np.real(np.diagonal(states, axis1=1, axis2=2))
        excited = pops[:, list(model.excited_indices)].sum(axis=1)
        signal = np.concatenate([[0.0], excited])
        return signal * model.gamma_x_ghz * plan.detection_scalar

    counts = ensemble_average(kernel, plan.ensemble)
    meta = {"duration_ns": f"{duration_ns:.12g}",
            "model_dim": str(plan.model_dim),
            "gamma_x_ghz": f"{plan.relaxation.gamma_x_ghz:.12g}"}
    return Spectrum(times, np.clip(counts, 0.0, None), "time_ns", meta)


# ---------------------------------------------------------------------------
# Magneto-PL and polarization-resolved PL
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MagnetoPoint:
    b_tesla: float
    e_low_ev: float
    e_high_ev: float
    splitting_mev: float


def simulate_magneto_pl(z: ZeemanConfig, b_values) -> list[MagnetoPoint]:
    """Positions of the two field-split emission peaks versus field.

    The exciton doublet is unresolved; the collected polarization selects
    the outermost doublet component of each peak, so the separation grows as
    (g_e + g_h) * mu_B * B.
    """
    points = []
    for b in b_values:
        zb = replace(z, b_tesla=float(b))
        dg = ground_splitting(zb)
        dh = excited_splitting(zb)
        half = (dg.ev + dh.ev) / 2.0
        points.append(MagnetoPoint(
            b_tesla=float(b),
            e_low_ev=zb.e0_ev - half,
            e_high_ev=zb.e0_ev + half,
            splitting_mev=dg.mev + dh.mev,
        ))
    return points


@dataclass(frozen=True)
class PolarizationPoint:
    phi_deg: float
    e_low_ev: float
    e_high_ev: float


@dataclass(frozen=True)
class PolarizationScan:
    points: tuple[PolarizationPoint, ...]
    resolved_doublet: bool


def _mixture_argmax(centers_ev, weights, sigma_ev: float, gamma_ev: float) -> float:
    lo = min(centers_ev) - 5.0 * (sigma_ev + gamma_ev)
    hi = max(centers_ev) + 5.0 * (sigma_ev + gamma_ev)
    grid = np.arange(lo, hi, 0.1e-6)  # 0.1 ueV position resolution
    profile = np.zeros_like(grid)
    for c, w in zip(centers_ev, weights):
        profile += w * _voigt_shape(grid - c, sigma_ev, gamma_ev)
    return float(grid[int(np.argmax(profile))])


def simulate_polarization_pl(z: ZeemanConfig, angles_deg,
                             gaussian_sigma_uev: float,
                             lorentzian_gamma_uev: float = 0.0,
                             phase0_deg: float = 0.0) -> PolarizationScan:
    """Peak maxima of the two emission peaks versus half-wave-plate angle.

    Each peak mixes its V and H doublet components (split by the hole
    Zeeman energy) with weights cos^2(2*phi + phi0) and sin^2(2*phi + phi0);
    the reported position is the argmax of the mixture on a 0.1 ueV grid.
    In the resolved-doublet regime (linewidth below the splitting) the scan
    is flagged but positions are still returned.
    """
    if gaussian_sigma_uev < 0 or lorentzian_gamma_uev < 0:
        raise ConfigError("linewidths must be >= 0")
    if gaussian_sigma_uev == 0 and lorentzian_gamma_uev == 0:
        raise ConfigError("need a nonzero linewidth")
    scheme = build_level_scheme(z)
    sigma_ev = gaussian_sigma_uev * 1e-6
    gamma_ev = lorentzian_gamma_uev * 1e-6
    # low-energy peak: transitions from |up>; high-energy peak: from |down>
    comp = {
        "low": {"V": scheme.transition_energy("up-Xdown"),
                "H": scheme.transition_energy("up-Xup")},
        "high": {"V": scheme.transition_energy("down-Xup"),
                 "H": scheme.transition_energy("down-Xdown")},
    }
    points = []
    for phi in angles_deg:
        arg = math.radians(2.0 * float(phi) + phase0_deg)
        w_v, w_h = math.cos(arg) ** 2, math.sin(arg) ** 2
        positions = {}
        for name, c in comp.items():
            positions[name] = _mixture_argmax(
                [c["V"], c["H"]], [w_v, w_h], sigma_ev, gamma_ev)
        points.append(PolarizationPoint(float(phi), positions["low"],
                                        positions["high"]))
    from .analysis import voigt_fwhm
    fwhm_uev = voigt_fwhm(gaussian_sigma_uev, lorentzian_gamma_uev)
    resolved = fwhm_uev < excited_splitting(z).uev
    return PolarizationScan(tuple(points), resolved)
