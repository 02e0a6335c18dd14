"""Physical configuration of the neutral-donor / donor-bound-exciton system.

The model is a four-level scheme: two electron spin ground states |up>, |down>
split by the electron Zeeman energy, and two exciton states |Xup>, |Xdown>
split by the hole Zeeman energy (the two exciton electrons pair into a spin
singlet, so only the hole responds to the field).  This module builds the
level/transition tables and assembles the Lindblad generator for one- or
two-laser continuous-wave drive in the rotating frame.

Unit conventions, used consistently everywhere:

* level and photon energies: eV (splittings quoted in meV or ueV)
* magnetic field: tesla
* every rate, Rabi frequency and detuning: ordinary frequency in GHz
* time: ns

The generator multiplies all GHz quantities by 2*pi, so a rate gamma decays
populations as exp(-2*pi*gamma*t[ns]) and a rate gamma contributes gamma (not
gamma/2/pi) to Lorentzian full widths measured on a GHz detuning axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


class ConfigError(ValueError):
    """Invalid physical configuration."""


# ---------------------------------------------------------------------------
# Constants and unit helpers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalConstants:
    """Fixed conversion constants.

    mu_b_uev_per_t: Bohr magneton, ueV per tesla.
    ghz_per_uev:    Planck conversion, GHz of ordinary frequency per ueV.
    """

    mu_b_uev_per_t: float = 57.8838
    ghz_per_uev: float = 0.2417990


CONSTANTS = PhysicalConstants()

#: ordinary-frequency GHz per eV
EV_TO_GHZ = CONSTANTS.ghz_per_uev * 1e6


@dataclass(frozen=True)
class EnergySplitting:
    """An energy difference, convertible between ueV, meV and GHz."""

    uev: float

    @property
    def mev(self) -> float:
        return self.uev * 1e-3

    @property
    def ev(self) -> float:
        return self.uev * 1e-6

    @property
    def ghz(self) -> float:
        return self.uev * CONSTANTS.ghz_per_uev


def rabi_from_power(power_uw: float, rabi2_per_uw_ghz2: float) -> float:
    """Map laser power (uW) to a Rabi frequency (GHz) via a linear
    power -> rabi**2 coefficient.  Convenience only; the physical inputs of
    every solver are Rabi frequencies."""
    if power_uw < 0 or rabi2_per_uw_ghz2 < 0:
        raise ConfigError("power and saturation coefficient must be >= 0")
    return math.sqrt(power_uw * rabi2_per_uw_ghz2)


# ---------------------------------------------------------------------------
# Configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeemanConfig:
    """Static magnetic configuration.

    g_e:     electron g-factor (ground-state splitting)
    g_h:     hole g-factor, geometry-resolved perpendicular value; may be 0
    b_tesla: magnetic field
    e0_ev:   zero-field optical transition energy
    """

    g_e: float = 1.90
    g_h: float = 0.07
    b_tesla: float = 7.0
    e0_ev: float = 3.3567

    def __post_init__(self):
        if not (math.isfinite(self.g_e) and math.isfinite(self.g_h)):
            raise ConfigError("g-factors must be finite")
        if not self.b_tesla >= 0:
            raise ConfigError("b_tesla must be >= 0")
        if not self.e0_ev > 0:
            raise ConfigError("e0_ev must be > 0")


@dataclass(frozen=True)
class HyperfineConfig:
    """Static electron-nuclear hyperfine manifold.

    The nucleus is frozen per trajectory; each projection m_I shifts the
    ground-state splitting by m_I * spacing, producing 2I+1 lines with
    adjacent spacing `spacing_mhz`.

    nuclear_spin: I, half-integer (default 9/2, ten projections)
    spacing_mhz:  adjacent-line spacing of the two-photon resonance
    weights:      relative weight per projection, uniform when omitted
    """

    nuclear_spin: float = 4.5
    spacing_mhz: float = 100.0
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        n = 2 * self.nuclear_spin + 1
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ConfigError("2I+1 must be a positive integer")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if len(w) != self.n_lines:
                raise ConfigError("weights must have 2I+1 entries")
            if np.any(w < 0):
                raise ConfigError("weights must be >= 0")
            if abs(w.sum() - 1.0) > 1e-9:
                raise ConfigError("weights must sum to 1")

    @property
    def n_lines(self) -> int:
        return int(round(2 * self.nuclear_spin + 1))

    def shifts_ghz(self) -> np.ndarray:
        """Ground-splitting shifts m_I * A for m_I = -I ... +I, in GHz."""
        m = np.arange(self.n_lines) - self.nuclear_spin
        return m * self.spacing_mhz * 1e-3

    def line_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.n_lines, 1.0 / self.n_lines)
        return np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class RelaxationConfig:
    """Incoherent rates, ordinary frequencies in GHz.

    gamma_x_ghz:         total exciton decay rate; equals the radiative
                         Lorentzian FWHM it contributes on a GHz axis
    branch_up:           fraction of exciton decay landing in |up>
    gamma_spin_ghz:      ground-state spin flip rate, applied in both
                         directions (no detailed balance)
    gamma_deph_opt_ghz:  extra optical pure dephasing; adds
                         2*gamma_deph_opt to the optical FWHM
    gamma_deph_spin_ghz: ground-state spin pure dephasing; adds
                         2*gamma_deph_spin to the two-photon FWHM
    """

    gamma_x_ghz: float = 0.7
    branch_up: float = 0.5
    gamma_spin_ghz: float = 1e-5
    gamma_deph_opt_ghz: float = 0.0
    gamma_deph_spin_ghz: float = 0.0

    def __post_init__(self):
        for name in ("gamma_x_ghz", "gamma_spin_ghz", "gamma_deph_opt_ghz",
                     "gamma_deph_spin_ghz"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.branch_up <= 1.0:
            raise ConfigError("branch_up must be in [0, 1]")


@dataclass(frozen=True)
class DriveField:
    """One continuous-wave laser.

    Exactly one of `energy_ev` (absolute photon energy) or `detuning_ghz`
    (offset from the `target` transition of the scheme it is resolved
    against) must be given.
    """

    role: str
    target: str
    rabi_ghz: float
    detuning_ghz: float | None = None
    energy_ev: float | None = None

    def __post_init__(self):
        if self.role not in ("pump", "probe"):
            raise ConfigError(f"role must be 'pump' or 'probe', got {self.role!r}")
        if self.rabi_ghz < 0:
            raise ConfigError("rabi_ghz must be >= 0")
        if (self.energy_ev is None) == (self.detuning_ghz is None):
            raise ConfigError("specify exactly one of energy_ev, detuning_ghz")

    def photon_energy_ev(self, scheme: "LevelScheme") -> float:
        if self.energy_ev is not None:
            return self.energy_ev
        return scheme.transition_energy(self.target) + self.detuning_ghz / EV_TO_GHZ

    def resolved(self, scheme: "LevelScheme") -> "DriveField":
        """Pin the drive to an absolute photon energy using `scheme`."""
        return replace(self, energy_ev=self.photon_energy_ev(scheme),
                       detuning_ghz=None)


SHIFT_MODES = ("excited-only", "ground-only", "common")


@dataclass(frozen=True)
class InhomogeneityConfig:
    """Quasi-static Gaussian spread of transition energies.

    sigma_opt_ghz: standard deviation of the random shift s
    shift_mode:    'excited-only' moves both exciton levels by s (every
                   optical line shifts by s, two-photon resonance fixed);
                   'ground-only' moves the ground splitting by s (optical
                   lines shift by -/+ s/2, two-photon resonance by s);
                   'common' applies the same draw to both channels
    n_samples:     Gauss-Hermite node count (<= 64) or Monte Carlo draws
    seed:          RNG seed for the Monte Carlo path
    """

    sigma_opt_ghz: float = 0.0
    shift_mode: str = "excited-only"
    n_samples: int = 21
    seed: int = 0

    def __post_init__(self):
        if self.sigma_opt_ghz < 0:
            raise ConfigError("sigma_opt_ghz must be >= 0")
        if self.shift_mode not in SHIFT_MODES:
            raise ConfigError(f"shift_mode must be one of {SHIFT_MODES}")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")


# ---------------------------------------------------------------------------
# Level scheme
# ---------------------------------------------------------------------------

GROUND_LABELS = ("up", "down")
EXCITED_LABELS = ("Xup", "Xdown")

# Polarization convention: the outer transition pair (down-Xup, up-Xdown) is
# V, the inner pair is H.  The data fix only that the pairs are orthogonal;
# which pair is which is a documented convention.
_POLARIZATION = {
    ("up", "Xup"): "H",
    ("down", "Xdown"): "H",
    ("up", "Xdown"): "V",
    ("down", "Xup"): "V",
}


@dataclass(frozen=True)
class Level:
    label: str
    energy_ev: float


@dataclass(frozen=True)
class Transition:
    ground: str
    excited: str
    energy_ev: float
    polarization: str

    @property
    def label(self) -> str:
        return f"{self.ground}-{self.excited}"


@dataclass(frozen=True)
class LevelScheme:
    """Four levels and four optical transitions.

    Sign convention: |up> sits +delta_g/2 above the ground centroid and
    |Xup> sits +delta_h/2 above the excited centroid, with
    delta_g = g_e*mu_B*B and delta_h = g_h*mu_B*B.
    """

    levels: tuple[Level, ...]
    transitions: tuple[Transition, ...]

    def energy(self, label: str) -> float:
        for lv in self.levels:
            if lv.label == label:
                return lv.energy_ev
        raise KeyError(f"unknown level {label!r}")

    def transition(self, label: str) -> Transition:
        for tr in self.transitions:
            if tr.label == label:
                return tr
        raise KeyError(f"unknown transition {label!r}")

    def transition_energy(self, label: str) -> float:
        return self.transition(label).energy_ev

    @property
    def ground_splitting_ev(self) -> float:
        return self.energy("up") - self.energy("down")

    @property
    def excited_splitting_ev(self) -> float:
        return self.energy("Xup") - self.energy("Xdown")


def ground_splitting(z: ZeemanConfig) -> EnergySplitting:
    """Electron Zeeman splitting g_e * mu_B * B of the ground doublet."""
    return EnergySplitting(z.g_e * CONSTANTS.mu_b_uev_per_t * z.b_tesla)


def excited_splitting(z: ZeemanConfig) -> EnergySplitting:
    """Hole Zeeman splitting g_h * mu_B * B of the exciton doublet."""
    return EnergySplitting(z.g_h * CONSTANTS.mu_b_uev_per_t * z.b_tesla)


def build_level_scheme(z: ZeemanConfig) -> LevelScheme:
    """Assemble the four-level scheme and its transition table."""
    dg = ground_splitting(z).ev
    dh = excited_splitting(z).ev
    energies = {
        "up": +dg / 2.0,
        "down": -dg / 2.0,
        "Xup": z.e0_ev + dh / 2.0,
        "Xdown": z.e0_ev - dh / 2.0,
    }
    levels = tuple(Level(lab, energies[lab]) for lab in GROUND_LABELS + EXCITED_LABELS)
    transitions = tuple(
        Transition(g, x, energies[x] - energies[g], _POLARIZATION[(g, x)])
        for g in GROUND_LABELS for x in EXCITED_LABELS
    )
    return LevelScheme(levels, transitions)


def apply_energy_shift(scheme: LevelScheme, shift_ghz: float,
                       mode: str = "excited-only") -> LevelScheme:
    """Return a copy of `scheme` with one quasi-static energy shift applied.

    See InhomogeneityConfig for the meaning of the modes.
    """
    if mode not in SHIFT_MODES:
        raise ConfigError(f"shift_mode must be one of {SHIFT_MODES}")
    s_ev = shift_ghz / EV_TO_GHZ
    delta = {lab: 0.0 for lab in GROUND_LABELS + EXCITED_LABELS}
    if mode in ("excited-only", "common"):
        delta["Xup"] += s_ev
        delta["Xdown"] += s_ev
    if mode in ("ground-only", "common"):
        delta["up"] += s_ev / 2.0
        delta["down"] -= s_ev / 2.0
    energies = {lv.label: lv.energy_ev + delta[lv.label] for lv in scheme.levels}
    levels = tuple(Level(lab, energies[lab]) for lab in GROUND_LABELS + EXCITED_LABELS)
    transitions = tuple(
        Transition(tr.ground, tr.excited,
                   energies[tr.excited] - energies[tr.ground], tr.polarization)
        for tr in scheme.transitions
    )
    return LevelScheme(levels, transitions)


# ---------------------------------------------------------------------------
# Liouvillian assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LiouvillianModel:
    """Lindblad generator L acting on row-major vectorized density matrices,
    drho/dt = L @ vec(rho), in 1/ns."""

    dim: int
    labels: tuple[str, ...]
    matrix: np.ndarray
    gamma_x_ghz: float

    @property
    def excited_indices(self) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab.startswith("X"))


def _lindblad_superoperator(h_ghz: np.ndarray, collapse: list[np.ndarray]) -> np.ndarray:
    """Assemble L from a Hamiltonian (GHz units, made angular here) and
    collapse operators already scaled to 1/sqrt(ns) amplitudes."""
    d = h_ghz.shape[0]
    eye = np.eye(d)
    ha = 2.0 * math.pi * h_ghz.astype(complex)
    lmat = -1j * (np.kron(ha, eye) - np.kron(eye, ha.T))
    for c in collapse:
        cdc = c.conj().T @ c
        lmat += (np.kron(c, c.conj())
                 - 0.5 * np.kron(cdc, eye)
                 - 0.5 * np.kron(eye, cdc.T))
    return lmat


def _collapse_operators(labels: tuple[str, ...], relax: RelaxationConfig) -> list[np.ndarray]:
    d = len(labels)
    idx = {lab: i for i, lab in enumerate(labels)}
    two_pi = 2.0 * math.pi

    def op(i, j, rate_ghz):
        c = np.zeros((d, d))
        c[i, j] = math.sqrt(two_pi * rate_ghz)
        return c

    ops = []
    excited = [lab for lab in labels if lab.startswith("X")]
    for xl in excited:
        if relax.gamma_x_ghz > 0:
            if relax.branch_up > 0:
                ops.append(op(idx["up"], idx[xl], relax.branch_up * relax.gamma_x_ghz))
            if relax.branch_up < 1:
                ops.append(op(idx["down"], idx[xl],
                              (1.0 - relax.branch_up) * relax.gamma_x_ghz))
        if relax.gamma_deph_opt_ghz > 0:
            # projector dephasing: adds gamma_deph_opt (angular 2*pi*GHz) to
            # the optical coherence decay, i.e. 2*gamma_deph_opt of FWHM
            ops.append(op(idx[xl], idx[xl], 2.0 * relax.gamma_deph_opt_ghz))
    if relax.gamma_spin_ghz > 0:
        ops.append(op(idx["up"], idx["down"], relax.gamma_spin_ghz))
        ops.append(op(idx["down"], idx["up"], relax.gamma_spin_ghz))
    if relax.gamma_deph_spin_ghz > 0:
        # sigma_z-type dephasing of the ground doublet
        c = np.zeros((d, d))
        a = math.sqrt(two_pi * relax.gamma_deph_spin_ghz / 2.0)
        c[idx["up"], idx["up"]] = a
        c[idx["down"], idx["down"]] = -a
        ops.append(c)
    return ops


def _model_labels(drives: list[DriveField], scheme: LevelScheme, dim: int) -> tuple[str, ...]:
    if dim == 4:
        return GROUND_LABELS + EXCITED_LABELS
    # reduced Lambda model: keep the excited level shared through the probe
    # (or the single/first drive); the other exciton level is dropped
    excited = "Xdown"
    if drives:
        ordered = sorted(drives, key=lambda dr: dr.role != "probe")
        excited = scheme.transition(ordered[0].target).excited
    return GROUND_LABELS + (excited,)


def _hamiltonian_and_scan(scheme: LevelScheme, drives: list[DriveField],
                          hf_shift_ghz: float, labels: tuple[str, ...],
                          scan_role: str | None) -> tuple[np.ndarray, np.ndarray]:
    """Rotating-frame Hamiltonian (GHz) plus its derivative with respect to
    an extra detuning of the drive with role `scan_role`."""
    d = len(labels)
    idx = {lab: i for i, lab in enumerate(labels)}
    eps = {lab: scheme.energy(lab) * EV_TO_GHZ for lab in labels}
    eps["up"] += hf_shift_ghz / 2.0
    eps["down"] -= hf_shift_ghz / 2.0
    excited = [lab for lab in labels if lab.startswith("X")]

    h = np.zeros((d, d))
    dh = np.zeros((d, d))

    if len(drives) == 0:
        # no rotating frame needed; reference the optical gap away
        gap = min(eps[x] for x in excited)
        for g in GROUND_LABELS:
            h[idx[g], idx[g]] = eps[g]
        for x in excited:
            h[idx[x], idx[x]] = eps[x] - gap
        return h, dh

    freqs = [dr.photon_energy_ev(scheme) * EV_TO_GHZ for dr in drives]

    if len(drives) == 1:
        # a lone laser addresses its polarization class: both transitions of
        # the target's polarization, so degenerate ground states at B = 0 are
        # driven through different exciton states and no dark state forms
        dr, nu = drives[0], freqs[0]
        pol = scheme.transition(dr.target).polarization
        for g in GROUND_LABELS:
            h[idx[g], idx[g]] = eps[g]
        for x in excited:
            h[idx[x], idx[x]] = eps[x] - nu
            for g in GROUND_LABELS:
                if scheme.transition(f"{g}-{x}").polarization == pol:
                    h[idx[x], idx[g]] = h[idx[g], idx[x]] = dr.rabi_ghz / 2.0
        if scan_role is not None and dr.role == scan_role:
            for x in excited:
                dh[idx[x], idx[x]] = -1.0
        return h, dh

    grounds = [scheme.transition(dr.target).ground for dr in drives]
    if grounds[0] == grounds[1]:
        raise ConfigError(
            "two drives on the same ground state give an ambiguous rotating frame")
    (dr_a, dr_b), (nu_a, nu_b), (g_a, g_b) = drives, freqs, grounds

    h[idx[g_a], idx[g_a]] = 0.0
    h[idx[g_b], idx[g_b]] = (eps[g_b] - eps[g_a]) + (nu_b - nu_a)
    for x in excited:
        h[idx[x], idx[x]] = eps[x] - eps[g_a] - nu_a
        h[idx[x], idx[g_a]] = h[idx[g_a], idx[x]] = dr_a.rabi_ghz / 2.0
        h[idx[x], idx[g_b]] = h[idx[g_b], idx[x]] = dr_b.rabi_ghz / 2.0

    if scan_role is not None:
        if dr_a.role == scan_role:
            dh[idx[g_b], idx[g_b]] = -1.0
            for x in excited:
                dh[idx[x], idx[x]] = -1.0
        elif dr_b.role == scan_role:
            dh[idx[g_b], idx[g_b]] = +1.0
    return h, dh


def build_liouvillian(scheme: LevelScheme, drives: list[DriveField],
                      relax: RelaxationConfig, hf_shift_ghz: float = 0.0,
                      dim: int = 4) -> LiouvillianModel:
    """Assemble the rotating-frame Lindblad generator.

    dim=4 keeps the full scheme; dim=3 reduces to the Lambda system through
    the excited level of the probe drive's target transition.  With two
    drives each laser couples only its target's ground state (they must
    differ); with a single drive both ground states are coupled, so
    zero-field excitation and cross repumping are captured.

    hf_shift_ghz adds to the ground splitting, modelling one frozen nuclear
    projection of the hyperfine manifold.
    """
    if dim not in (3, 4):
        raise ConfigError(f"model dimension must be 3 or 4, got {dim}")
    if len(drives) > 2:
        raise ConfigError("at most two drives are supported")
    labels = _model_labels(list(drives), scheme, dim)
    h, _ = _hamiltonian_and_scan(scheme, list(drives), hf_shift_ghz, labels, None)
    lmat = _lindblad_superoperator(h, _collapse_operators(labels, relax))
    return LiouvillianModel(dim, labels, lmat, relax.gamma_x_ghz)


def build_liouvillian_pencil(scheme: LevelScheme, drives: list[DriveField],
                             relax: RelaxationConfig, hf_shift_ghz: float = 0.0,
                             dim: int = 4, scan_role: str = "probe"
                             ) -> tuple[LiouvillianModel, np.ndarray]:
    """Like build_liouvillian, but also return dL/dx where x is an extra
    detuning (GHz) added to the drive with role `scan_role`, so that the
    generator at scan offset x is model.matrix + x * pencil.
    """
    if dim not in (3, 4):
        raise ConfigError(f"model dimension must be 3 or 4, got {dim}")
    labels = _model_labels(list(drives), scheme, dim)
    h, dh = _hamiltonian_and_scan(scheme, list(drives), hf_shift_ghz, labels, scan_role)
    lmat = _lindblad_superoperator(h, _collapse_operators(labels, relax))
    d = len(labels)
    eye = np.eye(d)
    dha = 2.0 * math.pi * dh.astype(complex)
    pencil = -1j * (np.kron(dha, eye) - np.kron(eye, dha.T))
    model = LiouvillianModel(dim, labels, lmat, relax.gamma_x_ghz)
    return model, pencil
