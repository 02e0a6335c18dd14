"""Independent oracles the tests check the library against.

Everything here deliberately avoids the library's own solver paths: the rate
equations are integrated with scipy, lineshape widths come from published
closed forms, and the hyperfine comb is summed analytically.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp

TWO_PI = 2.0 * math.pi


def excitation_rate(rabi_ghz: float, detuning_ghz: float, gamma_eff_ghz: float) -> float:
    """Low-saturation two-level excitation rate in 1/ns."""
    hw = gamma_eff_ghz / 2.0
    return TWO_PI * (rabi_ghz ** 2 / 4.0) * gamma_eff_ghz / (detuning_ghz ** 2 + hw * hw)


def rate_equation_populations(t_ns, rabi_probe, rabi_pump, det_probe, det_pump,
                              gamma_x_ghz, branch_up, gamma_spin_ghz,
                              gamma_deph_opt_ghz=0.0, n0=(0.5, 0.5, 0.0)):
    """Classical three-level rate equations (up, down, excited), no
    coherences; probe drives up<->X, pump drives down<->X."""
    gamma_eff = gamma_x_ghz + 2.0 * gamma_deph_opt_ghz
    r_probe = excitation_rate(rabi_probe, det_probe, gamma_eff)
    r_pump = excitation_rate(rabi_pump, det_pump, gamma_eff)
    gx = TWO_PI * gamma_x_ghz
    gs = TWO_PI * gamma_spin_ghz

    def rhs(_, n):
        up, down, exc = n
        d_up = -r_probe * (up - exc) + branch_up * gx * exc + gs * (down - up)
        d_down = -r_pump * (down - exc) + (1 - branch_up) * gx * exc + gs * (up - down)
        d_exc = r_probe * (up - exc) + r_pump * (down - exc) - gx * exc
        return [d_up, d_down, d_exc]

    sol = solve_ivp(rhs, (0.0, float(np.max(t_ns))), list(n0), t_eval=np.atleast_1d(t_ns),
                    rtol=1e-10, atol=1e-12, method="LSODA")
    return sol.y.T


def hyperfine_comb_depth(x_ghz, line_fwhm_ghz: float, spacing_ghz: float = 0.1,
                         n_lines: int = 10):
    """Depth profile of n equally weighted Lorentzian dips."""
    m = np.arange(n_lines) - (n_lines - 1) / 2.0
    centers = m * spacing_ghz
    hw = line_fwhm_ghz / 2.0
    x = np.atleast_1d(np.asarray(x_ghz, dtype=float))
    return np.sum(hw * hw / ((x[:, None] - centers[None, :]) ** 2 + hw * hw),
                  axis=1) / n_lines


def cpt_line_fwhm(rabi_pump, rabi_probe, gamma_spin_ghz, gamma_deph_spin_ghz,
                  gamma_x_ghz, gamma_deph_opt_ghz) -> float:
    """Single dark-resonance width: ground decoherence plus power broadening."""
    gamma12 = gamma_spin_ghz + gamma_deph_spin_ghz
    gamma_eff = gamma_x_ghz + 2.0 * gamma_deph_opt_ghz
    return 2.0 * gamma12 + (rabi_pump ** 2 + rabi_probe ** 2) / gamma_eff


def olivero_longbothum_fwhm(sigma: float, gamma: float) -> float:
    """Published Voigt-width approximation (accurate to ~0.02%)."""
    f_l = 2.0 * gamma
    f_g = 2.0 * math.sqrt(2.0 * math.log(2.0)) * sigma
    return 0.5346 * f_l + math.sqrt(0.2166 * f_l * f_l + f_g * f_g)


def gaussian_height_form(x, sigma):
    return np.exp(-np.asarray(x, dtype=float) ** 2 / (2.0 * sigma * sigma))


def lorentzian_height_form(x, gamma):
    x = np.asarray(x, dtype=float)
    return gamma * gamma / (x * x + gamma * gamma)
