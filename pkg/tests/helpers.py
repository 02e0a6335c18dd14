"""Shared builders for the test suite: frozen scan configurations."""
from __future__ import annotations

import numpy as np

import donorspin as ds


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def cpt_plan(rabi_pump: float, rabi_probe: float = 0.3,
             gamma_deph_opt: float = 5.0, gamma_deph_spin: float = 0.10,
             gamma_spin: float = 1e-5, sigma: float = 0.0, n_samples: int = 21,
             nuclear_spin: float = 4.5, axis=None, dim: int = 3,
             seed: int = 0) -> ds.ScanPlan:
    relax = ds.RelaxationConfig(gamma_x_ghz=0.7, gamma_spin_ghz=gamma_spin,
                                gamma_deph_opt_ghz=gamma_deph_opt,
                                gamma_deph_spin_ghz=gamma_deph_spin)
    pump = ds.DriveField(role="pump", target="down-Xdown",
                         rabi_ghz=rabi_pump, detuning_ghz=0.0)
    probe = ds.DriveField(role="probe", target="up-Xdown",
                          rabi_ghz=rabi_probe, detuning_ghz=0.0)
    ensemble = ds.EnsembleSpec(
        hyperfine=ds.HyperfineConfig(nuclear_spin=nuclear_spin),
        inhomogeneity=ds.InhomogeneityConfig(sigma_opt_ghz=sigma,
                                             n_samples=n_samples, seed=seed))
    if axis is None:
        axis = ds.composite_axis(60, 1.0, 10, 0.05)
    return ds.ScanPlan(zeeman=ds.ZeemanConfig(), relaxation=relax,
                       drives=(pump, probe), ensemble=ensemble,
                       axis_ghz=axis, model_dim=dim)


# Frozen acceptance configurations ------------------------------------------

#: pump Rabi tuned so the fitted dip is 2 GHz wide
CPT_2GHZ_RABI = 3.9
#: low-power floor scan (criterion on the hyperfine-limited dip width)
CPT_FLOOR_RABI = 0.45
#: pump Rabi ladder spanning a factor of ten
CPT_LADDER_RABIS = (0.45, 0.8, 1.4, 2.5, 4.5)


def cpt_2ghz_plan() -> ds.ScanPlan:
    return cpt_plan(CPT_2GHZ_RABI)


def cpt_floor_plan() -> ds.ScanPlan:
    return cpt_plan(CPT_FLOOR_RABI)


def slope_plan(delta_ghz: float) -> ds.ScanPlan:
    """One-to-one shift configuration: single two-photon line (no hyperfine),
    strongly dephased optical transition so the recovered peak spans the
    whole pump excursion."""
    axis = ds.composite_axis(150, 3.0, 6, 0.05, center_ghz=delta_ghz)
    return cpt_plan(2.5, rabi_probe=0.35, gamma_deph_opt=30.0,
                    gamma_deph_spin=0.02, nuclear_spin=0.0, axis=axis)


def discriminator_plan(sigma: float) -> ds.ScanPlan:
    axis = ds.composite_axis(150, 2.0, 8, 0.05)
    return cpt_plan(1.5, rabi_probe=0.3, gamma_deph_opt=8.0,
                    gamma_deph_spin=0.05, sigma=sigma, n_samples=64, axis=axis)


def pumping_plan(rabi: float = 0.4) -> tuple[ds.ScanPlan, ds.ScanPlan, ds.ScanPlan]:
    """Two-laser plan plus the two single-laser plans at matched settings."""
    z = ds.ZeemanConfig()
    relax = ds.RelaxationConfig()
    ens = ds.EnsembleSpec()
    pump = ds.DriveField(role="pump", target="down-Xdown", rabi_ghz=rabi,
                         detuning_ghz=0.0)
    probe = ds.DriveField(role="probe", target="up-Xdown", rabi_ghz=rabi,
                          detuning_ghz=0.0)
    pump_scanned = ds.DriveField(role="probe", target="down-Xdown",
                                 rabi_ghz=rabi, detuning_ghz=0.0)
    kw = dict(zeeman=z, relaxation=relax, ensemble=ens,
              start_ghz=-60.0, stop_ghz=60.0, step_ghz=1.0, model_dim=4)
    return (ds.ScanPlan(drives=(pump, probe), **kw),
            ds.ScanPlan(drives=(probe,), **kw),
            ds.ScanPlan(drives=(pump_scanned,), **kw))
