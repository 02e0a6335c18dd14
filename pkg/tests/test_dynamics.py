import numpy as np
import pytest

import donorspin as ds
from donorspin.dynamics import (DegenerateSteadyStateError, DensityMatrix,
                                EnsembleKernelError, StiffIntegrationError,
                                evolve, evolve_path, steady_state,
                                steady_state_batch)
from donorspin.spinmodel import build_liouvillian_pencil

from helpers import trace_distance
from oracles import rate_equation_populations


def _scheme():
    return ds.build_level_scheme(ds.ZeemanConfig())


def _lambda_model(rabi_pump=0.4, rabi_probe=0.3, det_pump=0.0, det_probe=0.0,
                  **relax_kwargs):
    pump = ds.DriveField(role="pump", target="down-Xdown", rabi_ghz=rabi_pump,
                         detuning_ghz=det_pump)
    probe = ds.DriveField(role="probe", target="up-Xdown", rabi_ghz=rabi_probe,
                          detuning_ghz=det_probe)
    return ds.build_liouvillian(_scheme(), [pump, probe],
                                ds.RelaxationConfig(**relax_kwargs), dim=3)


def test_evolve_zero_time_identity():
    model = _lambda_model()
    rho0 = DensityMatrix.thermal_ground(3)
    assert evolve(model, rho0, 0.0) is rho0


def test_no_drive_relaxes_to_even_mixture():
    model = ds.build_liouvillian(_scheme(), [],
                                 ds.RelaxationConfig(gamma_spin_ghz=0.05), dim=3)
    rho = evolve(model, DensityMatrix.pure([1.0, 0.0, 0.0]), 400.0)
    assert rho.populations()[:2] == pytest.approx([0.5, 0.5], abs=1e-6)


def test_optical_pumping_against_rate_equations():
    # strong hierarchy Gamma_X >> rabi >> gamma_spin: population piles into
    # the undriven ground state
    probe = ds.DriveField(role="probe", target="up-Xdown", rabi_ghz=0.2,
                          detuning_ghz=0.0)
    model = ds.build_liouvillian(_scheme(), [probe], ds.RelaxationConfig(), dim=3)
    rho = evolve(model, DensityMatrix.thermal_ground(3), 300.0)
    assert rho.populations()[1] > 0.99
    oracle = rate_equation_populations(
        300.0, rabi_probe=0.2, rabi_pump=0.0, det_probe=0.0, det_pump=0.0,
        gamma_x_ghz=0.7, branch_up=0.5, gamma_spin_ghz=1e-5)
    assert oracle[-1][1] > 0.99


def test_evolve_semigroup_property():
    model = _lambda_model(det_probe=0.3, gamma_spin_ghz=0.02)
    rho0 = DensityMatrix.thermal_ground(3)
    one_shot = evolve(model, rho0, 12.2)
    two_step = evolve(model, evolve(model, rho0, 7.3), 4.9)
    assert trace_distance(one_shot.matrix, two_step.matrix) < 1e-7


def test_evolve_path_monotone_grid_required():
    model = _lambda_model()
    with pytest.raises(Exception):
        evolve_path(model, DensityMatrix.thermal_ground(3), np.array([1.0, 1.0]))


def test_steady_state_symmetric_relaxation():
    model = ds.build_liouvillian(_scheme(), [],
                                 ds.RelaxationConfig(gamma_spin_ghz=0.01), dim=3)
    rho = steady_state(model)
    assert np.allclose(rho.populations(), [0.5, 0.5, 0.0], atol=1e-12)


def test_steady_state_agrees_with_long_time_evolution():
    model = _lambda_model(det_pump=0.3, det_probe=-0.2, gamma_spin_ghz=0.05)
    target = steady_state(model)
    evolved = evolve(model, DensityMatrix.thermal_ground(3), 50.0 / 0.05)
    assert trace_distance(evolved.matrix, target.matrix) < 1e-6


def test_steady_state_invariant_under_evolve():
    model = _lambda_model(gamma_spin_ghz=0.05, det_probe=0.4)
    rho_ss = steady_state(model)
    for t in (3.0, 31.0):
        assert trace_distance(evolve(model, rho_ss, t).matrix, rho_ss.matrix) < 1e-8


def test_perfect_dark_state():
    model = _lambda_model(rabi_pump=0.4, rabi_probe=0.4, gamma_spin_ghz=0.0)
    rho = steady_state(model)
    assert rho.excited_population(model) < 1e-8


def test_degenerate_steady_state_rejected():
    model = ds.build_liouvillian(
        _scheme(), [], ds.RelaxationConfig(gamma_x_ghz=0.0, gamma_spin_ghz=0.0),
        dim=3)
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(model)


def test_batch_matches_scalar_steady_state():
    scheme = _scheme()
    pump = ds.DriveField(role="pump", target="down-Xdown", rabi_ghz=0.5,
                         detuning_ghz=0.0)
    probe = ds.DriveField(role="probe", target="up-Xdown", rabi_ghz=0.3,
                          detuning_ghz=0.0)
    relax = ds.RelaxationConfig()
    model, pencil = build_liouvillian_pencil(scheme, [pump.resolved(scheme),
                                                      probe.resolved(scheme)],
                                             relax, dim=3, scan_role="probe")
    offsets = np.array([-2.0, 0.0, 0.7, 3.1])
    batch = steady_state_batch(model.matrix, pencil, offsets)
    for x, rho in zip(offsets, batch):
        probe_x = ds.DriveField(role="probe", target="up-Xdown", rabi_ghz=0.3,
                                detuning_ghz=float(x))
        direct = steady_state(ds.build_liouvillian(scheme, [pump, probe_x],
                                                   relax, dim=3))
        assert trace_distance(rho, direct.matrix) < 1e-9


def test_stiff_configuration_aborts():
    pump = ds.DriveField(role="pump", target="down-Xdown", rabi_ghz=0.4,
                         detuning_ghz=1e5)
    probe = ds.DriveField(role="probe", target="up-Xdown", rabi_ghz=0.3,
                          detuning_ghz=0.0)
    model = ds.build_liouvillian(_scheme(), [pump, probe],
                                 ds.RelaxationConfig(gamma_spin_ghz=1e-9), dim=3)
    with pytest.raises(StiffIntegrationError, match="ratio"):
        evolve(model, DensityMatrix.thermal_ground(3), 1e9)


def test_density_matrix_validation():
    bad_trace = DensityMatrix(np.diag([0.6, 0.6, 0.0]).astype(complex))
    with pytest.raises(ValueError):
        bad_trace.validate()
    bad_herm = DensityMatrix(np.array([[0.5, 0.1], [0.3, 0.5]], dtype=complex))
    with pytest.raises(ValueError):
        bad_herm.validate()
    bad_pos = DensityMatrix(np.diag([1.2, -0.2]).astype(complex))
    with pytest.raises(ValueError):
        bad_pos.validate()


# --- ensemble averaging ------------------------------------------------------

def test_ensemble_degenerate_is_single_evaluation():
    spec = ds.EnsembleSpec(ds.HyperfineConfig(nuclear_spin=0.0),
                           ds.InhomogeneityConfig(sigma_opt_ghz=0.0))
    calls = []

    def kernel(hf, s):
        calls.append((hf, s))
        return np.array([1.0, 2.0])

    out = ds.ensemble_average(kernel, spec)
    assert calls == [(0.0, 0.0)]
    assert np.allclose(out, [1.0, 2.0])


def test_ensemble_linear_in_kernel_and_permutation_invariant():
    spec = ds.EnsembleSpec(ds.HyperfineConfig(),
                           ds.InhomogeneityConfig(sigma_opt_ghz=4.0, n_samples=9))

    def f(hf, s):
        return np.array([hf + 2 * s, hf * s])

    def g(hf, s):
        return np.array([np.sin(hf) + s, 1.0])

    lhs = ds.ensemble_average(lambda hf, s: 2.0 * f(hf, s) + 3.0 * g(hf, s), spec)
    rhs = 2.0 * ds.ensemble_average(f, spec) + 3.0 * ds.ensemble_average(g, spec)
    assert np.allclose(lhs, rhs, atol=1e-12)

    samples = spec.samples()
    manual = sum(w * f(hf, s) for hf, s, w in reversed(samples))
    assert np.allclose(manual, ds.ensemble_average(f, spec), atol=1e-9)


def test_quadrature_matches_monte_carlo_within_3_sigma():
    def kernel(_, s):
        return np.exp(-((s - 3.0) / 15.0) ** 2)

    hf = ds.HyperfineConfig(nuclear_spin=0.0)
    quad = ds.ensemble_average(
        kernel, ds.EnsembleSpec(hf, ds.InhomogeneityConfig(sigma_opt_ghz=8.0,
                                                           n_samples=21)))
    n_mc = 4000
    mc_spec = ds.EnsembleSpec(hf, ds.InhomogeneityConfig(sigma_opt_ghz=8.0,
                                                         n_samples=n_mc, seed=11))
    mc = ds.ensemble_average(kernel, mc_spec)
    draws = np.array([kernel(0.0, s) for _, s, _ in mc_spec.samples()])
    stat = draws.std() / np.sqrt(n_mc)
    assert abs(mc - quad) < 3.0 * stat


def test_monte_carlo_path_is_seed_deterministic():
    spec = lambda seed: ds.EnsembleSpec(  # noqa: E731
        ds.HyperfineConfig(nuclear_spin=0.0),
        ds.InhomogeneityConfig(sigma_opt_ghz=5.0, n_samples=200, seed=seed))
    kernel = lambda hf, s: s * s  # noqa: E731
    assert ds.ensemble_average(kernel, spec(5)) == ds.ensemble_average(kernel, spec(5))
    assert ds.ensemble_average(kernel, spec(5)) != ds.ensemble_average(kernel, spec(6))


def test_kernel_errors_are_tagged():
    spec = ds.EnsembleSpec(ds.HyperfineConfig(),
                           ds.InhomogeneityConfig(sigma_opt_ghz=0.0))

    def kernel(hf, s):
        if hf > 0.4:
            raise ValueError("boom")
        return 0.0

    with pytest.raises(EnsembleKernelError, match="hf_shift=0.45"):
        ds.ensemble_average(kernel, spec)


def test_excited_only_shift_leaves_two_photon_point_fixed_per_sample():
    # for every inhomogeneity sample the dark point stays at probe
    # detuning = pump detuning, while the one-photon line moves with the shift
    scheme = ds.build_level_scheme(ds.ZeemanConfig())
    relax = ds.RelaxationConfig(gamma_spin_ghz=0.0)
    pump = ds.DriveField(role="pump", target="down-Xdown", rabi_ghz=0.4,
                         detuning_ghz=0.0).resolved(scheme)
    probe = ds.DriveField(role="probe", target="up-Xdown", rabi_ghz=0.4,
                          detuning_ghz=0.0).resolved(scheme)
    for shift in (-25.0, 0.0, 13.0):
        shifted = ds.apply_energy_shift(scheme, shift, "excited-only")
        model = ds.build_liouvillian(shifted, [pump, probe], relax, dim=3)
        rho = steady_state(model)
        assert rho.excited_population(model) < 1e-8
