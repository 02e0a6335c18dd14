import math

import numpy as np
import pytest

import donorspin as ds
from donorspin.spinmodel import ConfigError


def test_ground_splitting_reference_value():
    s = ds.ground_splitting(ds.ZeemanConfig(g_e=1.90, b_tesla=7.0))
    assert abs(s.mev - 0.7698) <= 1e-4
    assert abs(s.mev - 0.770) <= 1e-3
    assert s.ghz == pytest.approx(s.uev * 0.2417990)


def test_ground_splitting_zero_field_and_arithmetic():
    assert ds.ground_splitting(ds.ZeemanConfig(g_e=1.90, b_tesla=0.0)).mev == 0.0
    s = ds.ground_splitting(ds.ZeemanConfig(g_e=1.97, b_tesla=7.0))
    assert s.mev == pytest.approx(1.97 * 57.8838 * 7.0 * 1e-3, rel=1e-12)
    assert abs(s.mev - 0.798) < 1e-3


def test_excited_splitting_values():
    assert ds.excited_splitting(ds.ZeemanConfig(g_h=0.05, b_tesla=7.0)).uev == \
        pytest.approx(20.3, abs=0.05)
    assert ds.excited_splitting(ds.ZeemanConfig(g_h=0.07, b_tesla=7.0)).uev == \
        pytest.approx(28.4, abs=0.05)
    assert ds.excited_splitting(ds.ZeemanConfig(g_h=0.05, b_tesla=0.0)).uev == 0.0


def test_splittings_linear_in_field_and_g():
    base = ds.ground_splitting(ds.ZeemanConfig(g_e=1.3, b_tesla=2.0)).uev
    assert ds.ground_splitting(ds.ZeemanConfig(g_e=1.3, b_tesla=6.0)).uev == \
        pytest.approx(3.0 * base, rel=1e-12)
    assert ds.ground_splitting(ds.ZeemanConfig(g_e=2.6, b_tesla=2.0)).uev == \
        pytest.approx(2.0 * base, rel=1e-12)


def test_level_scheme_zero_field_degenerate():
    scheme = ds.build_level_scheme(ds.ZeemanConfig(b_tesla=0.0))
    energies = {tr.energy_ev for tr in scheme.transitions}
    assert energies == {3.3567}


def test_level_scheme_splittings_exact():
    z = ds.ZeemanConfig(g_e=1.90, g_h=0.07, b_tesla=7.0)
    scheme = ds.build_level_scheme(z)
    assert scheme.ground_splitting_ev == ds.ground_splitting(z).ev
    # the exciton levels sit on top of e0, so the difference re-forms the
    # splitting only to within rounding of the large offset
    assert scheme.excited_splitting_ev == pytest.approx(
        ds.excited_splitting(z).ev, rel=1e-9)
    # outermost pair separation = (g_e + g_h) mu_B B
    energies = sorted(tr.energy_ev for tr in scheme.transitions)
    outer = energies[-1] - energies[0]
    assert outer == pytest.approx(1.97 * 57.8838 * 7.0 * 1e-6, rel=1e-9)
    assert abs(outer * 1e3 - 0.798) < 1e-3


def test_level_scheme_degenerate_excited_doublet():
    scheme = ds.build_level_scheme(ds.ZeemanConfig(g_e=1.90, g_h=0.0, b_tesla=7.0))
    energies = sorted({round(tr.energy_ev, 15) for tr in scheme.transitions})
    assert len(energies) == 2
    assert (energies[1] - energies[0]) * 1e3 == pytest.approx(0.770, abs=1e-3)


def test_transition_table_antisymmetric_under_field_reversal():
    # B -> -B is equivalent to negating both g-factors
    z = ds.ZeemanConfig(g_e=1.90, g_h=0.07, b_tesla=7.0)
    z_rev = ds.ZeemanConfig(g_e=-1.90, g_h=-0.07, b_tesla=7.0)
    relabel = {"up": "down", "down": "up", "Xup": "Xdown", "Xdown": "Xup"}
    fwd = ds.build_level_scheme(z)
    rev = ds.build_level_scheme(z_rev)
    for tr in fwd.transitions:
        partner = rev.transition(f"{relabel[tr.ground]}-{relabel[tr.excited]}")
        assert partner.energy_ev == pytest.approx(tr.energy_ev, abs=1e-18)
        assert partner.polarization == tr.polarization


def test_polarization_assignment_is_paired():
    scheme = ds.build_level_scheme(ds.ZeemanConfig())
    by_pol = {"H": [], "V": []}
    for tr in scheme.transitions:
        by_pol[tr.polarization].append(tr.label)
    assert len(by_pol["H"]) == 2 and len(by_pol["V"]) == 2
    # each ground state and each exciton state carries one of each
    for lab in ("up", "down"):
        pols = {tr.polarization for tr in scheme.transitions if tr.ground == lab}
        assert pols == {"H", "V"}


def test_config_validation():
    with pytest.raises(ConfigError):
        ds.ZeemanConfig(b_tesla=-1.0)
    with pytest.raises(ConfigError):
        ds.ZeemanConfig(e0_ev=0.0)
    with pytest.raises(ConfigError):
        ds.RelaxationConfig(branch_up=1.5)
    with pytest.raises(ConfigError):
        ds.RelaxationConfig(gamma_x_ghz=-0.1)
    with pytest.raises(ConfigError):
        ds.HyperfineConfig(nuclear_spin=0.3)
    with pytest.raises(ConfigError):
        ds.HyperfineConfig(weights=(0.5, 0.5))
    with pytest.raises(ConfigError):
        ds.DriveField(role="pump", target="down-Xdown", rabi_ghz=-1.0,
                      detuning_ghz=0.0)
    with pytest.raises(ConfigError):
        ds.DriveField(role="pump", target="down-Xdown", rabi_ghz=1.0)
    with pytest.raises(ConfigError):
        ds.InhomogeneityConfig(shift_mode="sideways")


def test_hyperfine_shifts_span():
    hf = ds.HyperfineConfig()
    shifts = hf.shifts_ghz()
    assert len(shifts) == 10
    assert shifts.max() - shifts.min() == pytest.approx(0.9, rel=1e-12)
    assert np.allclose(np.diff(shifts), 0.1)
    assert hf.line_weights().sum() == pytest.approx(1.0)


def test_rabi_from_power():
    assert ds.rabi_from_power(4.0, 0.25) == pytest.approx(1.0)
    assert ds.rabi_from_power(0.0, 0.25) == 0.0


def _lambda_model(**relax_kwargs):
    scheme = ds.build_level_scheme(ds.ZeemanConfig())
    pump = ds.DriveField(role="pump", target="down-Xdown", rabi_ghz=0.5,
                         detuning_ghz=0.2)
    probe = ds.DriveField(role="probe", target="up-Xdown", rabi_ghz=0.3,
                          detuning_ghz=-0.4)
    relax = ds.RelaxationConfig(**relax_kwargs)
    return ds.build_liouvillian(scheme, [pump, probe], relax, dim=3)


def test_liouvillian_dimensions():
    model = _lambda_model()
    assert model.matrix.shape == (9, 9)
    assert model.labels == ("up", "down", "Xdown")
    scheme = ds.build_level_scheme(ds.ZeemanConfig())
    full = ds.build_liouvillian(scheme, [], ds.RelaxationConfig(), dim=4)
    assert full.matrix.shape == (16, 16)
    with pytest.raises(ConfigError):
        ds.build_liouvillian(scheme, [], ds.RelaxationConfig(), dim=5)


def test_liouvillian_trace_annihilating_and_hermiticity():
    model = _lambda_model(gamma_deph_opt_ghz=1.3, gamma_deph_spin_ghz=0.2)
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        rho = a + a.conj().T
        rho /= np.linalg.norm(rho)
        drho = (model.matrix @ rho.reshape(-1)).reshape(3, 3)
        assert abs(np.trace(drho)) < 1e-12
        assert np.max(np.abs(drho - drho.conj().T)) < 1e-12


def test_zero_drive_zero_rates_is_pure_detuning():
    scheme = ds.build_level_scheme(ds.ZeemanConfig())
    relax = ds.RelaxationConfig(gamma_x_ghz=0.0, gamma_spin_ghz=0.0)
    model = ds.build_liouvillian(scheme, [], relax, dim=3)
    # populations of any diagonal state stay frozen
    rho = np.diag([0.3, 0.2, 0.5]).astype(complex)
    drho = (model.matrix @ rho.reshape(-1)).reshape(3, 3)
    assert np.max(np.abs(np.diag(drho))) == 0.0


def test_two_drives_same_ground_rejected():
    scheme = ds.build_level_scheme(ds.ZeemanConfig())
    d1 = ds.DriveField(role="pump", target="up-Xdown", rabi_ghz=0.5, detuning_ghz=0.0)
    d2 = ds.DriveField(role="probe", target="up-Xup", rabi_ghz=0.5, detuning_ghz=0.0)
    with pytest.raises(ConfigError):
        ds.build_liouvillian(scheme, [d1, d2], ds.RelaxationConfig(), dim=4)


def test_hyperfine_shift_moves_two_photon_condition():
    # the ground-splitting shift appears in the two-photon (frame) term
    scheme = ds.build_level_scheme(ds.ZeemanConfig())
    pump = ds.DriveField(role="pump", target="down-Xdown", rabi_ghz=0.5,
                         detuning_ghz=0.0)
    probe = ds.DriveField(role="probe", target="up-Xdown", rabi_ghz=0.3,
                          detuning_ghz=0.0)
    base = ds.build_liouvillian(scheme, [pump, probe], ds.RelaxationConfig(),
                                hf_shift_ghz=0.0, dim=3)
    shifted = ds.build_liouvillian(scheme, [pump, probe], ds.RelaxationConfig(),
                                   hf_shift_ghz=0.45, dim=3)
    diff = shifted.matrix - base.matrix
    # only the |down> frame energy changes: a purely imaginary diagonal
    nz = np.nonzero(np.abs(diff) > 1e-12)
    assert len(nz[0]) > 0
    assert np.max(np.abs(diff.real)) < 1e-12


def test_energy_shift_modes():
    scheme = ds.build_level_scheme(ds.ZeemanConfig())
    exc = ds.apply_energy_shift(scheme, 10.0, "excited-only")
    assert exc.ground_splitting_ev == scheme.ground_splitting_ev
    for tr in exc.transitions:
        delta = tr.energy_ev - scheme.transition(tr.label).energy_ev
        assert delta == pytest.approx(10.0 / ds.EV_TO_GHZ, rel=1e-9)
    grd = ds.apply_energy_shift(scheme, 10.0, "ground-only")
    assert (grd.ground_splitting_ev - scheme.ground_splitting_ev) == \
        pytest.approx(10.0 / ds.EV_TO_GHZ, rel=1e-9)
    assert grd.excited_splitting_ev == scheme.excited_splitting_ev
