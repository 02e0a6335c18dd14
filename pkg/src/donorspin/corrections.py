"""Oscillatory excitation-background correction.

A wavelength-dependent beamsplitter in the excitation path makes the
delivered laser power oscillate with photon energy when the total power is
held constant.  The reflected/transmitted ratio is modelled as a fixed-period
sine; correcting a spectrum multiplies the counts by
(1 + 1/f(E)) * mean_reflectance, which is flat when the model is exact.

Energies inside the sine are measured from `e_ref_ev` so that only the phase
absorbs the choice of origin; phase estimation pins `e_ref_ev` to the start
of the spectrum it was estimated from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .spinmodel import ConfigError
from .spectroscopy import Spectrum


@dataclass(frozen=True)
class BeamsplitterModel:
    """Reflected-over-transmitted power ratio
    f(E) = offset + amplitude * sin(2*pi*(E - e_ref)/period + phase)."""

    offset: float = 0.58
    amplitude: float = 0.07
    period_mev: float = 0.18
    phase_rad: float = 0.0
    mean_reflectance: float = 0.36
    e_ref_ev: float = 0.0

    def __post_init__(self):
        if not self.offset > self.amplitude >= 0.0:
            raise ConfigError("need offset > amplitude >= 0 (ratio stays positive)")
        if not self.period_mev > 0:
            raise ConfigError("period_mev must be > 0")
        if not 0.0 < self.mean_reflectance < 1.0:
            raise ConfigError("mean_reflectance must be in (0, 1)")


def _sine_arg(m: BeamsplitterModel, e_ev):
    e_mev = (np.asarray(e_ev, dtype=float) - m.e_ref_ev) * 1e3
    return 2.0 * math.pi * e_mev / m.period_mev + m.phase_rad


def ratio_f(m: BeamsplitterModel, e_ev):
    """Reflected-over-transmitted power ratio at photon energy e_ev."""
    return m.offset + m.amplitude * np.sin(_sine_arg(m, e_ev))


def correction_factor(m: BeamsplitterModel, e_ev):
    """(1 + 1/f(E)) * mean_reflectance; multiplying measured counts by this
    removes the delivered-power oscillation in the linear-signal regime."""
    f = ratio_f(m, e_ev)
    if np.min(f) <= 0.0:
        raise ConfigError("malformed model: power ratio must stay positive")
    return (1.0 + 1.0 / f) * m.mean_reflectance


@dataclass(frozen=True)
class PhaseEstimate:
    model: BeamsplitterModel
    phase_rad: float
    amplitude: float
    residual_rms: float
    status: str  # "ok" or "no_oscillation"


def _window_mask(axis: np.ndarray, mask) -> np.ndarray:
    if isinstance(mask, np.ndarray) and mask.dtype == bool:
        if len(mask) != len(axis):
            raise ConfigError("boolean mask length must match the axis")
        return mask
    out = np.zeros(len(axis), dtype=bool)
    for lo, hi in mask:
        out |= (axis >= lo) & (axis <= hi)
    return out


def estimate_phase(s: Spectrum, mask,
                   model: BeamsplitterModel = BeamsplitterModel(),
                   min_relative_amplitude: float = 0.01) -> PhaseEstimate:
    """Fit the fixed-period sine to the masked (off-resonant) counts.

    The masked region is linearly detrended, then amplitude and phase follow
    from a linear least-squares fit at the model period.  The mask must span
    at least one full period.  A fitted amplitude below
    `min_relative_amplitude` of the mean background level reports
    status="no_oscillation" (correction should then be skipped).
    """
    sel = _window_mask(s.axis, mask)
    if np.count_nonzero(sel) < 4:
        raise ConfigError("background mask selects too few points")
    e = s.axis[sel]
    y = s.counts[sel]
    span_mev = (e.max() - e.min()) * 1e3
    if span_mev < model.period_mev:
        raise ConfigError(
            f"background mask spans {span_mev:.4g} meV, "
            f"below one oscillation period ({model.period_mev:.4g} meV)")
    ref = replace(model, phase_rad=0.0, e_ref_ev=float(s.axis[0]))
    trend = np.polynomial.polynomial.polyfit(e, y, 1)
    detrended = y - np.polynomial.polynomial.polyval(e, trend)
    theta = _sine_arg(ref, e)
    design = np.column_stack([np.sin(theta), np.cos(theta)])
    (a, b), *_ = np.linalg.lstsq(design, detrended, rcond=None)
    amplitude = math.hypot(a, b)
    phase = math.atan2(b, a)
    resid = detrended - design @ np.array([a, b])
    rms = float(np.sqrt(np.mean(resid ** 2)))
    level = float(np.mean(np.abs(y)))
    status = "ok" if amplitude >= min_relative_amplitude * max(level, 1e-300) \
        else "no_oscillation"
    fitted = replace(ref, phase_rad=phase)
    return PhaseEstimate(model=fitted, phase_rad=phase, amplitude=amplitude,
                         residual_rms=rms, status=status)


def apply_correction(s: Spectrum, m: BeamsplitterModel) -> Spectrum:
    """Multiply counts by the correction factor; axis is preserved.

    Applying the correction twice scales by the factor twice: the operation
    is multiplicative, not idempotent.
    """
    factor = correction_factor(m, s.axis)
    meta = dict(s.meta)
    meta["background_correction"] = (
        f"offset={m.offset:.12g};amplitude={m.amplitude:.12g};"
        f"period_mev={m.period_mev:.12g};phase_rad={m.phase_rad:.12g};"
        f"mean_reflectance={m.mean_reflectance:.12g};e_ref_ev={m.e_ref_ev:.12g}")
    return Spectrum(s.axis.copy(), s.counts * factor, s.axis_kind, meta)


def synthesize_oscillation(ideal: Spectrum, m: BeamsplitterModel) -> Spectrum:
    """Inverse of apply_correction: imprint the power oscillation onto an
    ideal spectrum (test-fixture generator; the round trip is exact)."""
    factor = correction_factor(m, ideal.axis)
    return Spectrum(ideal.axis.copy(), ideal.counts / factor, ideal.axis_kind,
                    dict(ideal.meta))
