"""Lineshape fitting and parameter extraction.

Voigt profiles are evaluated through the Faddeeva function; fits use a
damped (Levenberg-Marquardt style) least-squares loop with moment-based
initial guesses.  Everything operates on plain (x, y) arrays or on
`spectroscopy.Spectrum` objects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import wofz

from .spinmodel import ConfigError


class DegenerateDataError(ValueError):
    """The data cannot constrain the requested fit (e.g. constant counts)."""


class DipNotFoundError(RuntimeError):
    """No resolvable dip inside the peak support."""


# ---------------------------------------------------------------------------
# Voigt profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VoigtParams:
    """Height-normalized Voigt line: value(center) = baseline + amplitude.

    gaussian_sigma and lorentzian_gamma (HWHM) are in axis units; either may
    be zero, in which case the profile reduces exactly to the pure
    Lorentzian / Gaussian closed form.
    """

    center: float
    gaussian_sigma: float
    lorentzian_gamma: float
    amplitude: float
    baseline: float = 0.0

    def __post_init__(self):
        if self.gaussian_sigma < 0 or self.lorentzian_gamma < 0:
            raise ConfigError("widths must be >= 0")
        if self.gaussian_sigma == 0 and self.lorentzian_gamma == 0:
            raise ConfigError("sigma and gamma cannot both be 0")


def _voigt_shape(x, sigma: float, gamma: float):
    """Unit-height Voigt profile centered at 0."""
    x = np.asarray(x, dtype=float)
    if sigma == 0.0:
        return gamma * gamma / (x * x + gamma * gamma)
    if gamma == 0.0:
        return np.exp(-x * x / (2.0 * sigma * sigma))
    z = (x + 1j * gamma) / (sigma * math.sqrt(2.0))
    z0 = (1j * gamma) / (sigma * math.sqrt(2.0))
    return wofz(z).real / wofz(z0).real


def voigt_eval(p: VoigtParams, x):
    """Evaluate the Voigt line at x (scalar or array)."""
    return p.baseline + p.amplitude * _voigt_shape(
        np.asarray(x, dtype=float) - p.center, p.gaussian_sigma, p.lorentzian_gamma)


def voigt_fwhm(sigma: float, gamma: float) -> float:
    """Full width at half maximum of the Voigt profile, found numerically
    from the half-height crossing (exact in the pure limits)."""
    if sigma < 0 or gamma < 0 or (sigma == 0 and gamma == 0):
        raise ConfigError("invalid widths")
    if gamma == 0.0:
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) * sigma
    if sigma == 0.0:
        return 2.0 * gamma
    f_l, f_g = 2.0 * gamma, 2.0 * math.sqrt(2.0 * math.log(2.0)) * sigma
    guess = 0.5346 * f_l + math.sqrt(0.2166 * f_l * f_l + f_g * f_g)
    half = brentq(lambda x: _voigt_shape(x, sigma, gamma) - 0.5,
                  1e-6 * guess, 2.0 * guess, xtol=1e-14, rtol=1e-14)
    return 2.0 * half


@dataclass(frozen=True)
class PeakDipParams:
    """Composite model: broad positive Voigt peak plus a narrow negative
    Voigt dip sharing the peak's baseline."""

    peak: VoigtParams
    dip: VoigtParams

    def __post_init__(self):
        if self.dip.amplitude > 0:
            raise ConfigError("dip amplitude must be <= 0")

    def eval(self, x):
        return voigt_eval(self.peak, x) + (
            self.dip.amplitude * _voigt_shape(
                np.asarray(x, dtype=float) - self.dip.center,
                self.dip.gaussian_sigma, self.dip.lorentzian_gamma))


@dataclass
class FitResult:
    """Outcome of a damped least-squares fit."""

    params: object
    cov_diag: np.ndarray
    residual_rms: float
    fwhm: float | None
    iterations: int
    converged: bool
    derived: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_rms": self.residual_rms,
            "fwhm": self.fwhm,
            "uncertainties": [math.sqrt(max(v, 0.0)) for v in np.atleast_1d(self.cov_diag)],
            "derived": dict(sorted(self.derived.items())),
        }
        if isinstance(self.params, VoigtParams):
            p = self.params
            out["params"] = {"center": p.center, "gaussian_sigma": p.gaussian_sigma,
                             "lorentzian_gamma": p.lorentzian_gamma,
                             "amplitude": p.amplitude, "baseline": p.baseline}
        elif isinstance(self.params, PeakDipParams):
            pk, dp = self.params.peak, self.params.dip
            out["params"] = {
                "peak": {"center": pk.center, "gaussian_sigma": pk.gaussian_sigma,
                         "lorentzian_gamma": pk.lorentzian_gamma,
                         "amplitude": pk.amplitude, "baseline": pk.baseline},
                "dip": {"center": dp.center, "gaussian_sigma": dp.gaussian_sigma,
                        "lorentzian_gamma": dp.lorentzian_gamma,
                        "amplitude": dp.amplitude},
            }
        else:
            out["params"] = self.params
        return out


# ---------------------------------------------------------------------------
# Damped least squares
# ---------------------------------------------------------------------------

@dataclass
class _LMState:
    x: np.ndarray
    cov_diag: np.ndarray
    cost: float
    residual_rms: float
    iterations: int
    converged: bool
    cost_history: list


def _numeric_jacobian(fun, x, r0):
    m, n = r0.size, x.size
    jac = np.empty((m, n))
    for j in range(n):
        h = math.sqrt(np.finfo(float).eps) * max(abs(x[j]), 1e-12)
        xp = x.copy()
        xp[j] += h
        jac[:, j] = (fun(xp) - r0) / h
    return jac


def damped_least_squares(fun, x0, bounds=None, max_iter: int = 500,
                         ftol: float = 1e-10, gtol: float = 1e-8) -> _LMState:
    """Minimize 0.5*||fun(x)||^2 with Marquardt damping.

    Steps solve (J'J + lam*diag(J'J)) dx = -J'r and are accepted only when
    the cost decreases, so the cost history is non-increasing.  Convergence:
    relative cost change < ftol on an accepted step, or gradient inf-norm
    < gtol.  `bounds` is an optional (lo, hi) pair of arrays applied by
    projection.
    """
    x = np.asarray(x0, dtype=float).copy()
    if bounds is not None:
        x = np.clip(x, bounds[0], bounds[1])
    r = np.asarray(fun(x), dtype=float)
    cost = 0.5 * float(r @ r)
    lam = 1e-3
    history = [cost]
    iterations = 0
    converged = False
    jac = _numeric_jacobian(fun, x, r)
    for _ in range(max_iter):
        grad = jac.T @ r
        if np.max(np.abs(grad)) < gtol:
            converged = True
            break
        jtj = jac.T @ jac
        damp = np.clip(np.diag(jtj), 1e-30, None)
        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(damp), -grad)
            except np.linalg.LinAlgError:
                lam = min(lam * 10.0, 1e14)
                continue
            x_new = x + step
            if bounds is not None:
                x_new = np.clip(x_new, bounds[0], bounds[1])
            r_new = np.asarray(fun(x_new), dtype=float)
            cost_new = 0.5 * float(r_new @ r_new)
            if cost_new < cost:
                accepted = True
                rel_drop = (cost - cost_new) / max(cost, 1e-300)
                x, r, cost = x_new, r_new, cost_new
                history.append(cost)
                iterations += 1
                lam = max(lam / 3.0, 1e-14)
                if rel_drop < ftol:
                    converged = True
                break
            lam = min(lam * 10.0, 1e14)
        if not accepted:
            # no downhill step found at maximum damping: stationary enough
            converged = np.max(np.abs(grad)) < 1e3 * gtol or cost == 0.0
            break
        if converged:
            break
        jac = _numeric_jacobian(fun, x, r)
    m, n = r.size, x.size
    jac = _numeric_jacobian(fun, x, r)
    jtj = jac.T @ jac
    sigma2 = 2.0 * cost / max(m - n, 1)
    try:
        cov = sigma2 * np.linalg.pinv(jtj)
        cov_diag = np.diag(cov).copy()
    except np.linalg.LinAlgError:
        cov_diag = np.full(n, np.nan)
    rms = math.sqrt(2.0 * cost / m)
    return _LMState(x, cov_diag, cost, rms, iterations, bool(converged), history)


# ---------------------------------------------------------------------------
# Voigt fits
# ---------------------------------------------------------------------------

def _spectrum_xy(s):
    if hasattr(s, "axis") and hasattr(s, "counts"):
        return np.asarray(s.axis, dtype=float), np.asarray(s.counts, dtype=float)
    x, y = s
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def _moment_guess(x, y) -> VoigtParams:
    baseline = float(np.min(y))
    amp = float(np.max(y) - baseline)
    center = float(x[int(np.argmax(y))])
    above = np.nonzero(y - baseline >= 0.5 * amp)[0]
    width = max(float(x[above[-1]] - x[above[0]]), 4.0 * float(np.min(np.diff(x))))
    return VoigtParams(center=center, gaussian_sigma=0.55 * width / 2.3548,
                       lorentzian_gamma=0.25 * width / 2.0,
                       amplitude=amp, baseline=baseline)


def _voigt_result(x, y, state: _LMState) -> FitResult:
    c, s, g, a, b = state.x
    params = VoigtParams(c, abs(s), abs(g), a, b)
    return FitResult(params=params, cov_diag=state.cov_diag,
                     residual_rms=state.residual_rms,
                     fwhm=voigt_fwhm(params.gaussian_sigma, params.lorentzian_gamma),
                     iterations=state.iterations, converged=state.converged)


def fit_voigt(s, init: VoigtParams | None = None) -> FitResult:
    """Fit a single Voigt line to a spectrum (or (x, y) pair).

    The initial guess comes from data moments when not supplied.  Constant
    counts raise DegenerateDataError; non-convergence within 500 accepted
    steps returns converged=False with the best parameters.
    """
    x, y = _spectrum_xy(s)
    if np.ptp(y) == 0.0:
        raise DegenerateDataError("constant counts cannot constrain a line fit")
    p0 = init if init is not None else _moment_guess(x, y)
    x0 = np.array([p0.center, p0.gaussian_sigma, p0.lorentzian_gamma,
                   p0.amplitude, p0.baseline])

    def residual(v):
        c, sig, gam, amp, base = v
        sig, gam = abs(sig), abs(gam)
        if sig == 0.0 and gam == 0.0:
            sig = 1e-12
        return base + amp * _voigt_shape(x - c, sig, gam) - y

    state = damped_least_squares(residual, x0)
    return _voigt_result(x, y, state)


def _find_dip(x, y, peak_fit: FitResult, min_depth_frac: float):
    """Deepest local minimum of the residual inside the peak FWHM window."""
    peak = peak_fit.params
    model = voigt_eval(peak, x)
    resid = y - model
    # search slightly beyond the FWHM interval; ties break to the deepest
    # minimum, which keeps the documented FWHM-interval preference
    inside = np.abs(x - peak.center) <= 1.5 * peak_fit.fwhm
    noise = 1.4826 * np.median(np.abs(resid[~inside] - np.median(resid[~inside]))) \
        if np.any(~inside) else 0.0
    threshold = max(4.0 * noise, min_depth_frac * peak.amplitude)
    idx = np.nonzero(inside)[0]
    best = None
    for i in idx:
        if 0 < i < len(x) - 1 and resid[i] <= resid[i - 1] and resid[i] <= resid[i + 1]:
            depth = -resid[i]
            if depth > threshold and (best is None or depth > best[1]):
                best = (i, depth)
    if best is None:
        raise DipNotFoundError("no dip found inside the peak support")
    i, depth = best
    lo = i
    while lo > 0 and resid[lo - 1] <= -0.5 * depth:
        lo -= 1
    hi_i = i
    while hi_i < len(x) - 1 and resid[hi_i + 1] <= -0.5 * depth:
        hi_i += 1
    width = max(float(x[hi_i] - x[lo]), 3.0 * float(np.min(np.diff(x))))
    return float(x[i]), depth, width


def fit_peak_with_dip(s, min_depth_frac: float = 0.02) -> FitResult:
    """Joint fit of a broad Voigt peak and a narrow negative Voigt dip.

    A peak-only fit seeds the dip search (deepest residual minimum inside
    the peak FWHM, at least `min_depth_frac` of the peak amplitude deep);
    absence of such a minimum raises DipNotFoundError.  The derived dict of
    the result reports dip_center, dip_fwhm and dip_contrast, the latter as
    |dip amplitude| over the dip-free model value at the dip center.
    """
    x, y = _spectrum_xy(s)
    if np.ptp(y) == 0.0:
        raise DegenerateDataError("constant counts cannot constrain a line fit")
    peak_fit = fit_voigt((x, y))
    dc0, depth0, w0 = _find_dip(x, y, peak_fit, min_depth_frac)
    # refit the peak with the dip region masked so the joint fit starts from
    # an unbiased peak shape
    keep = np.abs(x - dc0) > 2.0 * w0
    if np.count_nonzero(keep) > 12:
        peak_fit = fit_voigt((x[keep], y[keep]), init=peak_fit.params)
        dc0, depth0, w0 = _find_dip(x, y, peak_fit, min_depth_frac)
    pk = peak_fit.params
    x0 = np.array([pk.center, pk.gaussian_sigma, pk.lorentzian_gamma, pk.amplitude,
                   pk.baseline, dc0, 0.3 * w0 / 2.3548, 0.25 * w0, -depth0])
    lo = np.full(9, -np.inf)
    hi = np.full(9, np.inf)
    lo[5], hi[5] = pk.center - peak_fit.fwhm, pk.center + peak_fit.fwhm
    hi[8] = 0.0

    def residual(v):
        c, sig, gam, amp, base, dc, dsig, dgam, damp = v
        sig, gam, dsig, dgam = abs(sig), abs(gam), abs(dsig), abs(dgam)
        if sig == 0.0 and gam == 0.0:
            sig = 1e-12
        if dsig == 0.0 and dgam == 0.0:
            dsig = 1e-12
        model = base + amp * _voigt_shape(x - c, sig, gam)
        model = model + damp * _voigt_shape(x - dc, dsig, dgam)
        return model - y

    state = damped_least_squares(residual, x0, bounds=(lo, hi))
    c, sig, gam, amp, base, dc, dsig, dgam, damp = state.x
    peak = VoigtParams(c, abs(sig), abs(gam), amp, base)
    dip = VoigtParams(dc, abs(dsig), abs(dgam), min(damp, 0.0))
    dip = _refine_dip_locally(x, y, peak, dip)
    peak_fwhm = voigt_fwhm(peak.gaussian_sigma, peak.lorentzian_gamma)
    dip_fwhm = voigt_fwhm(dip.gaussian_sigma, dip.lorentzian_gamma)
    if dip_fwhm >= peak_fwhm:
        raise DipNotFoundError("fitted dip is as wide as the peak; no resolvable dip")
    contrast = abs(dip.amplitude) / float(voigt_eval(peak, dip.center))
    return FitResult(params=PeakDipParams(peak, dip), cov_diag=state.cov_diag,
                     residual_rms=state.residual_rms, fwhm=peak_fwhm,
                     iterations=state.iterations, converged=state.converged,
                     derived={"dip_center": dip.center, "dip_fwhm": dip_fwhm,
                              "dip_contrast": contrast})


def _local_dip_fit(x, y, peak: VoigtParams, dip: VoigtParams, half_window: float,
                   center_only: bool = False) -> VoigtParams | None:
    window = np.abs(x - dip.center) <= half_window
    if np.count_nonzero(window) < 15:
        return None
    xw = x[window]
    resid = y[window] - voigt_eval(peak, xw)

    if center_only:
        x0 = np.array([float(np.median(resid)), 0.0, dip.center])
        lo = np.array([-np.inf, -np.inf, xw[0]])
        hi = np.array([np.inf, np.inf, xw[-1]])

        def local_residual(v):
            c0, c1, dc = v
            return (c0 + c1 * (xw - dc) + dip.amplitude *
                    _voigt_shape(xw - dc, dip.gaussian_sigma,
                                 dip.lorentzian_gamma) - resid)

        state = damped_least_squares(local_residual, x0, bounds=(lo, hi))
        return VoigtParams(float(state.x[2]), dip.gaussian_sigma,
                           dip.lorentzian_gamma, dip.amplitude)

    x0 = np.array([float(np.median(resid)), 0.0, dip.center,
                   dip.gaussian_sigma, dip.lorentzian_gamma, dip.amplitude])
    lo = np.array([-np.inf, -np.inf, xw[0], -np.inf, -np.inf, -np.inf])
    hi = np.array([np.inf, np.inf, xw[-1], np.inf, np.inf, 0.0])

    def local_residual(v):
        c0, c1, dc, dsig, dgam, damp = v
        dsig, dgam = abs(dsig), abs(dgam)
        if dsig == 0.0 and dgam == 0.0:
            dsig = 1e-12
        return c0 + c1 * (xw - dc) + damp * _voigt_shape(xw - dc, dsig, dgam) - resid

    state = damped_least_squares(local_residual, x0, bounds=(lo, hi))
    _, _, dc, dsig, dgam, damp = state.x
    if damp >= 0.0 or (abs(dsig) == 0.0 and abs(dgam) == 0.0):
        return None
    return VoigtParams(float(dc), abs(dsig), abs(dgam), float(damp))


def _refine_dip_locally(x, y, peak: VoigtParams, dip: VoigtParams) -> VoigtParams:
    """Polish the dip parameters on windows around the dip, a linear term
    absorbing the local slope of the underlying peak.

    A wide window (five widths) pins the dip width and depth; a second,
    core-sized window then re-centers.  The broad-peak model never matches
    the data perfectly and a detuned pump skews the dip wings, so a single
    whole-profile fit drags the center; the core of the dark resonance is
    the unbiased position estimator.
    """
    try:
        width = voigt_fwhm(dip.gaussian_sigma, dip.lorentzian_gamma)
    except ConfigError:
        return dip
    refined = _local_dip_fit(x, y, peak, dip, 5.0 * width)
    if refined is None:
        return dip
    width = voigt_fwhm(refined.gaussian_sigma, refined.lorentzian_gamma)
    centered = _local_dip_fit(x, y, peak, refined, 0.75 * width, center_only=True)
    return centered if centered is not None else refined


# ---------------------------------------------------------------------------
# g-factor extraction
# ---------------------------------------------------------------------------

from .spinmodel import CONSTANTS  # noqa: E402


@dataclass(frozen=True)
class ZeemanFit:
    g_tot: float
    g_tot_err: float
    slope_mev_per_t: float


def fit_zeeman_splitting(points, weights=None) -> ZeemanFit:
    """Weighted linear fit through the origin of splitting (meV) vs B (T);
    g_tot = slope / mu_B."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise DegenerateDataError("need at least two (B, splitting) points")
    b, s = pts[:, 0], pts[:, 1]
    if np.ptp(b) == 0.0:
        raise DegenerateDataError("all magnetic-field values are identical")
    w = np.ones_like(b) if weights is None else np.asarray(weights, dtype=float)
    denom = float(np.sum(w * b * b))
    slope = float(np.sum(w * b * s)) / denom
    resid = s - slope * b
    sigma2 = float(np.sum(w * resid * resid)) / max(len(b) - 1, 1)
    slope_err = math.sqrt(sigma2 / denom)
    mu_b_mev = CONSTANTS.mu_b_uev_per_t * 1e-3
    return ZeemanFit(g_tot=slope / mu_b_mev, g_tot_err=slope_err / mu_b_mev,
                     slope_mev_per_t=slope)


@dataclass(frozen=True)
class SinusoidFit:
    e_center_ev: float
    delta_e_uev: float
    a_rad_per_deg: float
    b_rad: float
    converged: bool

    @property
    def period_deg(self) -> float:
        return 2.0 * math.pi / abs(self.a_rad_per_deg)


@dataclass(frozen=True)
class PolarizationGFit:
    low: SinusoidFit
    high: SinusoidFit
    g_e_perp: float
    g_h_perp_lower_bound: float


def _fit_sinusoid(points) -> SinusoidFit:
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 8:
        raise DegenerateDataError("need at least 8 angles")
    phi, e = pts[:, 0], pts[:, 1]
    if np.ptp(phi) < 90.0:
        raise DegenerateDataError("angular coverage below one 90-degree period")
    a0 = 2.0 * math.pi / 90.0  # seed at the expected 90 deg period; a stays free
    design = np.column_stack([np.sin(a0 * phi), np.cos(a0 * phi)])
    alpha, beta = np.linalg.lstsq(design, e - e.mean(), rcond=None)[0]
    amp0 = max(math.hypot(alpha, beta), 1e-12)
    x0 = np.array([e.mean(), amp0, a0, math.atan2(beta, alpha)])

    def residual(v):
        ec, amp, a, b = v
        return ec + amp * np.sin(a * phi + b) - e

    state = damped_least_squares(residual, x0)
    ec, amp, a, b = state.x
    return SinusoidFit(e_center_ev=float(ec), delta_e_uev=abs(amp) * 1e6,
                       a_rad_per_deg=float(a), b_rad=float(b),
                       converged=state.converged)


def fit_polarization_positions(points_low, points_high, b_tesla: float) -> PolarizationGFit:
    """Fit E_pos(phi) = E_center + dE * sin(a*phi + b) for the low- and
    high-energy peaks; derive the electron g-factor from the center
    separation and a hole g-factor lower bound from the larger oscillation
    amplitude."""
    if b_tesla <= 0:
        raise ConfigError("b_tesla must be > 0")
    low = _fit_sinusoid(points_low)
    high = _fit_sinusoid(points_high)
    mu_b_uev = CONSTANTS.mu_b_uev_per_t * b_tesla
    g_e = (high.e_center_ev - low.e_center_ev) * 1e6 / mu_b_uev
    g_h = max(low.delta_e_uev, high.delta_e_uev) / mu_b_uev
    return PolarizationGFit(low=low, high=high, g_e_perp=g_e,
                            g_h_perp_lower_bound=g_h)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    slope_err: float
    intercept: float
    centers: tuple[float, ...]


def dip_shift_slope(scans, feature: str = "dip") -> SlopeFit:
    """Linear response of the fitted dip (or recovered-peak) center to the
    pump detuning, from a list of (pump_detuning_ghz, spectrum) pairs."""
    if feature not in ("dip", "peak"):
        raise ConfigError("feature must be 'dip' or 'peak'")
    if len(scans) < 3:
        raise DegenerateDataError("need at least three pump detunings")
    deltas, centers = [], []
    for delta, spec in scans:
        fit = fit_peak_with_dip(spec)
        deltas.append(float(delta))
        centers.append(fit.derived["dip_center"] if feature == "dip"
                       else fit.params.peak.center)
    deltas = np.asarray(deltas)
    centers = np.asarray(centers)
    if np.ptp(deltas) == 0.0:
        raise DegenerateDataError("degenerate abscissa: all pump detunings equal")
    design = np.column_stack([deltas, np.ones_like(deltas)])
    coef, res, *_ = np.linalg.lstsq(design, centers, rcond=None)
    dof = max(len(deltas) - 2, 1)
    sigma2 = (float(res[0]) if res.size else
              float(np.sum((centers - design @ coef) ** 2))) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return SlopeFit(slope=float(coef[0]), slope_err=math.sqrt(max(cov[0, 0], 0.0)),
                    intercept=float(coef[1]), centers=tuple(centers))
