"""Master-equation solvers: time evolution, steady state, ensemble averages.

All solvers act on the vectorized generator produced by
`spinmodel.build_liouvillian` (row-major vec, units 1/ns).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spinmodel import ConfigError, HyperfineConfig, InhomogeneityConfig, LiouvillianModel

TRACE_TOL = 1e-10
HERMITICITY_TOL = 1e-10
POSITIVITY_FLOOR = -1e-8
STEADY_RESIDUAL_TOL = 1e-10


class DegenerateSteadyStateError(RuntimeError):
    """The generator has more than one stationary state."""


class StiffIntegrationError(RuntimeError):
    """Adaptive step size underflowed; the configuration is too stiff."""


class EnsembleKernelError(RuntimeError):
    """A scan kernel failed for one ensemble sample."""


@dataclass
class DensityMatrix:
    """A dim x dim density matrix with tolerance-checked invariants."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError("density matrix must be square")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def thermal_ground(cls, dim: int) -> "DensityMatrix":
        """Unpolarized ground mixture diag(1/2, 1/2, 0, ...)."""
        m = np.zeros((dim, dim), dtype=complex)
        m[0, 0] = m[1, 1] = 0.5
        return cls(m)

    @classmethod
    def pure(cls, amplitudes) -> "DensityMatrix":
        v = np.asarray(amplitudes, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))

    def excited_population(self, model: LiouvillianModel) -> float:
        return float(self.populations()[list(model.excited_indices)].sum())

    def validate(self) -> "DensityMatrix":
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian within tolerance")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
            raise ValueError("density matrix trace differs from 1 beyond tolerance")
        if np.linalg.eigvalsh(m).min() < POSITIVITY_FLOOR:
            raise ValueError("density matrix has a negative eigenvalue beyond tolerance")
        return self


# ---------------------------------------------------------------------------
# Time evolution: embedded Dormand-Prince 5(4) with per-step trace control
# ---------------------------------------------------------------------------

_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])

_MAX_STEPS = 5_000_000


def _dp45(lmat: np.ndarray, y0: np.ndarray, t_span: float, rtol: float = 1e-8,
          atol: float = 1e-12) -> np.ndarray:
    """Integrate y' = lmat @ y over [0, t_span] adaptively.

    The trace of the (vectorized) state is renormalized after every accepted
    step; a per-step drift beyond 1e-9 aborts, as does step-size underflow.
    """
    d = int(round(np.sqrt(y0.size)))
    trace_idx = np.arange(d) * (d + 1)
    y = y0.astype(complex).copy()
    t = 0.0
    scale = np.linalg.norm(lmat, np.inf)
    dt = min(t_span, 0.1 / max(scale, 1e-30))
    dt_min = max(t_span * 1e-14, 1e-300)
    k = np.empty((7, y.size), dtype=complex)
    steps = 0
    while t < t_span:
        if dt < dt_min or steps > _MAX_STEPS:
            raise StiffIntegrationError(
                "step size underflow integrating the master equation: "
                f"rate-to-span ratio |L|*t = {scale * t_span:.3e}, dt = {dt:.3e} ns")
        dt = min(dt, t_span - t)
        k[0] = lmat @ y
        for i in range(1, 7):
            yi = y + dt * sum(a * k[j] for j, a in enumerate(_DP_A[i]) if a != 0.0)
            k[i] = lmat @ yi
        y5 = y + dt * (_DP_B5 @ k)
        y4 = y + dt * (_DP_B4 @ k)
        err = np.max(np.abs(y5 - y4)) / (atol + rtol * max(np.max(np.abs(y5)), 1e-30))
        steps += 1
        if err <= 1.0:
            t += dt
            trace = y5[trace_idx].sum()
            drift = abs(trace - 1.0)
            if drift > 1e-9:
                raise StiffIntegrationError(
                    f"trace drift {drift:.3e} in one step exceeds 1e-9; "
                    f"rate-to-span ratio |L|*t = {scale * t_span:.3e}")
            y = y5 / trace.real
        dt *= min(5.0, max(0.2, 0.9 * (1.0 / max(err, 1e-30)) ** 0.2))
    return y


def evolve(model: LiouvillianModel, rho0: DensityMatrix, t_ns: float) -> DensityMatrix:
    """Propagate rho0 for t_ns nanoseconds under the generator."""
    if t_ns < 0:
        raise ConfigError("t_ns must be >= 0")
    rho0.validate()
    if t_ns == 0.0:
        return rho0
    y = _dp45(model.matrix, rho0.matrix.reshape(-1), t_ns)
    m = y.reshape(rho0.dim, rho0.dim)
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(m).validate()


def evolve_path(model: LiouvillianModel, rho0: DensityMatrix,
                times_ns: np.ndarray) -> np.ndarray:
    """Propagate through an increasing time grid; returns (n, d, d) states."""
    times = np.asarray(times_ns, dtype=float)
    if times.ndim != 1 or len(times) < 1 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ConfigError("times_ns must be strictly increasing and >= 0")
    out = np.empty((len(times), rho0.dim, rho0.dim), dtype=complex)
    state = rho0
    prev = 0.0
    for i, t in enumerate(times):
        state = evolve(model, state, t - prev)
        out[i] = state.matrix
        prev = t
    return out


# ---------------------------------------------------------------------------
# Steady state
# ---------------------------------------------------------------------------

def _trace_row(d: int) -> np.ndarray:
    row = np.zeros(d * d, dtype=complex)
    row[np.arange(d) * (d + 1)] = 1.0
    return row


def steady_state(model: LiouvillianModel) -> DensityMatrix:
    """Solve L rho = 0 with unit trace by a dense linear solve.

    One row of the vectorized generator is replaced by the trace condition.
    A residual beyond 1e-10 triggers a null-space diagnosis: more than one
    vanishing singular value means the stationary state is not unique.
    """
    lmat = model.matrix
    d = model.dim
    a = lmat.copy()
    a[0, :] = _trace_row(d)
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    try:
        vec = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        vec = None
    residual = np.inf if vec is None else np.max(np.abs(lmat @ vec))
    if vec is None or residual > STEADY_RESIDUAL_TOL:
        sv = np.linalg.svd(lmat, compute_uv=False)
        null_dim = int(np.sum(sv < max(1e-10, sv[0] * 1e-12)))
        if null_dim != 1:
            raise DegenerateSteadyStateError(
                f"degenerate steady state: generator null space has dimension {null_dim}")
        raise RuntimeError(
            f"steady-state residual {residual:.3e} exceeds {STEADY_RESIDUAL_TOL:.0e}")
    m = vec.reshape(d, d)
    m = 0.5 * (m + m.conj().T)
    m /= np.trace(m).real
    return DensityMatrix(m).validate()


def steady_state_batch(l0: np.ndarray, pencil: np.ndarray,
                       offsets_ghz: np.ndarray) -> np.ndarray:
    """Steady states of L(x) = l0 + x * pencil for every scan offset x.

    Returns an (n, d, d) array; invariants are enforced with the same
    tolerances as the scalar path.
    """
    offsets = np.asarray(offsets_ghz, dtype=float)
    d = int(round(np.sqrt(l0.shape[0])))
    a = l0[None, :, :] + offsets[:, None, None] * pencil[None, :, :]
    lfull = a.copy()
    a[:, 0, :] = _trace_row(d)[None, :]
    b = np.zeros((len(offsets), d * d, 1), dtype=complex)
    b[:, 0, 0] = 1.0
    vec = np.linalg.solve(a, b)[:, :, 0]
    residual = np.abs(np.einsum("nij,nj->ni", lfull, vec)).max()
    if residual > STEADY_RESIDUAL_TOL:
        raise RuntimeError(
            f"steady-state residual {residual:.3e} exceeds {STEADY_RESIDUAL_TOL:.0e}")
    rho = vec.reshape(len(offsets), d, d)
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))
    rho /= np.trace(rho, axis1=1, axis2=2).real[:, None, None]
    if np.linalg.eigvalsh(rho).min() < POSITIVITY_FLOOR:
        raise ValueError("steady-state batch produced a negative eigenvalue "
                         "beyond tolerance")
    return rho


# ---------------------------------------------------------------------------
# Ensemble averaging
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleSpec:
    """Hyperfine manifold plus quasi-static inhomogeneity."""

    hyperfine: HyperfineConfig = HyperfineConfig()
    inhomogeneity: InhomogeneityConfig = InhomogeneityConfig()

    def samples(self) -> list[tuple[float, float, float]]:
        """Deterministically ordered (hf_shift_ghz, opt_shift_ghz, weight)."""
        hf_shifts = self.hyperfine.shifts_ghz()
        hf_weights = self.hyperfine.line_weights()
        inh = self.inhomogeneity
        if inh.sigma_opt_ghz == 0.0:
            opt = [(0.0, 1.0)]
        elif inh.n_samples <= 64:
            nodes, weights = np.polynomial.hermite.hermgauss(inh.n_samples)
            opt = list(zip(np.sqrt(2.0) * inh.sigma_opt_ghz * nodes,
                           weights / np.sqrt(np.pi)))
        else:
            rng = np.random.default_rng(inh.seed)
            draws = rng.normal(0.0, inh.sigma_opt_ghz, inh.n_samples)
            opt = [(float(s), 1.0 / inh.n_samples) for s in draws]
        return [(float(hf), float(s), float(wh * ws))
                for hf, wh in zip(hf_shifts, hf_weights)
                for s, ws in opt]


def ensemble_average(kernel, spec: EnsembleSpec):
    """Weighted mean of `kernel(hf_shift_ghz, opt_shift_ghz)` over the
    hyperfine projections and the Gaussian inhomogeneity.

    The Gaussian integral uses Gauss-Hermite quadrature for n_samples <= 64
    and seeded Monte Carlo beyond.  Kernel failures are re-raised tagged with
    the offending sample.
    """
    total = None
    for hf, shift, weight in spec.samples():
        try:
            value = kernel(hf, shift)
        except Exception as exc:  # noqa: BLE001 - tag and propagate
            raise EnsembleKernelError(
                f"scan kernel failed at hf_shift={hf:.6g} GHz, "
                f"opt_shift={shift:.6g} GHz") from exc
        value = np.asarray(value, dtype=float)
        total = weight * value if total is None else total + weight * value
    return total
