"""Deterministic master-equation engines for the qubit control schemes.

A scheme generator is a function ``gen(spec, rho) -> drho_dt``.  Generators
return the full right-hand side of the master equation, so independent decay
channels can be composed by addition.  All generators here are linear in rho,
which :func:`integrate_deterministic` exploits by building the matrix
representation once and then stepping with fixed-step RK4.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .operators import (
    IDENTITY,
    PROJ_EXCITED,
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    check_density,
    excited_state,
    hermitize,
    tensor,
)
from .traces import PopulationTrace


class IntegrationError(RuntimeError):
    """State invariants drifted beyond tolerance during integration."""


class SchemeKind(Enum):
    NO_FEEDBACK = "no_feedback"
    WISEMAN_MILBURN = "wiseman_milburn"
    ANCILLA_COHERENT = "ancilla_coherent"


# Feedback quadratures, one per allowed axis.  The sign is fixed so that a
# positive gain drives the quadrature that interferes destructively with the
# emitted field; with the excited-state-first basis ordering used here, that
# is -sigma_y (in the ground-state-first convention it would read +sigma_y).
_FEEDBACK_AXES = {"x": -SIGMA_X, "y": -SIGMA_Y}


@dataclass(frozen=True)
class SchemeSpec:
    """Physical parameters of one control scheme.

    Rates (gamma, kappa) and couplings (g, lambda_gain, omegas) are in
    inverse microseconds; eta is the homodyne detection efficiency; phi_lo
    is the local-oscillator phase in radians.
    """

    kind: SchemeKind
    gamma: float
    eta: float = 1.0
    lambda_gain: float = 0.0
    g: float = 0.0
    kappa: float = 0.0
    omega_s: float = 0.0
    omega_a: float = 0.0
    phi_lo: float = 0.0
    feedback_axis: str = "y"

    def __post_init__(self):
        if not isinstance(self.kind, SchemeKind):
            raise ValueError(f"kind must be a SchemeKind, got {self.kind!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if not (math.isfinite(self.eta) and 0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        for name in ("lambda_gain", "g", "kappa"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be >= 0 and finite, got {v!r}")
        for name in ("omega_s", "omega_a", "phi_lo"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.feedback_axis not in _FEEDBACK_AXES:
            raise ValueError(f"feedback_axis must be 'x' or 'y', got {self.feedback_axis!r}")

    @property
    def dim(self) -> int:
        return 4 if self.kind is SchemeKind.ANCILLA_COHERENT else 2

    @property
    def fastest_rate(self) -> float:
        """Largest rate scale in the generator; sets the step-size bound."""
        return max(
            self.gamma,
            self.kappa,
            self.g,
            abs(self.omega_s),
            abs(self.omega_a),
            self.lambda_gain ** 2,
        )


@dataclass(frozen=True)
class TrajectoryConfig:
    """Integration grid and ensemble bookkeeping.

    tau is the output sample period (a whole multiple of dt); results are
    decimated to that grid where the interface says so.  initial_state of
    None means "system excited, ancilla in ground".
    """

    dt: float
    t_final: float
    seed: int = 0
    n_trajectories: int = 1
    tau: float | None = None
    initial_state: np.ndarray | None = None

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.t_final) and self.t_final >= self.dt):
            raise ValueError("t_final must be at least one step long")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        if int(self.n_trajectories) != self.n_trajectories or self.n_trajectories < 1:
            raise ValueError("n_trajectories must be a positive integer")
        tau = self.dt if self.tau is None else self.tau
        object.__setattr__(self, "tau", float(tau))
        stride = self.tau / self.dt
        if abs(stride - round(stride)) > 1e-9 * max(1.0, stride):
            raise ValueError(f"tau={self.tau} is not a whole multiple of dt={self.dt}")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ValueError(f"t_final={self.t_final} is not a whole multiple of dt={self.dt}")
        if self.initial_state is not None:
            state = np.asarray(self.initial_state, dtype=complex)
            check_density(state)
            object.__setattr__(self, "initial_state", state)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def sample_stride(self) -> int:
        return int(round(self.tau / self.dt))


def check_step_size(spec: SchemeSpec, config: TrajectoryConfig) -> None:
    """Enforce dt <= 0.01 / (fastest rate in the generator)."""
    bound = 0.01 / spec.fastest_rate
    if config.dt > bound * (1.0 + 1e-12):
        raise ValueError(
            f"dt={config.dt} too large for rate scale {spec.fastest_rate}; "
            f"need dt <= {bound:.3e}"
        )


def build_hamiltonian(spec: SchemeSpec) -> np.ndarray:
    """Scheme Hamiltonian in the rotating frame (hbar = 1).

    Two-level schemes get (omega_s/2) sigma_z.  The ancilla scheme adds the
    ancilla splitting and the excitation-exchange coupling
    g (sigma_+ sigma_- + sigma_- sigma_+) between system and ancilla.
    """
    if spec.dim == 2:
        return 0.5 * spec.omega_s * SIGMA_Z
    sp = SIGMA_MINUS.conj().T
    H = 0.5 * spec.omega_s * tensor(SIGMA_Z, IDENTITY)
    H = H + 0.5 * spec.omega_a * tensor(IDENTITY, SIGMA_Z)
    H = H + spec.g * (tensor(sp, SIGMA_MINUS) + tensor(SIGMA_MINUS, sp))
    return H


def lindblad_rhs(H: np.ndarray, channels, rho: np.ndarray) -> np.ndarray:
    """General Lindblad right-hand side.

    Parameters
    ----------
    H : np.ndarray
        Hamiltonian, same dimension as rho.
    channels : sequence of (rate, operator)
        Decay channels; each contributes rate * D[operator] rho.
    rho : np.ndarray
        Density matrix.
    """
    rho = np.asarray(rho, dtype=complex)
    out = -1j * (H @ rho - rho @ H)
    for rate, L in channels:
        if rate < 0:
            raise ValueError(f"channel rate must be >= 0, got {rate!r}")
        Ld = L.conj().T
        LdL = Ld @ L
        out = out + rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def feedback_master_equation(H0, c, F, eta, rho) -> np.ndarray:
    """Markovian homodyne-feedback master equation.

    For collapse operator c, feedback operator F, and efficiency eta:

        drho = -i [H0 + (c+ F + F c)/2, rho]
               + D[c - i sqrt(eta) F] rho + (1 - eta) D[F] rho

    The sqrt(eta) keeps the fed-back signal proportional to what was actually
    detected; at eta = 1 this is the ideal-detection form.
    """
    Hfb = 0.5 * (c.conj().T @ F + F @ c)
    L = c - 1j * math.sqrt(eta) * F
    rhs = lindblad_rhs(H0 + Hfb, [(1.0, L)], rho)
    if eta < 1.0:
        rhs = rhs + (1.0 - eta) * lindblad_rhs(np.zeros_like(H0), [(1.0, F)], rho)
    return rhs


def feedback_operator(spec: SchemeSpec) -> np.ndarray:
    """Single-qubit feedback quadrature lambda * F_axis for this scheme."""
    return spec.lambda_gain * _FEEDBACK_AXES[spec.feedback_axis]


def no_feedback_generator(spec: SchemeSpec, rho: np.ndarray) -> np.ndarray:
    """Bare amplitude damping: -i[H, rho] + gamma D[sigma_-] rho."""
    return lindblad_rhs(0.5 * spec.omega_s * SIGMA_Z, [(spec.gamma, SIGMA_MINUS)], rho)


def wm_generator(spec: SchemeSpec, rho: np.ndarray) -> np.ndarray:
    """Homodyne-mediated feedback on a single qubit.

    The feedback acts along spec.feedback_axis with gain lambda_gain; the
    closed-form decay rate of the excited population is
    gamma - 2 sqrt(eta gamma) lambda + 2 lambda^2.
    """
    c = math.sqrt(spec.gamma) * SIGMA_MINUS
    F = feedback_operator(spec)
    H0 = 0.5 * spec.omega_s * SIGMA_Z
    return feedback_master_equation(H0, c, F, spec.eta, rho)


def ancilla_feedback_generator(spec: SchemeSpec, rho: np.ndarray) -> np.ndarray:
    """Coherent feedback routed onto the ancilla of a system-ancilla pair.

    The system's emission is detected and fed back as a drive on the ancilla
    quadrature; the exchange coupling g then carries the correction to the
    system.  Dimension 4; the ancilla's own decay channel is not included
    here and composes additively (see ancilla_decay_generator).
    """
    c = math.sqrt(spec.gamma) * tensor(SIGMA_MINUS, IDENTITY)
    F = tensor(IDENTITY, feedback_operator(spec))
    return feedback_master_equation(build_hamiltonian(spec), c, F, spec.eta, rho)


def ancilla_decay_generator(spec: SchemeSpec, rho: np.ndarray) -> np.ndarray:
    """Passive system-ancilla model: exchange coupling with both qubits damped.

    -i[H, rho] + gamma D[sigma_-^S] rho + kappa D[sigma_-^A] rho
    """
    channels = [
        (spec.gamma, tensor(SIGMA_MINUS, IDENTITY)),
        (spec.kappa, tensor(IDENTITY, SIGMA_MINUS)),
    ]
    return lindblad_rhs(build_hamiltonian(spec), channels, rho)


def liouvillian_matrix(generator, spec: SchemeSpec, dim: int) -> np.ndarray:
    """Matrix of a linear generator acting on row-major vectorized states."""
    n = dim * dim
    M = np.empty((n, n), dtype=complex)
    for k in range(n):
        unit = np.zeros((dim, dim), dtype=complex)
        unit.flat[k] = 1.0
        M[:, k] = generator(spec, unit).ravel()
    return M


def _pe_weights(dim: int) -> np.ndarray:
    """Row vector w with w . vec(rho) = tr(P_e rho) (system-reduced for dim 4)."""
    proj = PROJ_EXCITED if dim == 2 else tensor(PROJ_EXCITED, IDENTITY)
    return proj.T.ravel()


def integrate_deterministic(generator, spec: SchemeSpec, config: TrajectoryConfig,
                            observer=None) -> PopulationTrace:
    """Fixed-step RK4 integration of a deterministic master equation.

    Parameters
    ----------
    generator : callable
        gen(spec, rho) -> drho_dt, linear in rho.
    spec, config : SchemeSpec, TrajectoryConfig
        Physical parameters and grid.  config.initial_state of None selects
        the excited system (ancilla in ground for four-level schemes).
    observer : callable, optional
        Called as observer(t, rho) at every decimated sample time (stride
        config.tau); useful for state-invariant audits.

    Returns
    -------
    PopulationTrace
        Excited-state population of the system at every step, t = 0 included.

    The state is repaired after each step (hermitize, renormalize); if the
    population or the spectrum still drifts outside tolerance the step size
    is too large and IntegrationError is raised.
    """
    check_step_size(spec, config)
    rho0 = config.initial_state
    if rho0 is None:
        rho0 = excited_state(spec.dim)
    dim = rho0.shape[0]

    M = liouvillian_matrix(generator, spec, dim)
    w = _pe_weights(dim)
    dt = config.dt
    n_steps = config.n_steps
    stride = config.sample_stride

    v = rho0.ravel().astype(complex)
    pe = np.empty(n_steps + 1)
    pe[0] = (w @ v).real
    if observer is not None:
        observer(0.0, rho0.copy())

    for step in range(1, n_steps + 1):
        k1 = M @ v
        k2 = M @ (v + 0.5 * dt * k1)
        k3 = M @ (v + 0.5 * dt * k2)
        k4 = M @ (v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)

        rho = hermitize(v.reshape(dim, dim))
        tr = np.trace(rho).real
        if abs(tr) < 1e-12:
            raise IntegrationError("state trace collapsed during integration")
        rho = rho / tr
        v = rho.ravel()

        p = (w @ v).real
        if p < -1e-9 or p > 1.0 + 1e-9:
            raise IntegrationError(
                f"population left [0, 1] at step {step} (P_e={p:.3e}); reduce dt"
            )
        pe[step] = p

        if step % stride == 0:
            min_eig = float(np.linalg.eigvalsh(rho)[0])
            if min_eig < -1e-8:
                raise IntegrationError(
                    f"state lost positivity at t={step * dt:.4g} "
                    f"(min eigenvalue {min_eig:.3e}); reduce dt"
                )
            if observer is not None:
                observer(step * dt, rho.copy())

    times = dt * np.arange(n_steps + 1)
    return PopulationTrace(times=times, pe=np.clip(pe, 0.0, 1.0))
