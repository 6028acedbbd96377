"""Master-equation generators, RK4 time evolution and the analytic two-oscillator solution."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, TextIO

import numpy as np
from scipy.linalg import expm

from . import _backend
from ._csvio import write_csv
from .bath import SystemParams, classify
from .fock import (
    DensityMatrix,
    FockSpace,
    collective_operator,
    ladder_operator,
    pure_state_density,
    rotation_matrix,
)
from .kernel import KernelSolution

log = logging.getLogger(__name__)

TRACE_DRIFT_WARN = 1e-8
TRACE_DRIFT_FAIL = 1e-6
EIG_WARN = -1e-8
EIG_FAIL = -1e-6
# dense superoperator up to this many entries per side; matrix-free beyond
DENSE_LIMIT = 4096


class DomainError(ValueError):
    """A closed form was requested outside the parameter regime it covers."""


class StepSizeError(RuntimeError):
    """RK4 lost trace or positivity; the step is too large for the generator."""


@dataclass(eq=False)
class Liouvillian:
    """Linear generator rho -> sum_j coef_j * L_j rho R_j.

    ``rate_scale`` is the largest frequency or rate in the generator and sets
    the default RK4 step.
    """

    space: FockSpace
    terms: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    rate_scale: float = 0.0

    def add(self, coef: complex, left: Optional[np.ndarray], right: Optional[np.ndarray], label: str):
        self.terms.append((complex(coef), left, right))
        self.labels.append(label)
        self.__dict__.pop("matrix", None)

    def add_hamiltonian(self, H: np.ndarray, label: str = "H"):
        self.add(-1j, H, None, f"-i[{label},.]")
        self.add(1j, None, H, f"-i[{label},.]")

    def add_dissipator(self, rate: float, A: np.ndarray, label: str = "A"):
        """rate * (2 A rho A^+ - A^+A rho - rho A^+A)."""
        Ad = A.conj().T
        AdA = Ad @ A
        self.add(2 * rate, A, Ad, f"D[{label}]")
        self.add(-rate, AdA, None, f"D[{label}]")
        self.add(-rate, None, AdA, f"D[{label}]")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho, dtype=complex)
        for coef, left, right in self.terms:
            term = rho if left is None else left @ rho
            if right is not None:
                term = term @ right
            out += coef * term
        return out

    @cached_property
    def matrix(self) -> np.ndarray:
        """Superoperator acting on row-major vec(rho)."""
        d = self.space.dim
        eye = np.eye(d, dtype=complex)
        out = np.zeros((d * d, d * d), dtype=complex)
        for coef, left, right in self.terms:
            lm = eye if left is None else left
            rm = eye if right is None else right
            out += coef * np.kron(lm, rm.T)
        return out


def build_markov_liouvillian(
    space: FockSpace,
    omega,
    theta: Optional[float] = None,
    rates: tuple = ((1.0,), 0.0),
    rotation: Optional[np.ndarray] = None,
) -> Liouvillian:
    """Memoryless generator with one collective mode coupled to the bath.

    ``omega`` is a scalar or one frequency per collective mode. For two modes
    the collective basis is fixed by ``theta``; for more modes pass an
    orthogonal ``rotation`` whose first row defines the coupled mode.
    ``rates`` is ``(k_list, nbar)``; the coupled mode loses at sum(k)(nbar+1)
    and gains at sum(k) nbar.
    """
    N = space.num_modes
    if rotation is None:
        if theta is None:
            raise ValueError("need theta (two modes) or an explicit rotation matrix")
        if N != 2:
            raise ValueError("theta defines the rotation for two modes only; pass rotation=")
        rotation = rotation_matrix(theta)
    rotation = np.asarray(rotation, dtype=float)
    if rotation.shape != (N, N):
        raise ValueError(f"rotation must be {N}x{N}, got {rotation.shape}")
    if not np.allclose(rotation @ rotation.T, np.eye(N), atol=1e-12):
        raise ValueError("rotation matrix is not orthogonal")
    omegas = np.broadcast_to(np.asarray(omega, dtype=float), (N,))
    k_list, nbar = rates
    ktot = float(np.sum(k_list))
    if nbar < 0 or ktot < 0:
        raise ValueError("rates and nbar must be non-negative")

    L = Liouvillian(space)
    modes = [collective_operator(space, rotation[i]).matrix for i in range(N)]
    H = sum(w * (A.conj().T @ A) for w, A in zip(omegas, modes))
    L.add_hamiltonian(H, "H0")
    if ktot > 0:
        L.add_dissipator(ktot * (nbar + 1.0), modes[0], "A1")
        if nbar > 0:
            L.add_dissipator(ktot * nbar, modes[0].conj().T, "A1^+")
    L.rate_scale = max(float(np.max(np.abs(omegas))), ktot * (2 * nbar + 1))
    return L


def build_general2_liouvillian(space: FockSpace, params: SystemParams) -> Liouvillian:
    """Zero-temperature two-oscillator generator with direct and cross damping."""
    if space.num_modes != 2:
        raise ValueError("general two-oscillator generator needs a two-mode space")
    a1 = ladder_operator(space, 1).matrix
    a2 = ladder_operator(space, 2).matrix
    n1 = a1.conj().T @ a1
    n2 = a2.conj().T @ a2
    L = Liouvillian(space)
    L.add_hamiltonian(params.omega1 * n1 + params.omega2 * n2, "H0")
    L.add_dissipator(params.k1, a1, "a1")
    L.add_dissipator(params.k2, a2, "a2")
    if params.k3 != 0.0:
        k3 = params.k3
        hop = a1.conj().T @ a2 + a2.conj().T @ a1
        L.add(2 * k3, a1, a2.conj().T, "cross")
        L.add(2 * k3, a2, a1.conj().T, "cross")
        L.add(-k3, hop, None, "cross")
        L.add(-k3, None, hop, "cross")
    L.rate_scale = max(abs(params.omega1), abs(params.omega2), params.k1 + params.k2)
    return L


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    space: FockSpace
    rho0: np.ndarray

    def state(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.space, self.states[i], validate=False)

    @cached_property
    def trace(self) -> np.ndarray:
        return np.real(np.trace(self.states, axis1=1, axis2=2))

    @cached_property
    def purity(self) -> np.ndarray:
        return np.real(np.einsum("nij,nji->n", self.states, self.states))

    @cached_property
    def min_eigenvalue(self) -> np.ndarray:
        herm = 0.5 * (self.states + np.conj(np.swapaxes(self.states, 1, 2)))
        return np.linalg.eigvalsh(herm)[:, 0]

    @cached_property
    def hermiticity_error(self) -> np.ndarray:
        diff = self.states - np.conj(np.swapaxes(self.states, 1, 2))
        return np.max(np.abs(diff), axis=(1, 2))

    @cached_property
    def populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.states, axis1=1, axis2=2))

    @property
    def P(self) -> np.ndarray:
        """Probability of not being in the joint vacuum."""
        return self.trace - self.populations[:, 0]

    @cached_property
    def fidelity_to_initial(self) -> np.ndarray:
        return np.real(np.einsum("ij,nji->n", self.rho0, self.states))

    def element(self, bra: Sequence[int], ket: Sequence[int]) -> np.ndarray:
        return self.states[:, self.space.index(bra), self.space.index(ket)]

    def to_csv(self, out: TextIO, comment: str | None = None) -> None:
        labels = self.space.labels()
        header = ["t", "P", "fidelity_to_initial", "trace", "purity", "min_eig"]
        header += [f"pop_{lab}" for lab in labels]
        coh = None
        if self.space.num_modes == 2:
            header += ["Re_rho_10_01", "Im_rho_10_01"]
            coh = self.element((1, 0), (0, 1))
        cols = [self.t, self.P, self.fidelity_to_initial, self.trace, self.purity, self.min_eigenvalue]
        pops = self.populations

        def rows():
            for i in range(self.t.size):
                row = [float(c[i]) for c in cols] + [float(p) for p in pops[i]]
                if coh is not None:
                    row += [float(coh[i].real), float(coh[i].imag)]
                yield row

        write_csv(out, header, rows(), comment)


def default_dt(liouvillian: Liouvillian, t_max: float) -> float:
    scale = liouvillian.rate_scale
    dt = 1e-2 * t_max
    if scale > 0:
        dt = min(dt, 1e-2 / scale)
    return dt


def time_grid(t_max: float, dt: float, store_every: int = 1):
    """(nsteps, step, stored sample times) used by ``integrate``; the last step lands on t_max."""
    nsteps = max(int(math.ceil(t_max / dt - 1e-9)), 1) if t_max > 0 else 0
    h = t_max / nsteps if nsteps else 0.0
    idx = np.arange(0, nsteps + 1, store_every)
    if idx[-1] != nsteps:
        idx = np.append(idx, nsteps)
    return nsteps, h, idx * h


def rk4_step_matrix(L: np.ndarray, h: float) -> np.ndarray:
    """Classical RK4 propagator for a linear autonomous system, sum_{j<=4} (hL)^j / j!."""
    eye = np.eye(L.shape[0], dtype=complex)
    hL = h * L
    return eye + hL @ (eye + hL @ (eye + hL @ (eye + hL / 4) / 3) / 2)


def _rk4_matrix_free(L: Liouvillian, rho0, h, nsteps, store_every):
    d = L.space.dim
    x = rho0.copy()
    out = [x.ravel().copy()]
    for n in range(1, nsteps + 1):
        k1 = L.apply(x)
        k2 = L.apply(x + 0.5 * h * k1)
        k3 = L.apply(x + 0.5 * h * k2)
        k4 = L.apply(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        x = 0.5 * (x + x.conj().T)
        if n % store_every == 0 or n == nsteps:
            out.append(x.ravel().copy())
    return np.array(out).reshape(-1, d * d)


def integrate(
    liouvillian: Liouvillian,
    rho0: DensityMatrix,
    t_max: float,
    dt: Optional[float] = None,
    store_every: int = 1,
) -> Trajectory:
    """Fourth-order Runge-Kutta evolution with re-Hermitization after every step."""
    if rho0.space != liouvillian.space:
        raise ValueError("initial state and generator live on different spaces")
    if dt is None:
        dt = default_dt(liouvillian, t_max)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    if store_every < 1:
        raise ValueError("store_every must be >= 1")
    nsteps, h, times = time_grid(t_max, dt, store_every)
    d = liouvillian.space.dim
    if nsteps == 0:
        flat = rho0.matrix.ravel()[None, :]
    elif d * d <= DENSE_LIMIT:
        step = rk4_step_matrix(liouvillian.matrix, h)
        flat = _backend.rk4_linear(step, rho0.matrix.ravel(), nsteps, store_every, d)
    else:
        flat = _rk4_matrix_free(liouvillian, np.array(rho0.matrix), h, nsteps, store_every)
    traj = Trajectory(
        t=times,
        states=np.asarray(flat).reshape(-1, d, d),
        space=liouvillian.space,
        rho0=np.array(rho0.matrix),
    )
    _check_trajectory(traj)
    return traj


def _check_trajectory(traj: Trajectory) -> None:
    drift = float(np.max(np.abs(traj.trace - traj.trace[0])))
    if drift > TRACE_DRIFT_FAIL:
        raise StepSizeError(f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_FAIL:g}; reduce dt")
    if drift > TRACE_DRIFT_WARN:
        log.warning("trace drift %.3e above %.0e", drift, TRACE_DRIFT_WARN)
    lo = float(np.min(traj.min_eigenvalue))
    if lo < EIG_FAIL:
        raise StepSizeError(f"state lost positivity (eigenvalue {lo:.3e}); reduce dt")
    if lo < EIG_WARN:
        log.warning("smallest eigenvalue %.3e below %.0e", lo, EIG_WARN)


def single_excitation_state(space: FockSpace, alpha: float, phi: float) -> DensityMatrix:
    """cos(alpha)|1,0> + sin(alpha) e^{i phi}|0,1>."""
    return pure_state_density(
        space, [((1, 0), math.cos(alpha)), ((0, 1), math.sin(alpha) * np.exp(1j * phi))]
    )


# ---------------------------------------------------------------------------
# analytic single-excitation solution


@dataclass(frozen=True)
class AnalyticCoefficients:
    R: complex
    c: complex
    r: complex
    delta_plus: complex
    delta_minus: complex


def analytic_coefficients(params: SystemParams) -> AnalyticCoefficients:
    R = 0.5 * (params.k1 + params.k2) + 0.5j * (params.omega1 + params.omega2)
    c = (params.k2 - params.k1) + 1j * (params.omega2 - params.omega1)
    r = complex(np.sqrt(complex(c * c + 4 * params.k3 ** 2)))
    if r.real < 0 or (r.real == 0 and r.imag < 0):
        r = -r
    return AnalyticCoefficients(R=R, c=c, r=r, delta_plus=c + r, delta_minus=c - r)


def _sinhc(y):
    y = np.asarray(y, dtype=complex)
    out = np.ones_like(y)
    big = np.abs(y) > 1e-3
    out[big] = np.sinh(y[big]) / y[big]
    ys = y[~big] ** 2
    out[~big] = 1 + ys / 6 + ys * ys / 120
    return out


@dataclass(frozen=True)
class Amplitudes:
    M_plus: np.ndarray
    M_minus: np.ndarray
    Q: np.ndarray


def amplitude_functions(coeffs: AnalyticCoefficients, k3: float, t) -> Amplitudes:
    """Single-excitation propagator entries.

    M_plus propagates |1,0> onto itself, M_minus |0,1> onto itself, Q couples
    the two. Small |r t| uses the cosh / sinh(y)/y form, which is continuous
    through r = 0.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    R, c, r = coeffs.R, coeffs.c, coeffs.r
    y = 0.5 * r * t
    small = np.abs(y) < 0.5
    Mp = np.empty(t.shape, dtype=complex)
    Mm = np.empty(t.shape, dtype=complex)
    Q = np.empty(t.shape, dtype=complex)
    if np.any(small):
        ts = t[small]
        ys = y[small]
        damp = np.exp(-R * ts)
        ch = np.cosh(ys)
        sh = 0.5 * ts * _sinhc(ys)
        Mp[small] = damp * (ch + c * sh)
        Mm[small] = damp * (ch - c * sh)
        Q[small] = -2 * k3 * sh * damp
    if np.any(~small):
        tb = t[~small]
        slow = np.exp((-R + 0.5 * r) * tb)
        fast = np.exp((-R - 0.5 * r) * tb)
        cr = c / r
        Mp[~small] = 0.5 * (fast * (1 - cr) + slow * (1 + cr))
        Mm[~small] = 0.5 * (fast * (1 + cr) + slow * (1 - cr))
        Q[~small] = (k3 / r) * (fast - slow)
    if scalar:
        return Amplitudes(Mp[0], Mm[0], Q[0])
    return Amplitudes(Mp, Mm, Q)


@dataclass(frozen=True)
class SingleExcitation:
    P: np.ndarray
    amp_10: np.ndarray
    amp_01: np.ndarray


def single_excitation_evolution(params: SystemParams, alpha: float, phi: float, t) -> SingleExcitation:
    """rho(t) = P |psi(t)><psi(t)| + (1 - P)|0,0><0,0| for the initial state
    cos(alpha)|1,0> + sin(alpha) e^{i phi}|0,1> at zero temperature.

    ``amp_10``/``amp_01`` are the unnormalized components sqrt(P) psi(t).
    """
    amps = amplitude_functions(analytic_coefficients(params), params.k3, t)
    ca = math.cos(alpha)
    sa = math.sin(alpha) * np.exp(1j * phi)
    a10 = ca * amps.M_plus + sa * amps.Q
    a01 = sa * amps.M_minus + ca * amps.Q
    P = np.abs(a10) ** 2 + np.abs(a01) ** 2
    return SingleExcitation(P=P, amp_10=a10, amp_01=a01)


@dataclass(frozen=True)
class Asymptotics:
    P_inf: float
    psi_inf: tuple
    F_inf: float


def asymptotics(params: SystemParams, alpha: float, phi: float) -> Asymptotics:
    """Long-time state when the decoherence-free subspace exists."""
    if not classify(params).dfs_exists:
        raise DomainError(
            "asymptotic closed form needs degenerate frequencies and separable coupling; "
            "evaluate single_excitation_evolution at large t instead"
        )
    k1, k2 = params.k1, params.k2
    K = k1 + k2
    s1, s2 = math.sqrt(k1), math.sqrt(k2)
    ca, sa = math.cos(alpha), math.sin(alpha)
    ket = s2 * ca - s1 * np.exp(1j * phi) * sa
    bra = s2 * ca - s1 * np.exp(-1j * phi) * sa
    P = float(abs(ket) ** 2 / K)
    F = float(abs(ket * bra / K) ** 2)
    return Asymptotics(P_inf=P, psi_inf=(s2 / math.sqrt(K), -s1 / math.sqrt(K)), F_inf=F)


# ---------------------------------------------------------------------------
# factorized evolution superoperator


def mode_rotation_unitary(space: FockSpace, theta: float) -> np.ndarray:
    """U with U a_1 U^+ = cos(theta) a_1 + sin(theta) a_2 (exact on total occupation <= cutoff)."""
    a1 = ladder_operator(space, 1).matrix
    a2 = ladder_operator(space, 2).matrix
    gen = a2.conj().T @ a1 - a1.conj().T @ a2
    return expm(theta * gen)


def _thermal_channel_mode1(space: FockSpace, v: float, x: complex, z: float, rho: np.ndarray) -> np.ndarray:
    a = ladder_operator(space, 1).matrix
    ad = a.conj().T
    n1 = np.real(np.diag(ladder_operator(space, 1, "number").matrix))
    # exp(z a . a^+): a is nilpotent in the truncated space, so the series is finite
    acc = rho.copy()
    term = rho.copy()
    for m in range(1, space.cutoff + 1):
        term = (z / m) * (a @ term @ ad)
        acc += term
    phase = np.exp(x * n1)
    acc = phase[:, None] * acc * np.conj(phase)[None, :]
    out = acc.copy()
    term = acc.copy()
    for m in range(1, space.cutoff + 1):
        term = ((1 - v) / m) * (ad @ term @ a)
        out += term
    return v * out


def markov_superoperator_apply(
    space: FockSpace,
    theta: float,
    sol: KernelSolution,
    t: float,
    rho0: DensityMatrix,
) -> DensityMatrix:
    """Rotate to collective modes, damp the coupled one with (v, x, z), rotate back.

    The decoupled mode evolves freely at ``sol.omega``.
    """
    if space.num_modes != 2:
        raise ValueError("factorized superoperator is defined for two modes")
    if rho0.space != space:
        raise ValueError("state lives on a different space")
    if sol.v is None or sol.x is None or sol.z is None:
        raise ValueError("kernel solution lacks v, x, z; run superop_coefficients")
    i = sol.index_of(t)
    if sol.singular[i]:
        raise ValueError(f"superoperator coefficients are singular at t = {t}")
    U = mode_rotation_unitary(space, theta)
    rho = U.conj().T @ rho0.matrix @ U
    rho = _thermal_channel_mode1(space, float(sol.v[i]), complex(sol.x[i]), float(sol.z[i]), rho)
    n2 = np.real(np.diag(ladder_operator(space, 2, "number").matrix))
    free = np.exp(-1j * sol.omega * sol.t[i] * n2)
    rho = free[:, None] * rho * np.conj(free)[None, :]
    rho = U @ rho @ U.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.real(np.trace(rho))
    if abs(tr - 1) > 1e-8:
        raise ValueError(
            f"factorized map lost trace ({tr:.12g}); raise the cutoff"
        )
    return DensityMatrix(space, rho, validate=False)

