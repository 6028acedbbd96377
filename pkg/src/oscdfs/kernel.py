"""Memory-kernel solver for the damping amplitude eta(t) and the derived coefficients.

eta(t) obeys the Volterra equation

    eta' + i omega eta + int_0^t K(t - s) eta(s) ds = 0,   eta(0) = 1,

with bath correlation K(tau) = sum_k |c_k|^2 exp(-i omega_k tau). The
"conjugate" convention flips the sign of the exponent; it is kept for
sensitivity checks only, since with it a resonant mode at omega_k = omega != 0
no longer produces the exact single-excitation exchange e^{-i omega t} cos(g t).

From eta the module derives the master-equation rates lambda, delta,
epsilon and the thermal-channel coefficients (capN, v, x, z) such that the
one-mode evolution superoperator reads

    v exp((1 - v) a^+ . a) exp(x a^+a .) exp(x^* . a^+a) exp(z a . a^+)

with

    capN = 2 int_0^t eps(s) |eta(t)/eta(s)|^2 ds
    v = 1 / (1 + capN),  x = ln(eta / (1 + capN)),  z = 1 - |eta|^2 / (1 + capN).

These forms are the ones that preserve trace and reproduce the Markov
limit capN = nbar (1 - e^{-2kt}); the README lists the checks that pin them down.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np
from scipy.integrate import cumulative_simpson

from . import _backend
from ._csvio import write_csv
from .bath import BathSpec

CONVENTIONS = ("physical", "conjugate")
SINGULAR_ETA = 1e-6
# frequency grid used to sample a Lorentzian continuum for the thermal term
LORENTZ_SPAN = 40.0
LORENTZ_POINTS = 4001
_CHUNK = 256


def _sign(convention: str) -> float:
    if convention not in CONVENTIONS:
        raise ValueError(f"kernel convention must be one of {CONVENTIONS}, got {convention!r}")
    return -1.0 if convention == "physical" else 1.0


def bath_kernel(bath: BathSpec, tau, convention: str = "physical"):
    """Bath correlation K(tau) in 1/time^2.

    The flat variant is a delta function 2 kappa delta(tau): it evaluates to
    ``inf`` at tau = 0 and 0 elsewhere, and ``solve_eta`` replaces it by its
    exact Markov solution.
    """
    sign = _sign(convention)
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise ValueError("kernel is defined for tau >= 0")
    if bath.variant == "discrete":
        freqs = np.array([w for w, _ in bath.modes])
        weights = np.array([abs(c) ** 2 for _, c in bath.modes])
        flat = tau_arr.ravel()
        out = np.empty(flat.shape, dtype=complex)
        for lo in range(0, flat.size, 4096):
            blk = flat[lo:lo + 4096]
            out[lo:lo + 4096] = np.exp(sign * 1j * np.outer(blk, freqs)) @ weights
        out = out.reshape(tau_arr.shape)
    elif bath.variant == "lorentzian":
        amp = 0.5 * bath.gamma * bath.width
        out = amp * np.exp((sign * 1j * bath.center - bath.width) * tau_arr)
    else:
        out = np.where(tau_arr == 0.0, np.inf, 0.0).astype(complex)
    return complex(out) if np.ndim(tau) == 0 else out


@dataclass(frozen=True, eq=False)
class KernelSolution:
    t: np.ndarray
    eta: np.ndarray
    omega: float
    dt: float
    convention: str = "physical"
    lam: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None
    epsilon: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    capN: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    x: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    singular: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.singular is None:
            object.__setattr__(self, "singular", np.zeros(self.t.shape, dtype=bool))
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if isinstance(val, np.ndarray):
                val.setflags(write=False)

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; ``t`` must lie on the grid."""
        i = int(round(t / self.dt))
        if i < 0 or i >= self.t.size or abs(self.t[i] - t) > 1e-9 * max(self.dt, abs(t)):
            raise ValueError(f"t = {t} is not a grid point of this kernel solution")
        return i

    def to_csv(self, out: TextIO, comment: str | None = None) -> None:
        n = self.t.size
        nan = np.full(n, np.nan)

        def track(a):
            return nan if a is None else a

        x = self.x if self.x is not None else np.full(n, np.nan + 0j)
        header = ["t", "Re_eta", "Im_eta", "abs_eta", "lambda", "delta", "epsilon",
                  "capN", "v", "Re_x", "Im_x", "z"]
        cols = [self.t, self.eta.real, self.eta.imag, np.abs(self.eta), track(self.lam),
                track(self.delta), track(self.epsilon), track(self.capN), track(self.v),
                x.real, x.imag, track(self.z)]
        rows = (tuple(float(c[i]) for c in cols) for i in range(n))
        write_csv(out, header, rows, comment)


def make_grid(t_max: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_max < dt:
        raise ValueError(f"t_max ({t_max}) must be at least dt ({dt})")
    n = int(round(t_max / dt))
    return np.arange(n + 1) * dt


def solve_eta(
    bath: BathSpec,
    omega: float,
    t_max: float,
    dt: float,
    convention: str = "physical",
) -> KernelSolution:
    """Product-integration solution of the memory equation on a uniform grid.

    The free rotation is removed exactly (eta = e^{-i omega t} u) and the
    remaining Volterra equation for u is stepped with trapezoidal memory
    quadrature and a trapezoidal time step, second order overall.
    """
    _sign(convention)
    t = make_grid(t_max, dt)
    if bath.variant == "flat":
        eta = np.exp((-1j * omega - bath.kappa) * t)
    else:
        rotated = bath_kernel(bath, t, convention) * np.exp(1j * omega * t)
        u = _backend.volterra_trapezoid(rotated, dt)
        eta = np.exp(-1j * omega * t) * u
    return KernelSolution(t=t, eta=eta, omega=omega, dt=dt, convention=convention)


def derivative4(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative on a uniform grid."""
    n = y.size
    if n < 5:
        return np.gradient(y, h, edge_order=2 if n > 2 else 1)
    d = np.empty_like(y)
    d[2:-2] = (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * h)
    d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h)
    d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * h)
    d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * h)
    d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * h)
    return d


def unwrapped_phase(eta: np.ndarray, singular: np.ndarray) -> np.ndarray:
    raw = np.angle(eta)
    steps = np.diff(raw)
    wrapped = (steps + np.pi) % (2 * np.pi) - np.pi
    # a zero crossing of eta legitimately flips the phase by pi
    ok = ~(singular[1:] | singular[:-1])
    if np.any(np.abs(wrapped[ok]) > 0.5 * np.pi):
        raise ValueError(
            "phase of eta changes by more than pi/2 per step; reduce dt"
        )
    return np.concatenate(([raw[0]], raw[0] + np.cumsum(wrapped)))


def _mode_table(bath: BathSpec):
    """(frequencies, |c_k|^2 weights) used for the thermal transfer term."""
    if bath.variant == "discrete":
        freqs = np.array([w for w, _ in bath.modes])
        weights = np.array([abs(c) ** 2 for _, c in bath.modes])
        return freqs, weights
    w = bath.width
    lo = max(bath.center - LORENTZ_SPAN * w, 1e-9 * max(bath.center, w))
    freqs = np.linspace(lo, bath.center + LORENTZ_SPAN * w, LORENTZ_POINTS)
    dens = 0.5 * bath.gamma * w * (w / math.pi) / ((freqs - bath.center) ** 2 + w * w)
    return freqs, dens * (freqs[1] - freqs[0])


def thermal_transfer(sol: KernelSolution, bath: BathSpec) -> np.ndarray:
    """sum_k |c_k|^2 n_k |int_0^t e^{-i omega_k (t-s)} eta(s) ds|^2 on the grid."""
    t = sol.t
    if bath.zero_temperature:
        return np.zeros_like(t)
    if bath.variant == "flat":
        nbar = float(bath.occupation(sol.omega))
        return nbar * (1.0 - np.abs(sol.eta) ** 2)
    freqs, weights = _mode_table(bath)
    occ = bath.occupation(freqs)
    total = np.zeros_like(t)
    for lo in range(0, freqs.size, _CHUNK):
        f = freqs[lo:lo + _CHUNK]
        integrand = np.exp(1j * np.outer(t, f)) * sol.eta[:, None]
        inner = np.zeros_like(integrand)
        inner[1:] = np.cumsum(0.5 * sol.dt * (integrand[1:] + integrand[:-1]), axis=0)
        total += (np.abs(inner) ** 2) @ (weights[lo:lo + _CHUNK] * occ[lo:lo + _CHUNK])
    return total


def _flag_singular(eta: np.ndarray):
    """Samples where eta (nearly) vanishes, and those plus their stencil neighbours.

    A zero crossing between grid points shows up as a local minimum of |eta|
    next to a phase jump of more than pi/2; those samples are flagged too.
    """
    mag = np.abs(eta)
    small = mag < SINGULAR_ETA
    jump = np.abs(np.angle(eta[1:] * np.conj(eta[:-1]))) > 0.5 * np.pi
    dip = np.zeros_like(small)
    dip[1:-1] = (mag[1:-1] <= mag[:-2]) & (mag[1:-1] <= mag[2:])
    near_jump = np.zeros_like(small)
    near_jump[1:] |= jump
    near_jump[:-1] |= jump
    flags = small | (dip & near_jump)
    seed = flags.copy()
    for shift in (1, 2):
        flags[shift:] |= seed[:-shift]
        flags[:-shift] |= seed[shift:]
    return small, flags


def coefficients_from_eta(sol: KernelSolution, bath: BathSpec) -> KernelSolution:
    """Fill lambda, delta and epsilon; samples where eta vanishes are flagged and set to nan."""
    small, singular = _flag_singular(sol.eta)
    mag = np.abs(sol.eta)
    with np.errstate(divide="ignore"):
        log_mag = np.log(np.where(small, 1.0, mag))
    phase = unwrapped_phase(sol.eta, singular)
    lam = -derivative4(log_mag, sol.dt)
    delta = -derivative4(phase, sol.dt) - sol.omega
    if bath.variant == "flat":
        # exact Markov coefficients; the flat kernel has no finite samples
        lam = np.full_like(sol.t, bath.kappa)
        delta = np.zeros_like(sol.t)
    noise = thermal_transfer(sol, bath)
    if bath.zero_temperature:
        eps = np.zeros_like(sol.t)
    elif bath.variant == "flat":
        eps = np.full_like(sol.t, bath.kappa * float(bath.occupation(sol.omega)))
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = noise / mag ** 2
            eps = 0.5 * mag ** 2 * np.gradient(ratio, sol.dt, edge_order=2)
    lam = np.where(singular, np.nan, lam)
    delta = np.where(singular, np.nan, delta)
    eps = np.where(singular, np.nan, eps)
    return dataclasses.replace(
        sol, lam=lam, delta=delta, epsilon=eps, noise=noise, singular=singular
    )


def superop_coefficients(sol: KernelSolution) -> KernelSolution:
    """Fill capN, v, x, z from eta and epsilon (Simpson quadrature for capN)."""
    if sol.epsilon is None:
        raise ValueError("epsilon track missing; run coefficients_from_eta first")
    mag2 = np.abs(sol.eta) ** 2
    if np.all(sol.epsilon == 0):
        capN = np.zeros_like(sol.t)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = 2.0 * sol.epsilon / mag2
            if sol.t.size >= 3:
                acc = cumulative_simpson(integrand, dx=sol.dt, initial=0.0)
            else:
                acc = np.concatenate(([0.0], np.cumsum(0.5 * sol.dt * (integrand[1:] + integrand[:-1]))))
            capN = mag2 * acc
    phase = unwrapped_phase(sol.eta, sol.singular)
    with np.errstate(divide="ignore"):
        x = np.log(np.sqrt(mag2)) + 1j * phase - np.log1p(capN)
    v = 1.0 / (1.0 + capN)
    z = 1.0 - mag2 / (1.0 + capN)
    return dataclasses.replace(sol, capN=capN, v=v, x=x, z=z)


def solve_kernel(
    bath: BathSpec,
    omega: float,
    t_max: float,
    dt: float,
    convention: str = "physical",
) -> KernelSolution:
    """solve_eta followed by both coefficient stages."""
    sol = solve_eta(bath, omega, t_max, dt, convention)
    return superop_coefficients(coefficients_from_eta(sol, bath))


def markov_coefficients(ktot: float, nbar: float, omega: float, t):
    """Closed-form (v, x, z) for a memoryless bath with total amplitude rate ``ktot``."""
    t = np.asarray(t, dtype=float)
    decay = -np.expm1(-2.0 * ktot * t)
    capN = nbar * decay
    v = 1.0 / (1.0 + capN)
    x = (-1j * omega - ktot) * t - np.log1p(capN)
    z = (nbar + 1.0) * decay / (1.0 + capN)
    return v, x, z
