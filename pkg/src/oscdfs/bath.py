"""System parameters, environment specifications and golden-rule rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SCHWARZ_SLACK = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """Two-oscillator parameters in units with hbar = 1.

    ``k3`` is the environment-induced cross rate; the Schwarz bound
    ``k3**2 <= k1*k2`` is enforced at construction.
    """

    omega1: float = 1.0
    omega2: float = 1.0
    k1: float = 1.0
    k2: float = 1.0
    k3: float = 0.0
    nbar: float = 0.0
    num_modes: int = 2

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError(f"decay constants must be positive (k1={self.k1}, k2={self.k2})")
        if self.nbar < 0:
            raise ValueError(f"nbar must be non-negative, got {self.nbar}")
        if self.num_modes < 2:
            raise ValueError(f"num_modes must be at least 2, got {self.num_modes}")
        if self.k3 ** 2 > self.k1 * self.k2 * (1 + SCHWARZ_SLACK):
            raise ValueError(
                f"Schwarz bound violated: k3^2 = {self.k3 ** 2:g} > k1*k2 = {self.k1 * self.k2:g}"
            )

    @property
    def ktot(self) -> float:
        return self.k1 + self.k2

    @property
    def omega_mean(self) -> float:
        return 0.5 * (self.omega1 + self.omega2)

    @property
    def delta_omega(self) -> float:
        return 0.5 * (self.omega2 - self.omega1)

    @property
    def delta_k(self) -> float:
        return math.sqrt(self.k1 * self.k2) - self.k3

    @classmethod
    def from_deviations(
        cls,
        omega: float,
        k1: float,
        k2: float,
        delta_omega: float = 0.0,
        delta_k: float = 0.0,
        nbar: float = 0.0,
    ) -> "SystemParams":
        """omega1 = omega - delta_omega, omega2 = omega + delta_omega, k3 = sqrt(k1 k2) - delta_k."""
        return cls(
            omega1=omega - delta_omega,
            omega2=omega + delta_omega,
            k1=k1,
            k2=k2,
            k3=math.sqrt(k1 * k2) - delta_k,
            nbar=nbar,
        )


@dataclass(frozen=True)
class BathSpec:
    """Environment description.

    variant ``discrete``: ``modes`` is a sequence of ``(omega_k, c_k)``.
    variant ``lorentzian``: kernel ``(gamma * width / 2) exp(-i center tau - width tau)``;
    the golden-rule amplitude rate at resonance is ``gamma / 2``.
    variant ``flat``: Markov limit with amplitude rate ``kappa``.
    ``beta`` is the inverse temperature; ``math.inf`` means T = 0.
    """

    variant: str
    modes: tuple = ()
    gamma: float = 0.0
    center: float = 0.0
    width: float = 0.0
    kappa: float = 0.0
    beta: float = math.inf

    def __post_init__(self):
        if self.variant not in ("discrete", "lorentzian", "flat"):
            raise ValueError(f"unknown bath variant {self.variant!r}")
        if self.variant == "discrete":
            modes = tuple((float(w), complex(c)) for w, c in self.modes)
            if not modes:
                raise ValueError("discrete bath needs at least one mode")
            object.__setattr__(self, "modes", modes)
        if self.variant == "lorentzian" and self.width <= 0:
            raise ValueError("lorentzian bath needs a positive width")
        for name in ("gamma", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.beta <= 0:
            raise ValueError("beta must be positive (use math.inf for T=0)")

    @classmethod
    def discrete(cls, modes, beta: float = math.inf) -> "BathSpec":
        return cls("discrete", modes=tuple(modes), beta=beta)

    @classmethod
    def lorentzian(cls, gamma: float, center: float, width: float, beta: float = math.inf) -> "BathSpec":
        return cls("lorentzian", gamma=gamma, center=center, width=width, beta=beta)

    @classmethod
    def flat(cls, kappa: float, beta: float = math.inf) -> "BathSpec":
        return cls("flat", kappa=kappa, beta=beta)

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    def occupation(self, omega) -> np.ndarray:
        """Bose-Einstein mean occupation n(beta, omega)."""
        omega = np.asarray(omega, dtype=float)
        if self.zero_temperature:
            return np.zeros_like(omega)
        if np.any(omega <= 0):
            raise ValueError("thermal occupation needs positive mode frequencies")
        return 1.0 / np.expm1(self.beta * omega)

    def golden_rule_rate(self, omega: float) -> float:
        """Amplitude decay rate per unit |G|^2 at system frequency ``omega`` (continuum variants)."""
        if self.variant == "flat":
            return self.kappa
        if self.variant == "lorentzian":
            w = self.width
            return 0.5 * self.gamma * w * w / ((omega - self.center) ** 2 + w * w)
        raise ValueError("golden-rule rate of a discrete bath needs a smoothing width")


@dataclass(frozen=True)
class CouplingSpec:
    """Oscillator-bath couplings, either a full matrix g[i, k] or separable G_i * D_k."""

    g: Optional[np.ndarray] = None
    G: Optional[tuple] = None
    D: Optional[tuple] = field(default=None)

    def __post_init__(self):
        if self.g is None and self.G is None:
            raise ValueError("coupling needs either g or G")
        if self.g is not None and self.G is not None:
            raise ValueError("give either g or (G, D), not both")
        if self.G is not None:
            object.__setattr__(self, "G", tuple(complex(x) for x in self.G))
            if self.D is not None:
                object.__setattr__(self, "D", tuple(complex(x) for x in self.D))
        else:
            g = np.array(self.g, dtype=complex)
            if g.ndim != 2:
                raise ValueError("g must be a matrix (oscillator x bath mode)")
            g.setflags(write=False)
            object.__setattr__(self, "g", g)

    @classmethod
    def separable(cls, G: Sequence[complex], D: Optional[Sequence[complex]] = None) -> "CouplingSpec":
        return cls(G=tuple(G), D=None if D is None else tuple(D))

    @property
    def is_separable_form(self) -> bool:
        return self.G is not None

    def matrix(self) -> np.ndarray:
        if self.g is not None:
            return self.g
        if self.D is None:
            raise ValueError("separable coupling without D has no explicit matrix")
        return np.outer(self.G, self.D)

    def collective_weights(self) -> np.ndarray:
        """Normalized weights of the coupled collective mode, A_1 = sum_i w_i a_i."""
        if self.G is None:
            raise ValueError("collective mode is only defined for separable couplings")
        G = np.array(self.G)
        return G / np.linalg.norm(G)


@dataclass(frozen=True)
class Rates:
    k1: float
    k2: float
    k3: float


def rates_from_couplings(
    coupling: CouplingSpec,
    bath: BathSpec,
    omega: float = 0.0,
    smoothing: Optional[float] = None,
) -> Rates:
    """Fermi golden-rule decay constants k_ij = pi * sum_k g_ik g_jk^* rho(omega).

    Continuum baths need a separable coupling; the bath fixes |D|^2 rho at
    ``omega``. Discrete baths replace the delta function by a Lorentzian of
    half-width ``smoothing`` centred on ``omega``.
    """
    if bath.variant == "discrete":
        if smoothing is None or smoothing <= 0:
            raise NotImplementedError(
                "discrete bath needs a positive smoothing width for golden-rule rates"
            )
        g = coupling.matrix()
        freqs = np.array([w for w, _ in bath.modes])
        if g.shape[1] != freqs.size:
            raise ValueError(f"coupling has {g.shape[1]} bath modes, bath has {freqs.size}")
        weight = (smoothing / math.pi) / ((freqs - omega) ** 2 + smoothing ** 2)
        k = math.pi * (g * weight) @ g.conj().T
    else:
        if not coupling.is_separable_form:
            raise NotImplementedError(
                "continuum baths are supported for separable couplings only"
            )
        G = np.array(coupling.G)
        k = bath.golden_rule_rate(omega) * np.outer(G, G.conj())
    if k.shape[0] != 2:
        raise ValueError("rates are defined for two oscillators")
    k3 = k[0, 1]
    scale = max(abs(k[0, 0]), abs(k[1, 1]), 1e-300)
    if abs(k3.imag) > 1e-12 * scale:
        raise NotImplementedError(f"complex cross rate k3 = {k3} is not supported")
    return Rates(float(k[0, 0].real), float(k[1, 1].real), float(k3.real))


@dataclass(frozen=True)
class Classification:
    degenerate: bool
    separable: bool
    dfs_exists: bool
    delta_omega: float
    delta_k: float


def classify(
    params: SystemParams,
    tol_omega: Optional[float] = None,
    tol_k: Optional[float] = None,
) -> Classification:
    root = math.sqrt(params.k1 * params.k2)
    if tol_omega is None:
        tol_omega = 1e-9 * abs(params.omega_mean)
    if tol_k is None:
        tol_k = 1e-9 * root
    d_omega = params.delta_omega
    d_k = root - params.k3
    degenerate = abs(d_omega) <= tol_omega
    separable = d_k <= tol_k
    return Classification(degenerate, separable, degenerate and separable, d_omega, d_k)


def rotation_angle(params: SystemParams) -> float:
    """theta with tan(theta) = sqrt(k2/k1): A_1 = cos(theta) a_1 + sin(theta) a_2."""
    return math.atan(math.sqrt(params.k2 / params.k1))
