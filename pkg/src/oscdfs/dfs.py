"""Strong/weak decoherence states, perturbative amplitudes and decay-rate fitting.

Rates in ``PerturbationReport`` follow the amplitude convention (|psi> decays
as e^{-rate t}); the probability P(t) = |amplitude|^2 decays twice as fast,
and ``fit_decay`` works on P, so its rates are probability rates.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, TextIO

import numpy as np

from ._csvio import fmt, write_csv
from .bath import SystemParams

VALIDITY_LIMIT = 0.1


class FitDomainError(ValueError):
    """Log-linear fit requested on non-positive data."""


@dataclass(frozen=True)
class SdWdStates:
    psi_SD: tuple
    psi_WD: tuple
    alpha_SD: float
    alpha_WD: float
    phi_SD: float
    phi_WD: float


def average_rate(params: SystemParams, kind: str = "arithmetic") -> float:
    if kind == "arithmetic":
        return 0.5 * (params.k1 + params.k2)
    if kind == "geometric":
        return math.sqrt(params.k1 * params.k2)
    raise ValueError(f"unknown average {kind!r}")


def sd_wd_states(params: SystemParams, k_avg: Optional[float] = None) -> SdWdStates:
    """Initial states with minimal weak (SD) or strong (WD) decoherence content.

    psi_SD = (sqrt(k1)|1,0> + sqrt(k2) e^{+i dw/k}|0,1>) / sqrt(k1+k2)
    psi_WD = (sqrt(k2)|1,0> - sqrt(k1) e^{-i dw/k}|0,1>) / sqrt(k1+k2)
    """
    if k_avg is None:
        k_avg = average_rate(params)
    if not k_avg > 0:
        raise ValueError("k_avg must be positive")
    k1, k2 = params.k1, params.k2
    norm = math.sqrt(k1 + k2)
    phase = params.delta_omega / k_avg
    psi_sd = (math.sqrt(k1) / norm, math.sqrt(k2) * np.exp(1j * phase) / norm)
    psi_wd = (math.sqrt(k2) / norm, -math.sqrt(k1) * np.exp(-1j * phase) / norm)
    return SdWdStates(
        psi_SD=(complex(psi_sd[0]), complex(psi_sd[1])),
        psi_WD=(complex(psi_wd[0]), complex(psi_wd[1])),
        alpha_SD=math.atan(math.sqrt(k2 / k1)),
        alpha_WD=-math.atan(math.sqrt(k1 / k2)),
        phi_SD=phase,
        phi_WD=-phase,
    )


@dataclass(frozen=True)
class PerturbationReport:
    delta_omega: float
    delta_k: float
    zeta1: complex
    zeta2: complex
    xi1: complex
    xi2: complex
    tau_SD: float
    tau_WD: float
    ratio: float
    rate_fast: float
    rate_slow: float
    valid: bool

    def probability_rates(self) -> tuple[float, float]:
        """(fast, slow) decay rates of P(t) = |amplitude|^2."""
        return 2 * self.rate_fast, 2 * self.rate_slow

    def amplitudes(self, t):
        """(amp_10, amp_01) of the two-component approximation, without the e^{-i omega t} phase."""
        t = np.asarray(t, dtype=float)
        fast = np.exp(-self.rate_fast * t)
        slow = np.exp(-self.rate_slow * t)
        return self.zeta1 * fast + self.zeta2 * slow, self.xi1 * fast + self.xi2 * slow

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = []
        for key, val in self.as_dict().items():
            if isinstance(val, complex):
                lines.append(f"{key}.re: {fmt(val.real)}")
                lines.append(f"{key}.im: {fmt(val.imag)}")
            else:
                lines.append(f"{key}: {fmt(val)}")
        return "\n".join(lines) + "\n"

    def csv_header(self) -> list[str]:
        out = []
        for key, val in self.as_dict().items():
            out += [f"Re_{key}", f"Im_{key}"] if isinstance(val, complex) else [key]
        return out

    def csv_row(self) -> list:
        out = []
        for val in self.as_dict().values():
            out += [val.real, val.imag] if isinstance(val, complex) else [val]
        return out

    def to_csv(self, out: TextIO, comment: str | None = None) -> None:
        write_csv(out, self.csv_header(), [self.csv_row()], comment)


def perturbative_amplitudes(params: SystemParams, alpha: float, phi: float) -> PerturbationReport:
    """Fast/slow decomposition for slightly broken degeneracy and separability."""
    k1, k2 = params.k1, params.k2
    K = k1 + k2
    root = math.sqrt(k1 * k2)
    dw = params.delta_omega
    dk = params.delta_k
    ca = math.cos(alpha)
    sa = math.sin(alpha) * np.exp(1j * phi)
    zeta1 = ((k1 - 1j * dw) * ca + root * sa) / K
    zeta2 = ((k2 + 1j * dw) * ca - root * sa) / K
    xi1 = ((k2 + 1j * dw) * sa + root * ca) / K
    xi2 = ((k1 - 1j * dw) * sa - root * ca) / K
    rate_slow = 2 * dk * root / K
    tau_sd = 1.0 / K
    tau_wd = K / (2 * dk * root) if dk > 0 else math.inf
    omega = abs(params.omega_mean)
    dw_rel = abs(dw) / omega if omega > 0 else (0.0 if dw == 0 else math.inf)
    valid = dw_rel <= VALIDITY_LIMIT and abs(dk) / root <= VALIDITY_LIMIT
    return PerturbationReport(
        delta_omega=dw,
        delta_k=dk,
        zeta1=complex(zeta1),
        zeta2=complex(zeta2),
        xi1=complex(xi1),
        xi2=complex(xi2),
        tau_SD=tau_sd,
        tau_WD=tau_wd,
        ratio=tau_wd / tau_sd,
        rate_fast=K,
        rate_slow=rate_slow,
        valid=bool(valid),
    )


@dataclass(frozen=True)
class DecayFit:
    rate_fast: float
    rate_slow: float
    amp_fast: float
    amp_slow: float
    residual: float


def default_windows(params: SystemParams, t_max: float):
    rep = perturbative_amplitudes(params, 0.0, 0.0)
    fast = (0.0, 2 * rep.tau_SD)
    slow = (5 * rep.tau_SD, min(3 * rep.tau_WD, t_max))
    return fast, slow


def _window(t, lo, hi):
    mask = (t >= lo - 1e-12 * max(1.0, abs(lo))) & (t <= hi + 1e-12 * max(1.0, abs(hi)))
    if np.count_nonzero(mask) < 3:
        raise ValueError(f"window ({lo}, {hi}) holds fewer than 3 samples")
    return mask


def _loglinear(t, y):
    if np.any(y <= 0):
        raise FitDomainError("non-positive values in fit window")
    slope, intercept = np.polyfit(t, np.log(y), 1)
    return -slope, math.exp(intercept)


def fit_decay(trajectory, window_fast, window_slow) -> DecayFit:
    """Two-stage log-linear fit of P(t) = A_f e^{-r_f t} + A_s e^{-r_s t}.

    ``trajectory`` is anything with ``t`` and ``P`` arrays. The slow rate comes
    from ln P on the late window; the fast rate from the early-window
    remainder once the slow component is subtracted. If no remainder is left
    the trajectory is a single exponential and the fast component is reported
    with the slow rate and zero amplitude.
    """
    t = np.asarray(trajectory.t, dtype=float)
    P = np.asarray(trajectory.P, dtype=float)
    ms = _window(t, *window_slow)
    mf = _window(t, *window_fast)
    rate_slow, amp_slow = _loglinear(t[ms], P[ms])
    rem = P[mf] - amp_slow * np.exp(-rate_slow * t[mf])
    scale = np.max(np.abs(P[mf]))
    if np.all(rem > 1e-9 * scale):
        rate_fast, amp_fast = _loglinear(t[mf], rem)
    else:
        rate_fast, amp_fast = rate_slow, 0.0
    union = ms | mf
    tu = t[union]
    model = amp_slow * np.exp(-rate_slow * tu) + amp_fast * np.exp(-rate_fast * tu)
    if np.any(P[union] <= 0):
        raise FitDomainError("non-positive values in fit window")
    residual = float(np.sqrt(np.mean((np.log(P[union]) - np.log(model)) ** 2)))
    return DecayFit(float(rate_fast), float(rate_slow), float(amp_fast), float(amp_slow), residual)
