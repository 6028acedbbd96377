import io
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscdfs.bath import SystemParams
from oscdfs.dfs import (
    FitDomainError,
    average_rate,
    default_windows,
    fit_decay,
    perturbative_amplitudes,
    sd_wd_states,
)
from oscdfs.fock import FockSpace
from oscdfs.propagator import asymptotics, build_general2_liouvillian, integrate, single_excitation_state

positive = st.floats(0.05, 20.0)


def _series(t, P):
    return SimpleNamespace(t=np.asarray(t), P=np.asarray(P))


def test_equal_rates_states():
    s = sd_wd_states(SystemParams(k1=2.0, k2=2.0, k3=2.0))
    r = 1 / math.sqrt(2)
    assert s.psi_SD == pytest.approx((r, r))
    assert s.psi_WD == pytest.approx((r, -r))


def test_unequal_rates_weak_state():
    s = sd_wd_states(SystemParams(k1=1.0, k2=4.0, k3=2.0))
    assert s.psi_WD == pytest.approx((2 / math.sqrt(5), -1 / math.sqrt(5)))
    assert (math.cos(s.alpha_WD), math.sin(s.alpha_WD)) == pytest.approx(s.psi_WD)
    assert (math.cos(s.alpha_SD), math.sin(s.alpha_SD)) == pytest.approx(s.psi_SD)


@given(k1=positive, k2=positive, dw=st.floats(-1.0, 1.0), k_avg=st.none() | positive)
@settings(max_examples=100, deadline=None)
def test_states_unit_norm(k1, k2, dw, k_avg):
    p = SystemParams.from_deviations(omega=2.0, k1=k1, k2=k2, delta_omega=dw)
    s = sd_wd_states(p, k_avg)
    for psi in (s.psi_SD, s.psi_WD):
        assert abs(abs(psi[0]) ** 2 + abs(psi[1]) ** 2 - 1) <= 1e-12


@given(k1=positive, k2=positive)
@settings(max_examples=100, deadline=None)
def test_states_orthogonal_when_degenerate(k1, k2):
    s = sd_wd_states(SystemParams(k1=k1, k2=k2))
    overlap = np.conj(s.psi_SD[0]) * s.psi_WD[0] + np.conj(s.psi_SD[1]) * s.psi_WD[1]
    assert abs(overlap) <= 1e-12


def test_average_rate_options():
    p = SystemParams(k1=1.0, k2=4.0)
    assert average_rate(p) == 2.5
    assert average_rate(p, "geometric") == 2.0
    with pytest.raises(ValueError):
        average_rate(p, "harmonic")
    with pytest.raises(ValueError):
        sd_wd_states(p, k_avg=0.0)


@given(k1=positive, k2=positive, dk=st.floats(0.0, 0.05))
@settings(max_examples=100, deadline=None)
def test_components_vanish_on_preferred_states(k1, k2, dk):
    p = SystemParams.from_deviations(omega=1.0, k1=k1, k2=k2, delta_k=dk * math.sqrt(k1 * k2))
    s = sd_wd_states(p)
    wd = perturbative_amplitudes(p, s.alpha_WD, s.phi_WD)
    assert abs(wd.zeta1) <= 1e-12 and abs(wd.xi1) <= 1e-12
    sd = perturbative_amplitudes(p, s.alpha_SD, s.phi_SD)
    assert abs(sd.zeta2) <= 1e-12 and abs(sd.xi2) <= 1e-12


@given(alpha=st.floats(0, math.pi), phi=st.floats(0, 2 * math.pi), k1=positive, k2=positive)
@settings(max_examples=100, deadline=None)
def test_components_sum_to_initial_state(alpha, phi, k1, k2):
    rep = perturbative_amplitudes(SystemParams(k1=k1, k2=k2, k3=math.sqrt(k1 * k2)), alpha, phi)
    assert rep.zeta1 + rep.zeta2 == pytest.approx(math.cos(alpha), abs=1e-12)
    assert rep.xi1 + rep.xi2 == pytest.approx(math.sin(alpha) * np.exp(1j * phi), abs=1e-12)


@given(alpha=st.floats(0, math.pi), phi=st.floats(0, 2 * math.pi), k1=positive, k2=positive)
@settings(max_examples=100, deadline=None)
def test_slow_component_matches_asymptotics(alpha, phi, k1, k2):
    p = SystemParams(k1=k1, k2=k2, k3=math.sqrt(k1 * k2))
    rep = perturbative_amplitudes(p, alpha, phi)
    slow = abs(rep.zeta2) ** 2 + abs(rep.xi2) ** 2
    assert abs(slow - asymptotics(p, alpha, phi).P_inf) <= 1e-10


def test_time_scales():
    rep = perturbative_amplitudes(SystemParams.from_deviations(1.0, 1.0, 1.0, delta_k=0.01), 0.0, 0.0)
    assert rep.tau_SD == pytest.approx(0.5)
    assert rep.tau_WD == pytest.approx(100.0)
    assert rep.ratio == pytest.approx(200.0)
    assert rep.probability_rates() == pytest.approx((4.0, 0.02))
    assert rep.valid
    separable = perturbative_amplitudes(SystemParams(k1=1.0, k2=1.0, k3=1.0), 0.0, 0.0)
    assert math.isinf(separable.tau_WD) and separable.rate_slow == 0.0


def test_validity_flag():
    p = SystemParams.from_deviations(1.0, 1.0, 1.0, delta_omega=0.5)
    assert not perturbative_amplitudes(p, 0.0, 0.0).valid


def test_report_exports():
    rep = perturbative_amplitudes(SystemParams.from_deviations(1.0, 1.0, 2.0, delta_k=0.01), 0.3, 0.1)
    text = rep.to_text()
    assert "zeta1.re:" in text and "ratio:" in text
    buf = io.StringIO()
    rep.to_csv(buf)
    header, row = buf.getvalue().splitlines()
    assert header.split(",")[:4] == ["delta_omega", "delta_k", "Re_zeta1", "Im_zeta1"]
    assert len(header.split(",")) == len(row.split(","))


def test_fit_single_exponential():
    t = np.linspace(0, 5, 501)
    fit = fit_decay(_series(t, np.exp(-2 * t)), (0, 1), (1, 5))
    assert fit.rate_slow == pytest.approx(2, abs=1e-6)
    assert fit.rate_fast == pytest.approx(2, abs=1e-6)
    assert fit.amp_fast == pytest.approx(0, abs=1e-6)


def test_fit_two_exponentials_round_trip():
    t = np.linspace(0, 150, 15001)
    P = 0.5 * np.exp(-4 * t) + 0.5 * np.exp(-0.04 * t)
    fit = fit_decay(_series(t, P), (0, 1), (50, 150))
    assert fit.rate_fast == pytest.approx(4.0, rel=0.01)
    assert fit.rate_slow == pytest.approx(0.04, rel=0.01)


def test_fit_round_trip_pins_probability_convention():
    """Amplitudes decaying at the report's rates give P decaying at twice those rates."""
    p = SystemParams.from_deviations(1.0, 1.0, 1.0, delta_k=0.02)
    rep = perturbative_amplitudes(p, 0.0, 0.0)
    t = np.linspace(0, 3 * rep.tau_WD, 30001)
    a10, a01 = rep.amplitudes(t)
    fit = fit_decay(_series(t, np.abs(a10) ** 2 + np.abs(a01) ** 2), *default_windows(p, t[-1]))
    fast, slow = rep.probability_rates()
    assert fit.rate_slow == pytest.approx(slow, rel=1e-6)
    assert fit.rate_fast == pytest.approx(fast, rel=0.01)


def test_fit_constant_probability():
    t = np.linspace(0, 10, 101)
    fit = fit_decay(_series(t, np.ones_like(t)), (0, 1), (2, 10))
    assert abs(fit.rate_fast) <= 1e-9 and abs(fit.rate_slow) <= 1e-9


def test_fit_errors():
    t = np.linspace(0, 1, 11)
    with pytest.raises(ValueError, match="fewer than 3"):
        fit_decay(_series(t, np.exp(-t)), (0, 0.1), (0.5, 1))
    with pytest.raises(FitDomainError):
        fit_decay(_series(t, np.zeros_like(t)), (0, 0.5), (0.5, 1))


def _fit_integrated(p, alpha, phi, t_max, dt):
    space = FockSpace(2, 1)
    traj = integrate(build_general2_liouvillian(space, p), single_excitation_state(space, alpha, phi),
                     t_max, dt=dt, store_every=10)
    return fit_decay(traj, *default_windows(p, t_max))


def test_dfs_case_fit_has_no_slow_decay():
    p = SystemParams(k1=1.0, k2=3.0, k3=math.sqrt(3.0))
    s = sd_wd_states(p)
    fit = _fit_integrated(p, s.alpha_WD, s.phi_WD, 10.0, 1e-3)
    assert abs(fit.rate_slow) <= 1e-6 * p.ktot


@pytest.mark.parametrize("k1,k2,rel_dk", [(1.0, 1.0, 0.01), (0.5, 2.0, 0.02), (3.0, 1.0, 0.05)])
def test_fitted_rates_match_predictions(k1, k2, rel_dk):
    p = SystemParams.from_deviations(1.0, k1, k2, delta_k=rel_dk * math.sqrt(k1 * k2))
    s = sd_wd_states(p)
    rep = perturbative_amplitudes(p, s.alpha_WD, s.phi_WD)
    fast, slow = rep.probability_rates()
    wd = _fit_integrated(p, s.alpha_WD, s.phi_WD, 3 * rep.tau_WD, 0.01 / p.ktot)
    assert 0.9 * slow <= wd.rate_slow <= 1.1 * slow
    # the strong-decoherence state is gone after a few tau_SD; fit only where P is resolvable
    sd = _fit_integrated(p, s.alpha_SD, s.phi_SD, 8 * rep.tau_SD, 0.001 / p.ktot)
    assert 0.9 * fast <= sd.rate_fast <= 1.1 * fast


def test_weak_angle_uses_rate_ratio_k1_over_k2():
    """tan(alpha_WD) = -sqrt(k1/k2); the reciprocal ratio keeps a fast component when k1 != k2."""
    p = SystemParams(k1=1.0, k2=4.0, k3=2.0)
    assert math.tan(sd_wd_states(p).alpha_WD) == pytest.approx(-0.5)
    other = perturbative_amplitudes(p, -math.atan(math.sqrt(p.k2 / p.k1)), 0.0)
    assert abs(other.zeta1) > 0.1
