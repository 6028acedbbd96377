import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oscdfs.bath import BathSpec, CouplingSpec, SystemParams, classify, rates_from_couplings, rotation_angle
from oscdfs.kernel import solve_eta

rates = st.floats(1e-3, 1e3)


def test_schwarz_guard_message():
    with pytest.raises(ValueError, match="Schwarz"):
        SystemParams(k1=1.0, k2=1.0, k3=2.0)


@given(k1=rates, k2=rates, excess=st.floats(1e-9, 10.0))
@settings(max_examples=50, deadline=None)
def test_schwarz_guard_always_fails(k1, k2, excess):
    k3 = math.sqrt(k1 * k2) * (1 + excess)
    assume(k3 ** 2 > k1 * k2 * (1 + 1e-12))
    with pytest.raises(ValueError):
        SystemParams(k1=k1, k2=k2, k3=k3)


def test_invalid_rates_rejected():
    with pytest.raises(ValueError):
        SystemParams(k1=0.0)
    with pytest.raises(ValueError):
        SystemParams(nbar=-1.0)


def test_from_deviations():
    p = SystemParams.from_deviations(omega=2.0, k1=1.0, k2=4.0, delta_omega=0.1, delta_k=0.01)
    assert p.omega1 == pytest.approx(1.9) and p.omega2 == pytest.approx(2.1)
    assert p.k3 == pytest.approx(1.99)
    assert p.delta_omega == pytest.approx(0.1)
    assert p.delta_k == pytest.approx(0.01)


def test_separable_flat_equal_couplings():
    r = rates_from_couplings(CouplingSpec.separable([1, 1]), BathSpec.flat(0.1))
    assert (r.k1, r.k2, r.k3) == pytest.approx((0.1, 0.1, 0.1), abs=1e-15)


def test_separable_flat_matches_discrete_band_decay():
    """The collective amplitude rate k1 + k2 equals the decay of eta for a dense discrete band."""
    kappa, G = 0.1, np.array([1.0, 1.0])
    r = rates_from_couplings(CouplingSpec.separable(G), BathSpec.flat(kappa))
    spacing = 0.02
    freqs = np.arange(1.0 - 10.0, 1.0 + 10.0 + spacing / 2, spacing)
    D = math.sqrt(kappa * spacing / math.pi)
    c = math.sqrt(np.sum(np.abs(G) ** 2)) * D
    sol = solve_eta(BathSpec.discrete([(w, c) for w in freqs]), 1.0, 10.0, 0.01)
    window = (sol.t >= 1.0) & (sol.t <= 10.0)
    slope = np.polyfit(sol.t[window], np.log(np.abs(sol.eta[window])), 1)[0]
    assert -slope == pytest.approx(r.k1 + r.k2, rel=0.02)
    assert r.k1 == pytest.approx(r.k2)


def test_separable_scaling():
    r = rates_from_couplings(CouplingSpec.separable([1, 2]), BathSpec.lorentzian(1.0, 1.0, 2.0), omega=1.3)
    assert r.k2 / r.k1 == pytest.approx(4.0)
    assert r.k3 == pytest.approx(math.sqrt(r.k1 * r.k2))


@given(
    G=st.lists(st.floats(0.01, 10.0), min_size=2, max_size=2),
    width=st.floats(0.1, 10.0),
    omega=st.floats(0.0, 5.0),
)
@settings(max_examples=50, deadline=None)
def test_separable_rates_saturate_schwarz(G, width, omega):
    r = rates_from_couplings(CouplingSpec.separable(G), BathSpec.lorentzian(1.0, 1.0, width), omega)
    assert abs(r.k3 ** 2 - r.k1 * r.k2) <= 1e-10 * r.k1 * r.k2


def test_orthogonal_couplings_have_no_cross_rate():
    g = np.array([[1.0, 0.0], [0.0, 1.0]])
    bath = BathSpec.discrete([(1.0, 1.0), (1.0, 1.0)])
    r = rates_from_couplings(CouplingSpec(g=g), bath, omega=1.0, smoothing=0.5)
    assert r.k3 == 0.0
    assert r.k1 == pytest.approx(r.k2)


def test_discrete_separable_matrix_saturates_schwarz():
    D = [0.3, 0.1 + 0.2j, 0.05]
    bath = BathSpec.discrete([(0.8, 1.0), (1.0, 1.0), (1.3, 1.0)])
    r = rates_from_couplings(CouplingSpec.separable([1.0, 0.5], D), bath, omega=1.0, smoothing=0.2)
    assert r.k3 ** 2 == pytest.approx(r.k1 * r.k2, rel=1e-12)


def test_discrete_without_smoothing_unsupported():
    bath = BathSpec.discrete([(1.0, 1.0)])
    with pytest.raises(NotImplementedError):
        rates_from_couplings(CouplingSpec(g=np.ones((2, 1))), bath, omega=1.0)


def test_separable_expands_exactly():
    G, D = [1.0, 2.0j], [0.5, -1.0]
    assert np.array_equal(CouplingSpec.separable(G, D).matrix(), np.outer(G, D))


def test_bath_validation():
    with pytest.raises(ValueError):
        BathSpec.discrete([])
    with pytest.raises(ValueError):
        BathSpec.flat(-1.0)
    with pytest.raises(ValueError):
        BathSpec("ohmic")


def test_occupation():
    assert BathSpec.flat(1.0).occupation(1.0) == 0.0
    assert BathSpec.flat(1.0, beta=1.0).occupation(1.0) == pytest.approx(1 / (math.e - 1))


def test_classify_examples():
    c = classify(SystemParams(k1=1, k2=1, k3=1))
    assert c.dfs_exists and c.delta_omega == 0 and c.delta_k == 0
    c = classify(SystemParams(omega1=0.99, omega2=1.01, k3=1.0), tol_omega=1e-6)
    assert c.delta_omega == pytest.approx(0.01) and not c.degenerate
    c = classify(SystemParams(k1=1, k2=4, k3=1.99))
    assert c.delta_k == pytest.approx(0.01) and not c.separable


@given(
    k1=st.floats(0.01, 100.0),
    k2=st.floats(0.01, 100.0),
    frac=st.floats(0.0, 1.0),
    tol=st.floats(1e-6, 1e-1),
    scale=st.floats(1e-3, 1e3),
)
@settings(max_examples=100, deadline=None)
def test_classify_scale_invariant(k1, k2, frac, tol, scale):
    k3 = frac * math.sqrt(k1 * k2)
    base = classify(SystemParams(k1=k1, k2=k2, k3=k3), tol_k=tol)
    scaled = classify(SystemParams(k1=scale * k1, k2=scale * k2, k3=scale * k3), tol_k=scale * tol)
    # stay clear of the threshold itself, where rounding may flip the comparison
    assume(abs(base.delta_k - tol) > 1e-9 * max(tol, base.delta_k))
    assert (base.degenerate, base.separable, base.dfs_exists) == (
        scaled.degenerate, scaled.separable, scaled.dfs_exists)


def test_rotation_angle_examples():
    assert rotation_angle(SystemParams(k1=1, k2=1)) == pytest.approx(math.pi / 4)
    assert rotation_angle(SystemParams(k1=1, k2=3)) == pytest.approx(math.pi / 3)
    assert rotation_angle(SystemParams(k1=3, k2=1)) == pytest.approx(math.pi / 6)


@given(k1=rates, k2=rates)
@settings(max_examples=100, deadline=None)
def test_rotation_angles_complementary(k1, k2):
    total = rotation_angle(SystemParams(k1=k1, k2=k2)) + rotation_angle(SystemParams(k1=k2, k2=k1))
    assert abs(total - math.pi / 2) <= 1e-12
