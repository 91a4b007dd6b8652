import math

import numpy as np
import pytest

from uavcache import channel
from uavcache.config import ExperimentConfig

RADIO = ExperimentConfig().radio()


def test_los_probability_at_phi_equal_a():
    # elevation angle equal to the environment constant kills the exponent
    r = RADIO.g / math.tan(math.radians(RADIO.a))
    assert channel.los_probability(r, RADIO) == pytest.approx(1.0 / (1.0 + RADIO.a), rel=1e-12)


def test_los_probability_overhead_frozen():
    # direct high-precision evaluation at phi = 90 deg, dense-urban constants
    assert channel.los_probability(0.0, RADIO) == pytest.approx(0.9977162470810939, abs=1e-12)


def test_los_probability_monotone():
    grid = np.linspace(0.0, 2000.0, 400)
    vals = [channel.los_probability(r, RADIO) for r in grid]
    assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))
    assert all(0.0 < v < 1.0 for v in vals)


def test_los_probability_rejects_negative():
    with pytest.raises(ValueError):
        channel.los_probability(-1.0, RADIO)


def test_path_loss_collapses_when_losses_equal():
    radio = ExperimentConfig(eta_los_db=7.0, eta_nlos_db=7.0).radio()
    for r in (0.0, 50.0, 400.0):
        d3 = math.hypot(radio.g, r)
        expected = 20 * math.log10(4 * math.pi / radio.wavelength) + 20 * math.log10(d3) + 7.0
        assert channel.path_loss_db(r, radio) == pytest.approx(expected, rel=1e-12)


def test_path_loss_overhead_frozen():
    assert channel.path_loss_db(0.0, RADIO) == pytest.approx(94.61356738531993, abs=1e-9)


def test_path_loss_distance_term_log_scaling():
    radio = ExperimentConfig(eta_los_db=0.0, eta_nlos_db=0.0).radio()
    r_double = radio.g * math.sqrt(3.0)   # sqrt(g^2 + r^2) = 2g
    gain_db = channel.path_loss_db(r_double, radio) - channel.path_loss_db(0.0, radio)
    assert gain_db == pytest.approx(20 * math.log10(2.0), rel=1e-12)


def test_los_gain_inverse_square():
    for d3 in (RADIO.g, 350.0, 1200.0):
        g1 = channel.los_gain(d3, RADIO).gain
        g2 = channel.los_gain(2 * d3, RADIO).gain
        assert g2 == pytest.approx(g1 / 4.0, rel=1e-14)


def test_los_gain_overhead_frozen():
    # eta_los = 2.3 dB, f_c = 4.9 GHz, d3 = g = 200 m
    assert channel.los_gain(200.0, RADIO).gain == pytest.approx(3.494384014916843e-10, rel=1e-12)


def test_los_gain_unit_excess_loss():
    radio = ExperimentConfig(eta_los_db=0.0).radio()
    d3 = 300.0
    expected = radio.wavelength ** 2 / (16 * math.pi ** 2 * d3 ** 2)
    assert channel.los_gain(d3, radio).gain == pytest.approx(expected, rel=1e-14)


def test_los_gain_rejects_below_altitude():
    with pytest.raises(ValueError):
        channel.los_gain(RADIO.g - 1.0, RADIO)


def test_los_coverage_radius_frozen():
    assert channel.los_coverage_radius(RADIO) == pytest.approx(72.79404685324047, abs=1e-9)


def test_los_coverage_radius_45_degrees():
    radio = ExperimentConfig(theta_th_deg=45.0).radio()
    assert channel.los_coverage_radius(radio) == pytest.approx(radio.g, rel=1e-12)


def test_los_coverage_radius_monotone():
    r1 = channel.los_coverage_radius(ExperimentConfig(theta_th_deg=50.0).radio())
    r2 = channel.los_coverage_radius(ExperimentConfig(theta_th_deg=75.0).radio())
    assert r1 > r2


def test_rates_single_uav_no_interference():
    X = np.array([[100.0, 100.0]])
    users = np.array([[100.0, 160.0], [400.0, 400.0]])
    S = np.array([[1], [0]], dtype=np.int8)
    P = np.array([250.0])
    u = channel.achievable_rates(X, users, S, P, RADIO)
    d3sq = RADIO.g ** 2 + 60.0 ** 2
    expected = math.log2(1 + 250.0 * (RADIO.gain_coeff / d3sq) / RADIO.noise_mw)
    assert u[0] == pytest.approx(expected, rel=1e-12)
    assert u[1] == 0.0


def test_rates_all_unassigned_zero():
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 500, (3, 2))
    users = rng.uniform(0, 500, (6, 2))
    S = np.zeros((6, 3), dtype=np.int8)
    u = channel.achievable_rates(X, users, S, np.full(3, 100.0), RADIO)
    assert np.all(u == 0.0)


def test_rates_match_scalar_reevaluation():
    rng = np.random.default_rng(123)
    X = rng.uniform(0, 500, (2, 2))
    users = rng.uniform(0, 500, (4, 2))
    P = rng.uniform(1, 480, 2)
    S = np.array([[1, 0], [0, 1], [0, 0], [0, 0]], dtype=np.int8)
    u = channel.achievable_rates(X, users, S, P, RADIO)
    for i in range(4):
        expected = 0.0
        for j in range(2):
            if S[i, j] == 0:
                continue
            h_ij = RADIO.gain_coeff / (RADIO.g ** 2 + np.sum((users[i] - X[j]) ** 2))
            interference = 0.0
            for k in range(2):
                if k != j:
                    h_ik = RADIO.gain_coeff / (RADIO.g ** 2 + np.sum((users[i] - X[k]) ** 2))
                    interference += P[k] * h_ik
            expected += math.log2(1 + P[j] * h_ij / (RADIO.noise_mw + interference))
        assert u[i] == pytest.approx(expected, rel=1e-12)


def test_rates_dimension_mismatch():
    X = np.zeros((2, 2))
    users = np.zeros((3, 2))
    with pytest.raises(ValueError):
        channel.achievable_rates(X, users, np.zeros((3, 3), dtype=np.int8),
                                 np.ones(2), RADIO)
    with pytest.raises(ValueError):
        channel.achievable_rates(X, users, np.zeros((3, 2), dtype=np.int8),
                                 np.ones(3), RADIO)


def test_interference_monotonicity():
    # raising a non-serving UAV's power never helps any assigned user
    rng = np.random.default_rng(42)
    X = rng.uniform(0, 500, (3, 2))
    users = rng.uniform(0, 500, (5, 2))
    S = np.zeros((5, 3), dtype=np.int8)
    S[0, 0] = S[2, 1] = S[4, 2] = 1
    P = rng.uniform(10, 400, 3)
    base = channel.achievable_rates(X, users, S, P, RADIO)
    for j in range(3):
        bumped = P.copy()
        bumped[j] += 50.0
        u2 = channel.achievable_rates(X, users, S, bumped, RADIO)
        for i, srv in ((0, 0), (2, 1), (4, 2)):
            if srv != j:
                assert u2[i] <= base[i] + 1e-12


def test_rate_positive_when_assigned():
    X = np.array([[10.0, 10.0], [490.0, 490.0]])
    users = np.array([[480.0, 480.0]])
    S = np.array([[0, 1]], dtype=np.int8)
    u = channel.achievable_rates(X, users, S, np.array([300.0, 5.0]), RADIO)
    assert u[0] > 0.0
