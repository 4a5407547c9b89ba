import numpy as np
import pytest

from meran import conic
from meran.beamforming import (Infeasible, fixed_point_power, interference_map,
                               mmse_receiver, mmse_receivers, rate_uplink, sinr_all,
                               sinr_targets, sinr_uplink, uplink_powers_from_duality)
from meran.dlda import min_tx_power

from conftest import crandn

B = 1e7


def _unit(x):
    return x / np.linalg.norm(x)


def test_single_ue_receiver_is_matched_filter(rng):
    h = crandn(rng, 1, 4)
    m = mmse_receiver(h, [3.0], 0)
    assert abs(abs(np.vdot(m, _unit(h[0]))) - 1) < 1e-12


def test_orthogonal_channels_give_matched_filters():
    H = np.array([[1, 0, 0], [0, 1j, 0]], dtype=complex)
    for p in ([1.0, 5.0], [100.0, 0.01]):
        M = mmse_receivers(H, p)
        for i in range(2):
            assert abs(abs(np.vdot(M[i], H[i])) - 1) < 1e-12


def test_mmse_beats_random_receivers(rng):
    H = crandn(rng, 3, 4)
    p = np.array([1.0, 2.0, 0.5])
    M = mmse_receivers(H, p)
    best = sinr_all(p, M, H)
    for _ in range(100):
        R = crandn(rng, 3, 4)
        R /= np.linalg.norm(R, axis=1, keepdims=True)
        assert np.all(sinr_all(p, R, H) <= best * (1 + 1e-12))


def test_sinr_examples(rng):
    h = crandn(rng, 1, 3)
    m = _unit(h)
    assert sinr_uplink([2.0], m, h, 0) == pytest.approx(2.0 * np.vdot(h, h).real)
    H = crandn(rng, 2, 3)
    M = crandn(rng, 2, 3)
    assert sinr_uplink([0.0, 1.0], M, H, 0) == 0.0
    s1 = sinr_uplink([1.0, 1.0], M, H, 1)
    M2 = M.copy()
    M2[1] *= 3.7 - 2j
    assert sinr_uplink([1.0, 1.0], M2, H, 1) == pytest.approx(s1, rel=1e-12)
    assert sinr_all([1.0, 1.0], M, H)[1] == pytest.approx(s1, rel=1e-12)


@pytest.mark.parametrize("s, r", [(1.0, 1e7), (0.0, 0.0), (3.0, 2e7)])
def test_rate_examples(s, r):
    assert rate_uplink(s, B) == pytest.approx(r)


def test_single_ue_fixed_point_matches_closed_form(rng):
    for _ in range(20):
        h = crandn(rng, 1, 4)
        r = rng.uniform(1e5, 2e7)
        res = fixed_point_power(h, [r], B)
        assert res.converged
        expected = min_tx_power(r, h[0], 1.0, B)
        assert res.powers[0] == pytest.approx(expected, rel=1e-9)


def test_orthogonal_users_decouple():
    H = np.array([[2, 0], [0, 0.5]], dtype=complex)
    res = fixed_point_power(H, [3e6, 8e6], B)
    for i, r in enumerate([3e6, 8e6]):
        assert res.powers[i] == pytest.approx(min_tx_power(r, H[i], 1.0, B), rel=1e-9)


def _grid_min_sum(H, gamma, hi, rounds=8, n=201):
    """Brute-force min p1 + p2 over a zooming grid with MMSE receivers."""
    g11, g22 = np.vdot(H[0], H[0]).real, np.vdot(H[1], H[1]).real
    c = abs(np.vdot(H[0], H[1])) ** 2
    lo1 = lo2 = 0.0
    hi1 = hi2 = hi
    best = None
    for _ in range(rounds):
        p1, p2 = np.meshgrid(np.linspace(lo1, hi1, n), np.linspace(lo2, hi2, n), indexing="ij")
        # h_i^H (p_k h_k h_k^H + I)^{-1} h_i by Sherman-Morrison
        s1 = p1 * (g11 - p2 * c / (1 + p2 * g22))
        s2 = p2 * (g22 - p1 * c / (1 + p1 * g11))
        ok = (s1 >= gamma[0]) & (s2 >= gamma[1])
        total = np.where(ok, p1 + p2, np.inf)
        k = np.unravel_index(np.argmin(total), total.shape)
        best = (p1[k], p2[k])
        w1, w2 = 3 * (hi1 - lo1) / (n - 1), 3 * (hi2 - lo2) / (n - 1)
        lo1, hi1 = max(best[0] - w1, 0.0), best[0] + w1
        lo2, hi2 = max(best[1] - w2, 0.0), best[1] + w2
    return sum(best)


def test_two_ue_fixed_point_matches_grid_search(rng):
    for _ in range(5):
        H = crandn(rng, 2, 3)
        targets = rng.uniform(2e6, 8e6, size=2)
        res = fixed_point_power(H, targets, B)
        ref = _grid_min_sum(H, sinr_targets(targets, B), 4 * res.powers.max())
        assert res.powers.sum() == pytest.approx(ref, rel=1e-3)
        assert np.all(res.rates >= targets * (1 - 1e-7))


def test_infeasible_targets_raise():
    H = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]], dtype=complex)
    with pytest.raises(Infeasible):
        fixed_point_power(H, [2e7] * 3, B)


def test_duality_matches_virtual_downlink(rng):
    for n in (1, 3):
        H = crandn(rng, n, 4)
        targets = rng.uniform(1e6, 6e6, size=n)
        prob, lay = conic.beam_problem(H, targets, B)
        sol = conic.solve(prob, tol=1e-9)
        V = lay.beamformers(sol.x)
        vd = np.sum(np.abs(V) ** 2)
        pc = uplink_powers_from_duality(V, H, targets, B)
        assert abs(pc.powers.sum() - vd) / vd < 1e-3
        fp = fixed_point_power(H, targets, B)
        assert abs(fp.powers.sum() - vd) / vd < 1e-3
        if n == 1:
            assert pc.powers[0] == pytest.approx(vd, rel=1e-6)


def test_duality_empty_set():
    pc = uplink_powers_from_duality(np.zeros((0, 2)), np.zeros((0, 2)), [], B)
    assert pc.powers.size == 0 and pc.powers.sum() == 0


def test_interference_map_is_standard(rng):
    for _ in range(20):
        H = crandn(rng, 3, 3)
        gamma = rng.uniform(0.1, 1.0, size=3)
        p = rng.uniform(0.1, 2.0, size=3)
        q = p + rng.uniform(0.0, 1.0, size=3)
        Ip, Iq = interference_map(H, gamma, p), interference_map(H, gamma, q)
        assert np.all(Iq >= Ip * (1 - 1e-12))
        a = rng.uniform(1.1, 5.0)
        assert np.all(interference_map(H, gamma, a * p) < a * Ip)


def test_fixed_point_meets_targets_with_equality(rng):
    H = crandn(rng, 4, 4)
    targets = rng.uniform(1e6, 4e6, size=4)
    res = fixed_point_power(H, targets, B, tol=1e-12)
    assert np.allclose(res.rates, targets, rtol=1e-7)
