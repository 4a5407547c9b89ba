import math

import numpy as np
import pytest

from meran.dlda import (CloudInfeasible, classify, local_decision, local_power,
                        max_local_power_budget, min_offload_rate, min_tx_power,
                        optimal_local_frequency)
from meran.model import OH, OL, L, R, SystemConfig, TaskSpec, UEProfile
from meran.scenario import generate, table1_tasks

from conftest import make_scenario, task

CFG = SystemConfig()


def test_optimal_frequency_examples():
    t1, t9 = table1_tasks()[0], table1_tasks()[8]
    assert optimal_local_frequency(t1) == pytest.approx(2e5)
    assert optimal_local_frequency(t9) == pytest.approx(1.4e6)
    d1 = local_decision(UEProfile(t1), np.ones(2), CFG)
    d9 = local_decision(UEProfile(t9), np.ones(2), CFG)
    assert d1.w and not d9.w


def test_frequency_boundary_is_feasible():
    d = local_decision(UEProfile(TaskSpec(1e6, 1e5, 1.0)), np.ones(2), CFG)
    assert d.w


@pytest.mark.parametrize("f, expected", [(1e6, 1.0), (0.0, 0.0), (2e5, 8e-3)])
def test_local_power(f, expected):
    assert local_power(f, 1e-18, 3) == pytest.approx(expected, rel=1e-12, abs=0)


def test_min_offload_rate_examples():
    assert min_offload_rate(TaskSpec(1e6, 0.65e6, 1.0), 1e8) == pytest.approx(0.65e6 / 0.99)
    assert min_offload_rate(TaskSpec(0.2e6, 0.08e6, 1.0), 1e8) == pytest.approx(80160.3206, rel=1e-9)
    with pytest.raises(CloudInfeasible):
        min_offload_rate(TaskSpec(1e8, 1e5, 1.0), 1e8)


def test_min_tx_power_examples():
    B = 1e7
    h = np.array([1.0 + 0j])
    assert min_tx_power(B, h, 1.0, B) == pytest.approx(1.0)
    assert min_tx_power(0.0, h, 1.0, B) == 0.0
    p1 = min_tx_power(3e6, np.array([1.0, 1.0j]), 1.0, B)
    p2 = min_tx_power(3e6, np.array([2.0, 0.0]), 1.0, B)
    assert p2 == pytest.approx(p1 / 2)


def test_budget_examples():
    t = table1_tasks()[0]
    e_star = 1e-18 * t.cycles ** 3 / t.deadline ** 2
    assert e_star == pytest.approx(8e-3)
    assert max_local_power_budget(t, e_star, 1e8) == pytest.approx(8e-3 / 0.998)
    assert max_local_power_budget(t, 0.0, 1e8) == 0.0


def test_reference_workload_has_seven_mandatory_offloaders():
    cls, _ = classify(generate(0, 20, 20, 2))
    assert cls.members(OH) == [3, 5, 7, 8, 9, 10, 14]


def test_channel_limits_decide_interest():
    strong = make_scenario([[1e3, 0]], [task(0.8, 0.15)])
    weak = make_scenario([[1e-6, 0]], [task(0.8, 0.15)])
    assert classify(strong)[0].labels == (OL,)
    assert classify(weak)[0].labels == (L,)


def test_cloud_and_local_infeasible_goes_to_R():
    sc = make_scenario([[1.0, 0.0]], [TaskSpec(2e8, 1e5, 1.0)])
    cls, dec = classify(sc)
    assert cls.labels == (R,)
    assert not dec[0].cloud_feasible


def test_interest_threshold_on_channel_gain():
    # |h|^2 = gain puts p_tr_min exactly on the local budget
    t = task(0.8, 0.15)
    d0 = local_decision(UEProfile(t), np.array([1.0 + 0j]), CFG)
    gain = d0.p_tr_min / d0.p_local_max
    below = local_decision(UEProfile(t), np.array([math.sqrt(gain * (1 - 1e-6)) + 0j]), CFG)
    above = local_decision(UEProfile(t), np.array([math.sqrt(gain * (1 + 1e-6)) + 0j]), CFG)
    assert below.p_tr_min > below.p_local_max and not below.s
    assert above.p_tr_min < above.p_local_max and above.s


def test_decisions_are_decentralized():
    sc = generate(4, 8, 4, 2)
    _, dec = classify(sc)
    perm = np.random.default_rng(0).permutation(8)
    shuffled = make_scenario(sc.channels[perm], [sc.ues[i].task for i in perm])
    _, dec_p = classify(shuffled)
    for new_pos, old in enumerate(perm):
        assert dec_p[new_pos] == dec[old]


def test_optimal_frequency_is_cheapest_feasible(rng):
    t = task(0.6, 0.1)
    f_star = optimal_local_frequency(t)
    for f in rng.uniform(0.1 * f_star, 3 * f_star, size=50):
        if f < f_star:
            assert t.cycles / f > t.deadline
        elif f > f_star:
            assert local_power(f, 1e-18, 3) > local_power(f_star, 1e-18, 3)
