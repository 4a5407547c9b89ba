import copy

import numpy as np
import pytest

from meran import run
from meran.checks import check_allocation, trace_descends
from meran.dlda import classify
from meran.model import OH, OL, L, R, Classification
from meran.scenario import generate


@pytest.fixture(scope="module")
def solved():
    sc = generate(4, 10, 6, 2)
    sc = sc.with_config(sc.cfg.replace(bbu_capacity=3e6))
    _, dec = classify(sc)
    return sc, dec, run(sc, "CAR")


def codes(rep):
    return {v.split(":")[0] for v in rep.violations}


def test_solver_output_is_feasible(solved):
    sc, dec, alloc = solved
    rep = check_allocation(sc, dec, alloc)
    assert rep.ok, str(rep)
    assert str(rep) == "feasible"


def test_reduced_power_breaks_rate(solved):
    sc, dec, alloc = solved
    bad = copy.deepcopy(alloc)
    i = bad.accepted[0]
    bad.tx_power[i] *= 0.5
    bad.sum_power = bad.recomputed_sum_power()
    assert {"C9", "C3"} <= codes(check_allocation(sc, dec, bad))


def test_wrong_sum_power_flagged(solved):
    sc, dec, alloc = solved
    bad = copy.deepcopy(alloc)
    bad.sum_power += 1.0
    assert codes(check_allocation(sc, dec, bad)) == {"power"}


def test_capacity_overrun_flagged(solved):
    sc, dec, alloc = solved
    tight = sc.with_config(sc.cfg.replace(clone_capacity=1, bbu_capacity=1e5))
    assert {"C6", "C7"} <= codes(check_allocation(tight, dec, alloc))


def test_label_tampering_flagged(solved):
    sc, dec, alloc = solved
    bad = copy.deepcopy(alloc)
    labels = list(bad.classification.labels)
    j = labels.index(OH) if OH in labels else 0
    labels[j] = OL
    bad.classification = Classification(tuple(labels))
    assert "labels" in codes(check_allocation(sc, dec, bad))


def test_c5_flagged_when_power_exceeds_local():
    from conftest import LIGHT, make_scenario
    sc = make_scenario(np.eye(2, dtype=complex), [LIGHT, LIGHT], bbu_capacity=1e9)
    _, dec = classify(sc)
    alloc = run(sc, "CAR")
    bad = copy.deepcopy(alloc)
    bad.tx_power[0] = 2 * dec[0].p_local_star
    bad.sum_power = bad.recomputed_sum_power()
    assert "C5" in codes(check_allocation(sc, dec, bad))


def test_trace_descends():
    assert trace_descends([3.0, 2.0, 2.0, 1.0])
    assert trace_descends([1.0, 1.0 + 5e-7])
    assert not trace_descends([1.0, 1.0 + 1e-5])
    assert trace_descends([])
