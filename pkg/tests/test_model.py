import json

import numpy as np
import pytest

from meran.model import (OH, OL, L, R, Classification, SystemConfig, TaskSpec, UEProfile,
                         dbm_to_watt, validate_config, validate_profile)
from meran import run
from meran.scenario import generate


def test_default_config_is_valid():
    assert validate_config(SystemConfig()) == []
    assert SystemConfig().theta == 1e-3


def test_zero_bandwidth_reported():
    assert validate_config(SystemConfig(bandwidth=0)) == ["bandwidth must be positive"]


def test_negative_clone_capacity_and_bad_init_reported():
    problems = validate_config(SystemConfig(clone_capacity=-1, sca_init="warm"))
    assert "clone_capacity must be a non-negative integer" in problems
    assert any(p.startswith("sca_init") for p in problems)


def test_profile_nu_bound():
    ue = UEProfile(TaskSpec(1e6, 1e5, 1.0), nu=1.5)
    assert validate_profile(ue) == ["nu must be >= 2"]


def test_dbm_conversion():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(0.0) == pytest.approx(1e-3)
    cfg = SystemConfig(noise_psd_dbm_hz=-174.0, bandwidth=10e6)
    assert cfg.noise_power == pytest.approx(10 ** (-17.4) * 1e-3 * 1e7)


def test_replace_rejects_unknown_field():
    with pytest.raises(TypeError):
        SystemConfig().replace(bogus=1)
    assert SystemConfig().replace(clone_capacity=3).clone_capacity == 3


def test_classification_partition_and_indicators():
    c = Classification((OH, OL, L, R, OL))
    assert c.members(OL) == [1, 4]
    assert c.offloading == [0, 1, 4]
    assert list(c.s) == [1, 1, 0, 0, 1]
    assert list(map(bool, c.w)) == [False, True, True, False, True]
    with pytest.raises(ValueError):
        Classification(("X",))


def test_allocation_bookkeeping_and_dump():
    sc = generate(3, 6, 3, 2)
    alloc = run(sc, "CAR")
    assert alloc.sum_power == pytest.approx(alloc.recomputed_sum_power(), rel=1e-12)
    assert alloc.completed_count() == int(np.sum(alloc.completed))
    text = json.dumps(alloc.to_dict())
    back = json.loads(text)
    assert back["labels"] == list(alloc.classification.labels)
    assert len(back["rx_beamformers"]) == sc.n_ues
