"""Joint offloading decisions and uplink beamforming for an edge-cloud RAN.

Typical use::

    from meran import generate, run

    sc = generate(seed=1, N=20, J=20, K=2)
    alloc = run(sc, "CAR")
    print(alloc.sum_power, alloc.completed_count())
"""

from .baselines import SubsetTooLarge, exhaustive_search, local_only
from .car import case1, case2, case3, dispatch, f_theta, f_theta_grad, run_car
from .dlda import classify, local_decision
from .model import (OH, OL, L, R, Allocation, Classification, LocalDecision, SystemConfig,
                    TaskSpec, UEProfile)
from .scenario import Scenario, generate, load_scenario, save_scenario

__version__ = "0.1.0"


def run(scenario, algorithm: str = "CAR") -> Allocation:
    """Pre-screen ``scenario`` and run one of Local, ES, CAR, CAR-P, CAR-D."""
    cls, decisions = classify(scenario)
    if algorithm == "Local":
        return local_only(scenario, decisions)
    if algorithm == "ES":
        return exhaustive_search(scenario, decisions)
    return dispatch(scenario, cls, decisions, algorithm)


__all__ = [
    "OH", "OL", "L", "R", "Allocation", "Classification", "LocalDecision", "Scenario",
    "SubsetTooLarge", "SystemConfig", "TaskSpec", "UEProfile", "case1", "case2", "case3",
    "classify", "dispatch", "exhaustive_search", "f_theta", "f_theta_grad", "generate",
    "load_scenario", "local_decision", "local_only", "run", "run_car", "save_scenario",
]
