"""Decentralized local decision: each UE screens its own offloading interest.

Every quantity used by a UE here comes from its own task, CPU profile and
channel, so the per-UE results do not depend on the other UEs.
"""

from __future__ import annotations

import math

import numpy as np

from .model import OH, OL, L, R, Classification, LocalDecision, TaskSpec, UEProfile


class CloudInfeasible(ValueError):
    """The deadline cannot be met even with instantaneous upload."""


def optimal_local_frequency(task: TaskSpec) -> float:
    """Slowest (hence cheapest) CPU frequency that meets the deadline."""
    return task.cycles / task.deadline


def local_power(f: float, kappa: float, nu: float) -> float:
    return kappa * f ** nu


def _cloud_time_left(task: TaskSpec, clone_speed: float) -> float:
    left = task.deadline - task.cycles / clone_speed
    if not left > 0:
        raise CloudInfeasible(
            f"deadline {task.deadline} s <= clone execution time "
            f"{task.cycles / clone_speed} s")
    return left


def min_offload_rate(task: TaskSpec, clone_speed: float) -> float:
    """Uplink rate that lets the clone finish exactly at the deadline."""
    return task.bits / _cloud_time_left(task, clone_speed)


def min_tx_power(r_min: float, h, sigma2: float, B: float) -> float:
    """Interference-free transmit power for rate ``r_min`` (MRC receiver)."""
    gain = float(np.vdot(h, h).real)
    if not gain > 0:
        raise ValueError("channel must be nonzero")
    return (2.0 ** (r_min / B) - 1.0) * sigma2 / gain


def max_local_power_budget(task: TaskSpec, e_local_star: float, clone_speed: float) -> float:
    return e_local_star / _cloud_time_left(task, clone_speed)


def local_decision(ue: UEProfile, h, cfg) -> LocalDecision:
    """Run the pre-screening for one UE.

    ``h`` is the noise-normalized channel; ``p_tr_min`` is returned in
    watts (internal power times ``cfg.power_unit``).
    """
    task = ue.task
    f_star = optimal_local_frequency(task)
    p_star = local_power(f_star, ue.kappa, ue.nu)
    e_star = p_star * task.cycles / f_star          # p * T^L, T^L = F / f*
    locally_ok = f_star <= ue.f_local_max
    try:
        r_min = min_offload_rate(task, cfg.clone_speed)
        p_budget = max_local_power_budget(task, e_star, cfg.clone_speed)
    except CloudInfeasible:
        return LocalDecision(f_star, p_star, e_star, math.inf, math.inf, math.inf,
                             w=locally_ok, s=False)
    p_tr = min_tx_power(r_min, h, 1.0, cfg.bandwidth) * cfg.power_unit
    if not locally_ok:
        return LocalDecision(f_star, p_star, e_star, r_min, p_tr, p_budget, w=False, s=True)
    return LocalDecision(f_star, p_star, e_star, r_min, p_tr, p_budget,
                         w=True, s=bool(p_tr < p_budget))


def label_of(d: LocalDecision) -> str:
    if d.w and d.s:
        return OL
    if d.w:
        return L
    if d.s:
        return OH
    return R


def classify(scenario) -> tuple[Classification, list[LocalDecision]]:
    """Pre-screen every UE of ``scenario``.

    Returns the classification into OH / OL / L (R for UEs that can meet
    the deadline neither locally nor in the cloud) and the per-UE decisions.
    """
    decisions = [local_decision(ue, scenario.channels[i], scenario.cfg)
                 for i, ue in enumerate(scenario.ues)]
    return Classification(tuple(label_of(d) for d in decisions)), decisions
