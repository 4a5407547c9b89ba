"""Independent feasibility audit of an :class:`~meran.model.Allocation`.

Nothing here reuses solver internals: rates are recomputed from the
reported powers and receivers, and every constraint is checked against
the scenario and the pre-screening decisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beamforming import rate_uplink, sinr_all
from .dlda import label_of
from .model import OH, OL, L, R


@dataclass
class Report:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code, msg):
        self.violations.append(f"{code}: {msg}")

    def __str__(self):
        return "feasible" if self.ok else "; ".join(self.violations)


def check_allocation(scenario, decisions, alloc, rtol: float = 1e-6,
                     power_atol_w: float = 1e-9) -> Report:
    """Check deadlines, local budgets, pool capacities and rate targets.

    Codes: ``labels`` (partition consistent with pre-screening), ``C3``
    (deadline of offloaded tasks), ``C5`` (accepted OL spends no more than
    locally), ``C6`` (clone count), ``C7`` (BBU rate), ``C9`` (minimum
    rate), ``power`` (sum-power bookkeeping), ``priority`` (no OL UE
    admitted while an OH UE is rescheduled).
    """
    cfg = scenario.cfg
    rep = Report()
    labels = alloc.classification.labels
    pre = [label_of(d) for d in decisions]
    for i, (now, before) in enumerate(zip(labels, pre)):
        allowed = {OH: {OH, R}, OL: {OL, L}, L: {L}, R: {R}}[before]
        if now not in allowed:
            rep.add("labels", f"UE {i} pre-screened {before} but labelled {now}")
    off = [i for i, x in enumerate(labels) if x in (OH, OL)]
    H = scenario.channels[off]
    p_int = scenario.to_internal(alloc.tx_power[off])
    rates = rate_uplink(sinr_all(p_int, alloc.rx_beamformers[off], H), cfg.bandwidth) \
        if off else np.zeros(0)
    U = cfg.cycles_per_bit
    for k, i in enumerate(off):
        d, task = decisions[i], scenario.ues[i].task
        if rates[k] < d.r_min * (1 - rtol):
            rep.add("C9", f"UE {i} rate {rates[k]:.6g} < {d.r_min:.6g}")
        t = task.bits / max(rates[k], 1e-300) + task.cycles / cfg.clone_speed
        if t > task.deadline * (1 + rtol):
            rep.add("C3", f"UE {i} finishes at {t:.6g} s > {task.deadline} s")
        if labels[i] == OL and alloc.tx_power[i] > d.p_local_star * (1 + rtol) + power_atol_w:
            rep.add("C5", f"UE {i} transmits {alloc.tx_power[i]:.6g} W > local {d.p_local_star:.6g} W")
    if len(off) > cfg.clone_capacity:
        rep.add("C6", f"{len(off)} clones > {cfg.clone_capacity}")
    load = float(np.sum(rates) * U)
    if load > cfg.bbu_capacity * (1 + rtol):
        rep.add("C7", f"BBU load {load:.6g} > {cfg.bbu_capacity:.6g}")
    expect = alloc.recomputed_sum_power()
    if abs(expect - alloc.sum_power) > rtol * max(abs(expect), 1.0):
        rep.add("power", f"reported {alloc.sum_power:.9g} W, recomputed {expect:.9g} W")
    for i, lab in enumerate(labels):
        if lab != L and alloc.local_power[i] != 0:
            rep.add("power", f"UE {i} is {lab} but has local power")
        if bool(alloc.completed[i]) != (lab != R):
            rep.add("labels", f"UE {i} completion flag inconsistent with {lab}")
    if any(lab == R and pre[i] == OH for i, lab in enumerate(labels)) and OL in labels:
        rep.add("priority", "OL UE admitted while an OH UE was rescheduled")
    return rep


def trace_descends(trace, rtol: float = 1e-6) -> bool:
    """True if every step of ``trace`` is non-increasing within ``rtol``."""
    t = np.asarray(trace, dtype=float)
    return bool(np.all(t[1:] <= t[:-1] + rtol * np.maximum(np.abs(t[:-1]), 1e-12)))
