"""Domain types shared by every algorithm in the package.

Units: frequencies in cycles/s, data in bits, rates in bits/s, powers in W
unless a name says otherwise.  Algorithms work internally in a
noise-normalized power unit (see :class:`SystemConfig.power_unit`); the
public values stored on :class:`LocalDecision` and :class:`Allocation` are
always in watts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

# Set labels used throughout.  OH: must offload, OL: may offload,
# L: local execution, R: rescheduled to the next slot.
OH, OL, L, R = "OH", "OL", "L", "R"
SET_LABELS = (OH, OL, L, R)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class TaskSpec:
    """A UE workload: CPU cycles, payload bits and deadline in seconds."""

    cycles: float
    bits: float
    deadline: float


@dataclass(frozen=True)
class UEProfile:
    task: TaskSpec
    f_local_max: float = 1e6
    kappa: float = 1e-18
    nu: float = 3.0
    position: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class SystemConfig:
    """System-wide parameters.

    ``power_unit`` is the internal power unit in watts: channels are
    scaled so that the noise power is one when powers are expressed in
    this unit.  ``theta``, ``zero_threshold`` and ``big_M`` are interpreted
    in the internal unit.  ``big_M=None`` derives the penalty from the
    scenario (``1e3 * N * max p_local_max``).  ``sca_init`` selects the
    SCA starting points: ``"greedy"`` refines both greedy solutions and
    keeps the best candidate, ``"zero"`` starts once from all-zero
    beamformers.
    """

    bandwidth: float = 10e6
    noise_psd_dbm_hz: float = -174.0
    clone_capacity: int = 20
    bbu_capacity: float = 9e6
    cycles_per_bit: float = 1.0
    clone_speed: float = 1e8
    f_local_max: float = 1e6
    kappa: float = 1e-18
    nu: float = 3.0
    theta: float = 1e-3
    big_M: float | None = None
    sca_max_iters: int = 50
    sca_tol: float = 1e-5
    sca_init: str = "greedy"
    fp_max_iters: int = 500
    fp_tol: float = 1e-8
    zero_threshold: float = 1e-3
    power_unit: float = 1e-3
    solver_tol: float = 1e-6
    duality_tol: float = 1e-3
    n_cap: int = 12
    d_min: float = 10.0

    @property
    def noise_power(self) -> float:
        """Receiver noise power in W (PSD times bandwidth)."""
        return dbm_to_watt(self.noise_psd_dbm_hz) * self.bandwidth

    def replace(self, **changes) -> "SystemConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        unknown = set(changes) - set(vals)
        if unknown:
            raise TypeError(f"unknown SystemConfig fields: {sorted(unknown)}")
        vals.update(changes)
        return SystemConfig(**vals)


SCA_INITS = ("greedy", "zero")

_POSITIVE_FIELDS = (
    "bandwidth", "bbu_capacity", "cycles_per_bit", "clone_speed",
    "f_local_max", "kappa", "theta", "sca_max_iters", "sca_tol",
    "fp_max_iters", "fp_tol", "zero_threshold", "power_unit", "solver_tol",
    "duality_tol", "n_cap", "d_min",
)


def validate_config(cfg: SystemConfig) -> list[str]:
    """Return a list of human-readable violations; empty if ``cfg`` is valid."""
    problems = []
    for name in _POSITIVE_FIELDS:
        value = getattr(cfg, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            problems.append(f"{name} must be positive")
    if not (isinstance(cfg.clone_capacity, (int, np.integer)) and cfg.clone_capacity >= 0):
        problems.append("clone_capacity must be a non-negative integer")
    if cfg.nu < 2:
        problems.append("nu must be >= 2")
    if cfg.big_M is not None and not cfg.big_M > 0:
        problems.append("big_M must be positive")
    if cfg.sca_init not in SCA_INITS:
        problems.append(f"sca_init must be one of {', '.join(SCA_INITS)}")
    if not math.isfinite(cfg.noise_psd_dbm_hz):
        problems.append("noise_psd_dbm_hz must be finite")
    return problems


def validate_profile(ue: UEProfile) -> list[str]:
    problems = []
    t = ue.task
    for name in ("cycles", "bits", "deadline"):
        if not getattr(t, name) > 0:
            problems.append(f"task.{name} must be positive")
    if not ue.f_local_max > 0:
        problems.append("f_local_max must be positive")
    if not ue.kappa > 0:
        problems.append("kappa must be positive")
    if not ue.nu >= 2:
        problems.append("nu must be >= 2")
    return problems


@dataclass(frozen=True)
class Classification:
    """Per-UE set membership.  ``s``/``w`` follow the offload/complete flags."""

    labels: tuple[str, ...]

    def __post_init__(self):
        bad = [x for x in self.labels if x not in SET_LABELS]
        if bad:
            raise ValueError(f"unknown set labels {bad}")

    @classmethod
    def from_sets(cls, n: int, **sets: Sequence[int]) -> "Classification":
        labels = [None] * n
        for name, members in sets.items():
            for i in members:
                if labels[i] is not None:
                    raise ValueError(f"UE {i} assigned to {labels[i]} and {name}")
                labels[i] = name
        if any(x is None for x in labels):
            missing = [i for i, x in enumerate(labels) if x is None]
            raise ValueError(f"UEs {missing} not assigned to any set")
        return cls(tuple(labels))

    def members(self, label: str) -> list[int]:
        return [i for i, x in enumerate(self.labels) if x == label]

    @property
    def offloading(self) -> list[int]:
        return [i for i, x in enumerate(self.labels) if x in (OH, OL)]

    @property
    def s(self) -> np.ndarray:
        return np.array([x in (OH, OL) for x in self.labels], dtype=int)

    @property
    def w(self) -> np.ndarray:
        # OH means "cannot complete locally"; R means incomplete
        return np.array([x in (OL, L) for x in self.labels], dtype=int)

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class LocalDecision:
    """Outcome of the per-UE pre-screening (powers in W)."""

    f_star: float
    p_local_star: float
    e_local_star: float
    r_min: float
    p_tr_min: float
    p_local_max: float
    w: bool
    s: bool

    @property
    def cloud_feasible(self) -> bool:
        return math.isfinite(self.r_min)


@dataclass
class Allocation:
    """Final classification with powers (W), receivers, rates (bits/s)."""

    classification: Classification
    tx_power: np.ndarray
    rx_beamformers: np.ndarray
    rates: np.ndarray
    local_power: np.ndarray
    sum_power: float
    completed: np.ndarray
    algorithm: str = ""
    case: str = ""
    log: list = field(default_factory=list)
    sca_traces: list = field(default_factory=list)

    @property
    def accepted(self) -> list[int]:
        return self.classification.offloading

    def recomputed_sum_power(self) -> float:
        labels = self.classification.labels
        total = 0.0
        for i, lab in enumerate(labels):
            if lab in (OH, OL):
                total += float(self.tx_power[i])
            elif lab == L:
                total += float(self.local_power[i])
        return total

    def completed_count(self) -> int:
        return int(np.sum(self.completed))

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "case": self.case,
            "labels": list(self.classification.labels),
            "tx_power_w": [float(x) for x in self.tx_power],
            "rates_bps": [float(x) for x in self.rates],
            "local_power_w": [float(x) for x in self.local_power],
            "sum_power_w": float(self.sum_power),
            "completed": [bool(x) for x in self.completed],
            "rx_beamformers": [
                [[float(z.real), float(z.imag)] for z in row]
                for row in self.rx_beamformers
            ],
            "log": self.log,
        }
