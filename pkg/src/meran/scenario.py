"""Reproducible network scenarios: placement, pathloss, fading, channels."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .model import SystemConfig, TaskSpec, UEProfile

# Reference workload, in units of 1e6 bits / 1e6 cycles.
REFERENCE_BITS = (0.08, 0.65, 0.4, 0.15, 0.15, 0.4, 0.6, 0.7, 0.25, 0.6,
               0.15, 0.69, 0.55, 0.56, 0.15, 0.65, 0.28, 0.19, 0.14, 0.25)
REFERENCE_CYCLES = (0.2, 1.0, 0.96, 1.1, 0.8, 1.1, 0.8, 1.21, 1.4, 1.3,
                 1.1, 0.95, 0.9, 0.8, 1.08, 0.9, 0.75, 0.88, 0.95, 0.93)

# distances below d_min are resampled; the log-distance law diverges at 0
PATHLOSS_D_MIN_KM = 1e-2


def pathloss_db(distance_km: float) -> float:
    """Path and penetration loss ``148.1 + 37.6 log10(d)`` with ``d`` in km."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(d < PATHLOSS_D_MIN_KM - 1e-12):
        raise ValueError(f"distance below {PATHLOSS_D_MIN_KM} km: {distance_km}")
    out = 148.1 + 37.6 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def table1_tasks(deadline: float = 1.0) -> list[TaskSpec]:
    """The twenty reference workloads, each with the given deadline."""
    return [TaskSpec(cycles=f * 1e6, bits=d * 1e6, deadline=deadline)
            for d, f in zip(REFERENCE_BITS, REFERENCE_CYCLES)]


@dataclass(frozen=True)
class Scenario:
    """Immutable algorithm input.

    ``channels`` has shape ``(N, K*J)`` (RRH-major stacking) and is
    normalized so that the noise power equals one when transmit powers are
    expressed in ``cfg.power_unit`` watts.
    """

    ues: tuple[UEProfile, ...]
    rrh_positions: np.ndarray
    antennas_per_rrh: int
    channels: np.ndarray
    cfg: SystemConfig
    seed: int | None = None

    def __post_init__(self):
        h = self.channels
        if h.ndim != 2 or h.shape[0] != len(self.ues):
            raise ValueError("channels must have one row per UE")
        if h.shape[1] != self.antennas_per_rrh * len(self.rrh_positions):
            raise ValueError("channel length must equal K*J")
        if not np.all(np.isfinite(h)):
            raise ValueError("channels must be finite")

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def n_rrh(self) -> int:
        return len(self.rrh_positions)

    @property
    def sigma2(self) -> float:
        return 1.0

    @property
    def _amp_scale(self) -> float:
        return math.sqrt(self.cfg.noise_power / self.cfg.power_unit)

    def raw_channels(self) -> np.ndarray:
        """Channels in physical units (before noise normalization)."""
        return self.channels * self._amp_scale

    def to_watts(self, p):
        return np.asarray(p, dtype=float) * self.cfg.power_unit

    def to_internal(self, p_w):
        return np.asarray(p_w, dtype=float) / self.cfg.power_unit

    def with_config(self, cfg: SystemConfig) -> "Scenario":
        """Same geometry and fading under a different configuration.

        The stored channels are re-normalized if the noise/power scaling
        changed, so the physical channel is preserved.
        """
        ratio = math.sqrt((self.cfg.noise_power / self.cfg.power_unit)
                          / (cfg.noise_power / cfg.power_unit))
        return Scenario(self.ues, self.rrh_positions, self.antennas_per_rrh,
                        self.channels * ratio, cfg, self.seed)


def default_profiles(tasks, cfg: SystemConfig, positions) -> tuple[UEProfile, ...]:
    return tuple(
        UEProfile(task=t, f_local_max=cfg.f_local_max, kappa=cfg.kappa, nu=cfg.nu,
                  position=(float(p[0]), float(p[1])))
        for t, p in zip(tasks, positions)
    )


def _tasks_for(n: int) -> list[TaskSpec]:
    base = table1_tasks()
    return [base[i % len(base)] for i in range(n)]


def generate(seed: int, N: int, J: int, K: int, area_m: float = 2000.0,
             cfg: SystemConfig | None = None, tasks=None) -> Scenario:
    """Draw a scenario with UEs and RRHs uniform on ``[0, area_m]^2``.

    Tasks default to the first ``N`` reference workloads (cycled if ``N > 20``).
    UEs closer than ``cfg.d_min`` metres to any RRH are re-drawn.
    """
    if cfg is None:
        cfg = SystemConfig()
    if min(N, J, K) < 1:
        raise ValueError("N, J, K must be >= 1")
    if not area_m > 0:
        raise ValueError("area_m must be positive")
    if area_m <= cfg.d_min:
        raise ValueError("area_m must exceed d_min")
    rng = np.random.default_rng(seed)
    rrh = rng.uniform(0.0, area_m, size=(J, 2))
    ue_pos = rng.uniform(0.0, area_m, size=(N, 2))
    for i in range(N):
        for _ in range(10_000):
            d = np.linalg.norm(rrh - ue_pos[i], axis=1)
            if d.min() >= cfg.d_min:
                break
            ue_pos[i] = rng.uniform(0.0, area_m, size=2)
        else:  # pragma: no cover - needs a pathological geometry
            raise RuntimeError("could not place UE away from RRHs")

    dist_km = np.linalg.norm(ue_pos[:, None, :] - rrh[None, :, :], axis=2) / 1e3
    amp = np.sqrt(10.0 ** (-pathloss_db(dist_km) / 10.0))          # (N, J)
    g = (rng.standard_normal((N, J, K)) + 1j * rng.standard_normal((N, J, K))) / np.sqrt(2)
    h_raw = (amp[:, :, None] * g).reshape(N, J * K)                 # RRH-major
    h = h_raw * math.sqrt(cfg.power_unit / cfg.noise_power)

    if tasks is None:
        tasks = _tasks_for(N)
    if len(tasks) != N:
        raise ValueError("need one task per UE")
    return Scenario(default_profiles(tasks, cfg, ue_pos), rrh, K, h, cfg, seed)


def from_channels(channels, tasks, cfg: SystemConfig | None = None,
                  antennas_per_rrh: int | None = None) -> Scenario:
    """Build a scenario directly from noise-normalized channel rows."""
    cfg = cfg or SystemConfig()
    h = np.atleast_2d(np.asarray(channels, dtype=complex))
    K = antennas_per_rrh or h.shape[1]
    J = h.shape[1] // K
    rrh = np.zeros((J, 2))
    return Scenario(default_profiles(tasks, cfg, np.zeros((len(tasks), 2))),
                    rrh, K, h, cfg, None)


# -- serialization -----------------------------------------------------------

def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "format": "meran-scenario/1",
        "seed": sc.seed,
        "antennas_per_rrh": sc.antennas_per_rrh,
        "rrh_positions": sc.rrh_positions.tolist(),
        "config": {f.name: getattr(sc.cfg, f.name) for f in fields(sc.cfg)},
        "ues": [
            {"cycles": u.task.cycles, "bits": u.task.bits, "deadline": u.task.deadline,
             "f_local_max": u.f_local_max, "kappa": u.kappa, "nu": u.nu,
             "position": list(u.position)}
            for u in sc.ues
        ],
        "channels": [[[z.real, z.imag] for z in row] for row in sc.channels.tolist()],
    }


def scenario_from_dict(data: dict) -> Scenario:
    cfg = SystemConfig(**data["config"])
    ues = tuple(
        UEProfile(TaskSpec(u["cycles"], u["bits"], u["deadline"]),
                  u["f_local_max"], u["kappa"], u["nu"], tuple(u["position"]))
        for u in data["ues"]
    )
    ch = np.array([[complex(re, im) for re, im in row] for row in data["channels"]],
                  dtype=complex).reshape(len(ues), -1)
    return Scenario(ues, np.array(data["rrh_positions"], dtype=float).reshape(-1, 2),
                    int(data["antennas_per_rrh"]), ch, cfg, data["seed"])


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=1))


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
