"""Monte-Carlo capacity sweeps, metric aggregation, trend checks, CSV/SVG.

Every (value, seed) cell draws one scenario and hands the same object to
every algorithm, so differences within a cell are purely algorithmic.
Channels depend on the seed only; the swept capacity is applied on top.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import SubsetCache, SubsetTooLarge, exhaustive_search, local_only
from .car import dispatch
from .dlda import classify
from .model import OH, OL, SystemConfig
from .scenario import generate

ALGORITHMS = ("Local", "ES", "CAR", "CAR-P", "CAR-D")
SWEPT = {"F_B": "bbu_capacity", "F_C": "clone_capacity"}
CSV_COLUMNS = ("algorithm", "swept_param", "value", "seed_count", "mean_sum_power_w",
               "mean_completed", "mc_util", "bbu_util")


@dataclass(frozen=True)
class SweepSpec:
    swept: str
    values: tuple
    fixed_other: float
    seeds: tuple
    algorithms: tuple = ("Local", "CAR", "CAR-P", "CAR-D")
    dims: tuple = (10, 8, 2, 2000.0)
    cfg: SystemConfig = field(default_factory=SystemConfig)

    def __post_init__(self):
        problems = validate_spec(self)
        if problems:
            raise ValueError("; ".join(problems))

    def config_for(self, value) -> SystemConfig:
        other = "clone_capacity" if self.swept == "F_B" else "bbu_capacity"
        fixed = int(self.fixed_other) if other == "clone_capacity" else float(self.fixed_other)
        val = int(value) if self.swept == "F_C" else float(value)
        return self.cfg.replace(**{SWEPT[self.swept]: val, other: fixed})


def validate_spec(spec: SweepSpec) -> list[str]:
    problems = []
    if spec.swept not in SWEPT:
        problems.append(f"swept parameter must be one of {sorted(SWEPT)}")
    if not spec.values:
        problems.append("values must be nonempty")
    if not spec.seeds:
        problems.append("seeds must be nonempty")
    unknown = [a for a in spec.algorithms if a not in ALGORITHMS]
    if unknown or not spec.algorithms:
        problems.append(f"algorithms must be a nonempty subset of {ALGORITHMS}")
    if len(spec.dims) != 4:
        problems.append("dims must be (N, J, K, area)")
    return problems


@dataclass
class RunMetrics:
    algorithm: str
    value: float
    seed: int
    sum_power_w: float
    completed: int
    mc_util: float
    bbu_util: float
    case: str
    oh_offloaded: int
    ol_offloaded: int


@dataclass(frozen=True)
class MetricsRow:
    algorithm: str
    swept_param: str
    value: float
    seed_count: int
    mean_sum_power_w: float
    mean_completed: float
    mc_util: float
    bbu_util: float


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list
    runs: list
    failures: list
    saturation: float | None


def metrics_of(alloc, cfg, value, seed) -> RunMetrics:
    acc = alloc.accepted
    labels = alloc.classification.labels
    load = float(np.sum(alloc.rates) * cfg.cycles_per_bit)
    mc = len(acc) / cfg.clone_capacity if cfg.clone_capacity > 0 else 0.0
    return RunMetrics(alloc.algorithm, value, seed, float(alloc.sum_power),
                      alloc.completed_count(), mc, load / cfg.bbu_capacity, alloc.case,
                      sum(labels[i] == OH for i in acc), sum(labels[i] == OL for i in acc))


def run_algorithm(name, scenario, cls, decisions, cache=None):
    if name == "Local":
        return local_only(scenario, decisions)
    if name == "ES":
        return exhaustive_search(scenario, decisions, cache=cache)
    return dispatch(scenario, cls, decisions, name)


def _seed_job(args):
    spec, seed = args
    N, J, K, area = spec.dims
    base = generate(seed, int(N), int(J), int(K), float(area), cfg=spec.cfg)
    cache = SubsetCache(None)
    runs, failures = [], []
    for value in spec.values:
        cfg = spec.config_for(value)
        sc = base.with_config(cfg)
        cls, dec = classify(sc)
        cache.rebind(sc)
        for name in spec.algorithms:
            try:
                alloc = run_algorithm(name, sc, cls, dec, cache)
            except SubsetTooLarge as exc:
                failures.append((name, value, seed, f"skipped: {exc}"))
                continue
            except Exception as exc:  # noqa: BLE001 - a sweep never aborts
                failures.append((name, value, seed, f"{type(exc).__name__}: {exc}"))
                continue
            runs.append(metrics_of(alloc, cfg, value, seed))
    return runs, failures, _saturation_point(spec, base)


def _saturation_point(spec, base):
    """Smallest capacity at which every offloading candidate fits."""
    cls, dec = classify(base)
    off = cls.offloading
    if spec.swept == "F_B":
        return float(sum(dec[i].r_min for i in off) * spec.cfg.cycles_per_bit)
    return float(len(off))


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Run every (value, seed) cell and average per (algorithm, value).

    Failed runs are excluded from the means and listed in
    ``result.failures``; ``seed_count`` reports how many runs entered each
    mean.  Seeds are farmed out to ``jobs`` worker processes; the merge
    order is fixed, so the output does not depend on ``jobs``.
    """
    tasks = [(spec, s) for s in spec.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_seed_job, tasks))
    else:
        parts = [_seed_job(t) for t in tasks]
    runs = [r for p in parts for r in p[0]]
    failures = [f for p in parts for f in p[1]]
    need = max(p[2] for p in parts)
    sat = next((v for v in spec.values if v >= need * (1 - 1e-12)), None)
    return SweepResult(spec, aggregate(spec, runs), runs, failures, sat)


def aggregate(spec, runs) -> list[MetricsRow]:
    rows = []
    for name in spec.algorithms:
        for value in spec.values:
            sel = [r for r in runs if r.algorithm == name and r.value == value]
            if not sel:
                rows.append(MetricsRow(name, spec.swept, value, 0, math.nan, math.nan,
                                       math.nan, math.nan))
                continue
            rows.append(MetricsRow(
                name, spec.swept, value, len(sel),
                float(np.mean([r.sum_power_w for r in sel])),
                float(np.mean([r.completed for r in sel])),
                float(np.mean([r.mc_util for r in sel])),
                float(np.mean([r.bbu_util for r in sel]))))
    return rows


# -- trend checks ------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    note: str = ""


@dataclass
class TrendReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self):
        return "\n".join(f"{'PASS' if c.passed else 'FAIL'} {c.name} {c.note}".rstrip()
                         for c in self.checks)


def non_increasing(values, band=0.02):
    """Return (ok, notes): every step may rise by at most ``band`` relative."""
    notes, ok = [], True
    for k in range(1, len(values)):
        prev, cur = values[k - 1], values[k]
        if cur > prev:
            rise = (cur - prev) / max(abs(prev), 1e-300)
            if rise > band:
                ok = False
                notes.append(f"rise {rise:.1%} at step {k}")
            else:
                notes.append(f"within-band rise {rise:.1%} at step {k}")
    return ok, notes


def flat(values, band=0.02):
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return True, 0.0
    spread = float((v.max() - v.min()) / max(abs(v.min()), 1e-300))
    return spread <= band, spread


def trend_checks(rows, saturation=None, n_ues=None, completion_from=None,
                 band: float = 0.02, util_peak: float = 0.8) -> TrendReport:
    """Qualitative checks of one sweep, per algorithm.

    * power non-increasing in the capacity within ``band``;
    * power flat (spread within ``band``) from ``saturation`` on;
    * completions equal ``n_ues`` from ``completion_from`` on;
    * utilizations within [0, 1], peaking at ``util_peak`` or more, with
      the upper half of the sweep reaching at least the first value (a
      utilization may fall again once capacity is plentiful).
    """
    rep = TrendReport()
    for name in dict.fromkeys(r.algorithm for r in rows):
        sel = sorted((r for r in rows if r.algorithm == name and r.seed_count > 0),
                     key=lambda r: r.value)
        if not sel:
            continue
        ok, notes = non_increasing([r.mean_sum_power_w for r in sel], band)
        rep.checks.append(Check(f"{name}: sum power non-increasing", ok, "; ".join(notes)))
        if saturation is not None:
            tail = [r.mean_sum_power_w for r in sel if r.value >= saturation]
            ok, spread = flat(tail, band)
            rep.checks.append(Check(f"{name}: power flat from {saturation:g}", ok,
                                    f"spread {spread:.2%} over {len(tail)} points"))
        if name == "Local":
            continue
        if n_ues is not None and completion_from is not None:
            tail = [r.mean_completed for r in sel if r.value >= completion_from]
            ok = bool(tail) and all(abs(c - n_ues) < 1e-9 for c in tail)
            rep.checks.append(Check(f"{name}: all {n_ues} complete from {completion_from:g}",
                                    ok, f"completed {tail}"))
        for metric in ("mc_util", "bbu_util"):
            series = [getattr(r, metric) for r in sel]
            bounded = all(-1e-9 <= u <= 1 + 1e-9 for u in series)
            peak = max(series)
            upper = max(series[len(series) // 2:])
            rising = upper >= series[0] * (1 - band)
            ok = bounded and rising and peak >= util_peak
            rep.checks.append(Check(
                f"{name}: {metric} rises toward 1", ok,
                f"peak {peak:.3f}, values {[round(u, 3) for u in series]}"))
    return rep


# -- output ------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.10g}"
    return str(x)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(rows, path, header_comment: str | None = None) -> None:
    text = rows_to_csv(rows)
    if header_comment:
        text = "".join(f"# {line}\n" for line in header_comment.splitlines()) + text
    with open(path, "w", newline="") as fh:
        fh.write(text)


def read_csv(path) -> list[MetricsRow]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for rec in csv.DictReader(lines):
        out.append(MetricsRow(rec["algorithm"], rec["swept_param"], float(rec["value"]),
                              int(rec["seed_count"]), float(rec["mean_sum_power_w"]),
                              float(rec["mean_completed"]), float(rec["mc_util"]),
                              float(rec["bbu_util"])))
    return out


METRIC_LABELS = {
    "mean_sum_power_w": "Sum power (W)",
    "mean_completed": "Completed UEs",
    "mc_util": "Mobile clone utilization",
    "bbu_util": "BBU utilization",
}
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")


def svg_chart(rows, metric: str, width: int = 560, height: int = 380) -> str:
    """Line chart of ``metric`` versus the swept value, one series per algorithm."""
    series = {}
    for r in rows:
        y = getattr(r, metric)
        if r.seed_count > 0 and not math.isnan(y):
            series.setdefault(r.algorithm, []).append((r.value, y))
    xs = [x for pts in series.values() for x, _ in pts] or [0.0, 1.0]
    ys = [y for pts in series.values() for _, y in pts] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    ml, mr, mt, mb = 70, 130, 30, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    swept = rows[0].swept_param if rows else ""
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for k in range(5):
        yv = y0 + (y1 - y0) * k / 4
        xv = x0 + (x1 - x0) * k / 4
        out.append(f'<text x="{ml - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
        out.append(f'<text x="{px(xv):.1f}" y="{mt + ph + 16}" text-anchor="middle">{xv:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{swept}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2})">{METRIC_LABELS.get(metric, metric)}</text>')
    for k, (name, pts) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = sorted(pts)
        path = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{path}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="2.5" fill="{color}"/>')
        ly = mt + 14 + 16 * k
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svgs(rows, prefix) -> list[str]:
    paths = []
    for metric in METRIC_LABELS:
        path = f"{prefix}_{metric}.svg"
        with open(path, "w") as fh:
            fh.write(svg_chart(rows, metric))
        paths.append(path)
    return paths
