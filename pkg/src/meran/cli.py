"""Command-line entry point: ``meran simulate | sweep | compare``.

Configuration comes from an INI file with optional ``[system]``,
``[scenario]`` and ``[sweep]`` sections.  Command-line flags override
file values, which override built-in defaults.  Example::

    [system]
    bbu_capacity = 6e6
    clone_capacity = 20

    [scenario]
    n = 20
    j = 20
    k = 2
    seed = 7

    [sweep]
    swept = F_B
    values = 1e6:9e6:1e6
    fixed_other = 20
    seeds = 1:20
    algorithms = Local, CAR, CAR-P, CAR-D
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import fields

import numpy as np

from .baselines import SubsetTooLarge, exhaustive_search, local_only
from .car import dispatch
from .dlda import CloudInfeasible, classify
from .experiments import (ALGORITHMS, SweepSpec, metrics_of, run_sweep, trend_checks,
                          write_csv, write_svgs)
from .model import SystemConfig, validate_config
from .scenario import generate

ALGO_NAMES = {a.lower(): a for a in ALGORITHMS}


class ConfigError(ValueError):
    pass


def parse_list(text: str, kind=float) -> list:
    """``"1, 2, 3"`` or inclusive ranges ``"start:stop[:step]"``."""
    out = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if ":" in part:
            bits = [float(b) for b in part.split(":")]
            if len(bits) not in (2, 3):
                raise ConfigError(f"bad range {part!r}")
            start, stop = bits[0], bits[1]
            step = bits[2] if len(bits) == 3 else 1.0
            if step <= 0:
                raise ConfigError(f"range step must be positive in {part!r}")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            out.extend(kind(start + i * step) for i in range(max(n, 0)))
        else:
            out.append(kind(float(part)))
    return out


def _coerce(name, text):
    default = getattr(SystemConfig(), name)
    ftype = {f.name: f.type for f in fields(SystemConfig)}[name]
    if text.strip().lower() in ("none", "") and "None" in str(ftype):
        return None
    if isinstance(default, bool):
        return text.strip().lower() in ("1", "true", "yes")
    if isinstance(default, int) and not isinstance(default, bool):
        return int(float(text))
    if isinstance(default, str):
        return text.strip()
    return float(text)


def load_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        cp.read(path)
    for section in cp.sections():
        if section not in ("system", "scenario", "sweep"):
            raise ConfigError(f"unknown config section [{section}]")
    return cp


def effective_settings(args) -> dict:
    """Merge defaults, file values and command-line overrides."""
    cp = load_config(args.config)
    names = {f.name for f in fields(SystemConfig)}
    sysvals = {}
    if cp.has_section("system"):
        for key, text in cp.items("system"):
            if key not in names:
                raise ConfigError(f"unknown [system] key {key!r}")
            try:
                sysvals[key] = _coerce(key, text)
            except ValueError as exc:
                raise ConfigError(f"[system] {key}: {exc}") from exc
    if args.fb is not None:
        sysvals["bbu_capacity"] = float(args.fb)
    if args.fc is not None:
        sysvals["clone_capacity"] = int(args.fc)
    cfg = SystemConfig(**sysvals)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))

    scen = {"n": 20, "j": 20, "k": 2, "area": 2000.0, "seed": 0}
    if cp.has_section("scenario"):
        for key, text in cp.items("scenario"):
            if key not in scen:
                raise ConfigError(f"unknown [scenario] key {key!r}")
            scen[key] = float(text) if key == "area" else int(float(text))
    for key in ("n", "j", "k", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            scen[key] = int(val)
    if min(scen["n"], scen["j"], scen["k"]) < 1:
        raise ConfigError("n, j, k must be >= 1")

    sweep = dict(cp.items("sweep")) if cp.has_section("sweep") else {}
    return {"cfg": cfg, "scenario": scen, "sweep": sweep}


def _header(settings) -> str:
    cfg = settings["cfg"]
    lines = [f"{f.name}={getattr(cfg, f.name)}" for f in fields(cfg)]
    lines += [f"scenario.{k}={v}" for k, v in settings["scenario"].items()]
    lines += [f"sweep.{k}={v}" for k, v in settings["sweep"].items()]
    return "\n".join(lines)


def _algo(name: str) -> str:
    key = name.strip().lower()
    if key not in ALGO_NAMES:
        raise ConfigError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    return ALGO_NAMES[key]


def _run_one(algo, sc, cls, dec):
    if algo == "Local":
        return local_only(sc, dec)
    if algo == "ES":
        return exhaustive_search(sc, dec)
    return dispatch(sc, cls, dec, algo)


def _scenario(settings, seed=None):
    s = settings["scenario"]
    return generate(s["seed"] if seed is None else seed, s["n"], s["j"], s["k"],
                    s["area"], cfg=settings["cfg"])


def cmd_simulate(args) -> int:
    settings = effective_settings(args)
    algo = _algo(args.algo)
    sc = _scenario(settings)
    cls, dec = classify(sc)
    alloc = _run_one(algo, sc, cls, dec)
    m = metrics_of(alloc, sc.cfg, None, sc.seed)
    summary = {
        "algorithm": algo, "case": alloc.case, "seed": sc.seed,
        "sum_power_w": alloc.sum_power, "completed": alloc.completed_count(),
        "incomplete": sc.n_ues - alloc.completed_count(),
        "mc_util": m.mc_util, "bbu_util": m.bbu_util,
    }
    dump = {"config": _header(settings).splitlines(), "summary": summary,
            "allocation": alloc.to_dict()}
    text = json.dumps(dump, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(f"{algo} (case {alloc.case}), seed {sc.seed}: sum power {alloc.sum_power:.6g} W, "
          f"{summary['completed']} completed, {summary['incomplete']} incomplete, "
          f"MC util {m.mc_util:.3f}, BBU util {m.bbu_util:.3f}")
    if not args.out:
        print(text)
    return 0


def sweep_spec(settings, args) -> SweepSpec:
    sw = settings["sweep"]
    if not sw:
        raise ConfigError("config has no [sweep] section")
    known = {"swept", "values", "fixed_other", "seeds", "algorithms"}
    extra = set(sw) - known
    if extra:
        raise ConfigError(f"unknown [sweep] keys {sorted(extra)}")
    swept = sw.get("swept", "F_B")
    values = parse_list(sw.get("values", ""), int if swept == "F_C" else float)
    seeds = parse_list(sw.get("seeds", ""), int)
    if not seeds:
        raise ConfigError("sweep seeds must be a nonempty list")
    if not values:
        raise ConfigError("sweep values must be a nonempty list")
    default_other = 20 if swept == "F_B" else 9e6
    fixed = float(sw.get("fixed_other", default_other))
    if args.algo:
        algos = tuple(_algo(a) for a in args.algo.split(","))
    else:
        algos = tuple(_algo(a) for a in sw.get("algorithms", "Local, CAR, CAR-P, CAR-D").split(","))
    s = settings["scenario"]
    try:
        return SweepSpec(swept, tuple(values), fixed, tuple(seeds), algos,
                         (s["n"], s["j"], s["k"], s["area"]), settings["cfg"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_sweep(args) -> int:
    settings = effective_settings(args)
    spec = sweep_spec(settings, args)
    res = run_sweep(spec, jobs=args.jobs)
    out = args.out or "sweep.csv"
    write_csv(res.rows, out, _header(settings))
    print(f"wrote {out} ({len(res.rows)} rows)")
    for name, value, seed, msg in res.failures:
        print(f"run {name} value={value:g} seed={seed}: {msg}", file=sys.stderr)
    if args.svg:
        prefix = out[:-4] if out.endswith(".csv") else out
        for path in write_svgs(res.rows, prefix):
            print(f"wrote {path}")
    report = trend_checks(res.rows, res.saturation, spec.dims[0])
    print(report)
    return 0


def cmd_compare(args) -> int:
    """Paired runs against exhaustive search on one or more seeds."""
    settings = effective_settings(args)
    sw = settings["sweep"]
    seeds = [args.seed] if args.seed is not None else \
        (parse_list(sw["seeds"], int) if "seeds" in sw else [settings["scenario"]["seed"]])
    algos = [_algo(a) for a in (args.algo or "CAR,CAR-P,CAR-D").split(",")]
    print("seed  algorithm  case  completed  sum_power_w  gap_vs_es")
    for seed in seeds:
        sc = _scenario(settings, seed)
        cls, dec = classify(sc)
        es = exhaustive_search(sc, dec)
        print(f"{seed:4d}  {'ES':9s}  {es.case:4s}  {es.completed_count():9d}  "
              f"{es.sum_power:11.6g}  {0.0:+.2%}")
        for algo in algos:
            a = _run_one(algo, sc, cls, dec)
            gap = (a.sum_power - es.sum_power) / es.sum_power
            print(f"{seed:4d}  {algo:9s}  {a.case:4s}  {a.completed_count():9d}  "
                  f"{a.sum_power:11.6g}  {gap:+.2%}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="meran", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--n", type=int, help="number of UEs")
        sp.add_argument("--j", type=int, help="number of RRHs")
        sp.add_argument("--k", type=int, help="antennas per RRH")
        sp.add_argument("--fb", type=float, help="BBU pool capacity (cycles/s)")
        sp.add_argument("--fc", type=int, help="mobile clone pool capacity")
        sp.add_argument("--out", help="output path")
        sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    s = sub.add_parser("simulate", help="run one scenario with one algorithm")
    common(s)
    s.add_argument("--algo", default="CAR", help="Local, ES, CAR, CAR-P or CAR-D")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="capacity sweep to CSV")
    common(w)
    w.add_argument("--algo", help="comma-separated algorithms (overrides config)")
    w.add_argument("--svg", action="store_true", help="also write one SVG chart per metric")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("compare", help="paired gap report against exhaustive search")
    common(c)
    c.add_argument("--algo", help="comma-separated algorithms (default CAR,CAR-P,CAR-D)")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SubsetTooLarge, CloudInfeasible) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
