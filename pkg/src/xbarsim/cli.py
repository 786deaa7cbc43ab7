"""Command-line front end.

Commands:

* simulate -- one experiment; prints the backlog estimate and, for the
  maximal-matching policy with speedup >= 3, the analytic bound; writes a
  CSV row or JSON record.
* bounds   -- evaluate the closed forms for given parameters.
* table1   -- the ratio-bound table over speedups {3, 4, 5, 8, 15}.
* sweep    -- grid of runs to a plot-ready CSV.

Option precedence for simulate: built-in defaults < config file (--config,
flat `key = value` lines mirroring the flag names) < explicit flags.  The
XBAR_SEED environment variable overrides the built-in default seed only.
Exit codes: 0 success, 1 configuration or domain error, 2 lemma2 violations
detected during a run.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from typing import Dict, List, Optional

from . import engine
from .analysis import BoundInputs, bound_mm_upper, j_oq_exact, ratio_bound
from .engine import RunConfig, RunResult, SweepCell
from .errors import ConfigError, DomainError
from .policies import InputQueuedFcfs, MaximalMatching, OutputQueued, PolicyKind
from .switch import TrafficConfig

__all__ = ["main"]

TABLE1_SPEEDUPS = (3, 4, 5, 8, 15)

CSV_HEADER = [
    "policy",
    "N",
    "lambda",
    "s",
    "seed",
    "slots",
    "warmup",
    "mean_backlog",
    "ci95",
    "bound_mm",
    "j_oq_exact",
    "ratio_emp",
    "ratio_bound",
    "lemma2_violations",
    "error",
]

_DEFAULTS = {
    "ports": 16,
    "load": 0.5,
    "speedup": 3,
    "policy": "mm",
    "slots": None,
    "warmup": None,
    "seed": None,
    "out": None,
    "format": "csv",
    "verify_lemma2": False,
    "batches": 20,
    "replicas": 1,
}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


_FILE_CONVERTERS = {
    "ports": int,
    "load": float,
    "speedup": int,
    "policy": str,
    "slots": int,
    "warmup": int,
    "seed": int,
    "out": str,
    "format": str,
    "verify_lemma2": _parse_bool,
    "batches": int,
    "replicas": int,
}


def _read_config_file(path: str) -> Dict[str, object]:
    """Flat `key = value` file; '#' starts a comment; unknown keys rejected."""
    values: Dict[str, object] = {}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _FILE_CONVERTERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _FILE_CONVERTERS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}")
    return values


def _policy_from_name(name: str, speedup: int) -> PolicyKind:
    if name == "mm":
        return MaximalMatching(speedup)
    if name == "oq":
        return OutputQueued()
    if name == "iqfcfs":
        return InputQueuedFcfs()
    raise ConfigError(f"unknown policy {name!r} (expected mm, oq or iqfcfs)")


def _policy_name(policy: PolicyKind) -> str:
    if isinstance(policy, MaximalMatching):
        return "mm"
    if isinstance(policy, OutputQueued):
        return "oq"
    return "iqfcfs"


def _default_seed() -> int:
    env = os.environ.get("XBAR_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"XBAR_SEED must be an integer, got {env!r}")
    return 0


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".6g")


def _analytics(policy: PolicyKind, n_ports: int, load: float, mean: Optional[float]):
    """bound_mm, j_oq, ratio_emp, ratio_bound for a finished (or failed) run;
    entries are None when not applicable."""
    bound = rbound = None
    if isinstance(policy, MaximalMatching) and policy.speedup >= 3 and n_ports >= 2:
        bound = bound_mm_upper(BoundInputs(n_ports, load, policy.speedup))
        rbound = ratio_bound(n_ports, policy.speedup)
    j_oq = j_oq_exact(n_ports, load)
    ratio_emp = mean / j_oq if (mean is not None and j_oq > 0) else None
    return bound, j_oq, ratio_emp, rbound


def _result_row(
    policy: PolicyKind,
    n_ports: int,
    load: float,
    seed: int,
    slots: Optional[int],
    warmup: Optional[int],
    result: Optional[RunResult],
    verified: bool,
    error: Optional[str],
) -> List[str]:
    mean = result.mean_backlog if result else None
    bound, j_oq, ratio_emp, rbound = _analytics(policy, n_ports, load, mean)
    if isinstance(policy, MaximalMatching):
        s_text = str(policy.speedup)
    elif isinstance(policy, InputQueuedFcfs):
        s_text = "1"
    else:
        s_text = ""
    return [
        _policy_name(policy),
        str(n_ports),
        _fmt(load),
        s_text,
        str(seed),
        "" if slots is None else str(slots),
        "" if warmup is None else str(warmup),
        _fmt(mean),
        _fmt(result.ci95_halfwidth if result else None),
        _fmt(bound),
        _fmt(j_oq),
        _fmt(ratio_emp),
        _fmt(rbound),
        str(result.violations) if (result and verified) else "",
        error or "",
    ]


def _write_csv(path: str, rows: List[List[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)


def _json_record(cfg: RunConfig, result: RunResult) -> Dict[str, object]:
    policy = cfg.policy
    bound, j_oq, ratio_emp, rbound = _analytics(
        policy, cfg.traffic.n_ports, cfg.traffic.load, result.mean_backlog
    )
    return {
        "policy": _policy_name(policy),
        "n_ports": cfg.traffic.n_ports,
        "load": cfg.traffic.load,
        "speedup": getattr(policy, "speedup", None),
        "seed": cfg.traffic.seed,
        "slots": cfg.horizon,
        "warmup": cfg.warmup,
        "batches": cfg.batches,
        "replicas": cfg.replicas,
        "mean_backlog": result.mean_backlog,
        "ci95": result.ci95_halfwidth,
        "batch_means": list(result.batch_means),
        "bound_mm": bound,
        "j_oq_exact": j_oq,
        "ratio_emp": ratio_emp,
        "ratio_bound": rbound,
        "lemma2_violations": result.violations if cfg.verify_lemma2 else None,
    }


def _csv_floats(text: str):
    items = [p for p in text.split(",") if p.strip()]
    if not items:
        raise ConfigError("empty grid")
    return [float(p) for p in items]


def _csv_ints(text: str):
    items = [p for p in text.split(",") if p.strip()]
    if not items:
        raise ConfigError("empty grid")
    return [int(p) for p in items]


def cmd_simulate(ns: argparse.Namespace) -> int:
    merged = dict(_DEFAULTS)
    if ns.config:
        merged.update(_read_config_file(ns.config))
    for key in _DEFAULTS:
        flag = getattr(ns, key, None)
        if flag is not None:
            merged[key] = flag
    load = float(merged["load"])
    if not 0.0 <= load < 1.0:
        raise ConfigError(f"load must lie in [0, 1), got {load}")
    policy = _policy_from_name(merged["policy"], int(merged["speedup"]))
    want_bounds = bool(ns.bounds)
    is_boundable = isinstance(policy, MaximalMatching) and policy.speedup >= 3
    if want_bounds and not is_boundable:
        raise ConfigError("analytic bounds require the mm policy with speedup >= 3")
    seed = int(merged["seed"]) if merged["seed"] is not None else _default_seed()
    slots = int(merged["slots"]) if merged["slots"] is not None else engine.default_horizon(load)
    warmup = int(merged["warmup"]) if merged["warmup"] is not None else slots // 10
    cfg = RunConfig(
        policy=policy,
        traffic=TrafficConfig(load, int(merged["ports"]), seed),
        horizon=slots,
        warmup=warmup,
        batches=int(merged["batches"]),
        replicas=int(merged["replicas"]),
        verify_lemma2=bool(merged["verify_lemma2"]),
    )
    result = engine.run(cfg)
    name = _policy_name(policy)
    print(
        f"policy={name} N={cfg.traffic.n_ports} lambda={_fmt(load)} "
        f"s={getattr(policy, 'speedup', '-')} slots={slots} warmup={warmup} seed={seed}"
    )
    print(f"mean_backlog={_fmt(result.mean_backlog)} ci95={_fmt(result.ci95_halfwidth)}")
    bound, j_oq, ratio_emp, rbound = _analytics(policy, cfg.traffic.n_ports, load, result.mean_backlog)
    print(f"j_oq_exact={_fmt(j_oq)}" + (f" ratio_emp={_fmt(ratio_emp)}" if ratio_emp is not None else ""))
    if is_boundable:
        margin = bound - result.mean_backlog
        print(f"bound_mm={_fmt(bound)} margin={_fmt(margin)} ratio_bound={_fmt(rbound)}")
    elif isinstance(policy, MaximalMatching):
        print("analytic bounds require speedup >= 3; skipping bound comparison")
    if cfg.verify_lemma2:
        print(f"lemma2_violations={result.violations}")
    print(f"wall_time={result.wall_time:.1f}s")
    out = merged["out"]
    if out:
        if merged["format"] == "json":
            with open(out, "w", encoding="utf-8") as fh:
                json.dump(_json_record(cfg, result), fh, indent=2, sort_keys=True)
                fh.write("\n")
        elif merged["format"] == "csv":
            _write_csv(
                out,
                [_result_row(policy, cfg.traffic.n_ports, load, seed, slots, warmup,
                             result, cfg.verify_lemma2, None)],
            )
        else:
            raise ConfigError(f"unknown format {merged['format']!r} (expected csv or json)")
    return 2 if result.violations else 0


def cmd_bounds(ns: argparse.Namespace) -> int:
    ports = _csv_ints(ns.ports)
    speedups = _csv_ints(ns.speedup)
    loads = _csv_floats(ns.load) if ns.load is not None else [None]
    for n in ports:
        for s in speedups:
            rb = ratio_bound(n, s)
            for load in loads:
                if load is None:
                    print(f"N={n} s={s}: ratio_bound={rb:.2f}")
                    continue
                j_oq = j_oq_exact(n, load)
                bound = bound_mm_upper(BoundInputs(n, load, s))
                parts = [
                    f"N={n} s={s} lambda={_fmt(load)}:",
                    f"j_oq_exact={j_oq:.2f}",
                    f"bound_mm={bound:.2f}",
                ]
                if j_oq > 0:
                    parts.append(f"ratio_at_lambda={bound / j_oq:.2f}")
                parts.append(f"ratio_bound={rb:.2f}")
                print(" ".join(parts))
    return 0


def cmd_table1(ns: argparse.Namespace) -> int:
    n = ns.ports
    rows = [(s, ratio_bound(n, s)) for s in TABLE1_SPEEDUPS]
    print(f"ratio bound for a {n}x{n} switch")
    print("s   ratio_bound")
    for s, value in rows:
        print(f"{s:<3d} {value:.2f}")
    if ns.out:
        with open(ns.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "ratio_bound"])
            for s, value in rows:
                writer.writerow([s, f"{value:.2f}"])
    return 0


def cmd_sweep(ns: argparse.Namespace) -> int:
    loads = _csv_floats(ns.loads) if ns.loads is not None else None
    ports = _csv_ints(ns.ports_list) if ns.ports_list is not None else None
    speedups = _csv_ints(ns.speedups) if ns.speedups is not None else None
    policy = _policy_from_name(ns.policy, speedups[0] if speedups else 3)
    if speedups is not None and not isinstance(policy, MaximalMatching):
        raise ConfigError("--speedups applies to the mm policy only")
    seed = ns.seed if ns.seed is not None else _default_seed()
    scale = ns.slots is None
    slots = ns.slots if ns.slots is not None else engine.default_horizon(0.5)
    warmup = ns.warmup if ns.warmup is not None else slots // 10
    base = RunConfig(
        policy=policy,
        traffic=TrafficConfig(loads[0] if loads else 0.5, ports[0] if ports else 16, seed),
        horizon=slots,
        warmup=warmup,
        batches=ns.batches,
        replicas=ns.replicas,
        verify_lemma2=ns.verify_lemma2,
    )
    cells = engine.sweep(
        base, loads=loads, speedups=speedups, ports=ports,
        scale_horizon=scale, workers=ns.workers,
    )
    rows = []
    failures = 0
    for cell in cells:
        if cell.error is not None:
            failures += 1
        rows.append(
            _result_row(
                cell.policy,
                cell.n_ports,
                cell.load,
                seed,
                cell.config.horizon if cell.config else None,
                cell.config.warmup if cell.config else None,
                cell.result,
                ns.verify_lemma2,
                cell.error,
            )
        )
    _write_csv(ns.out, rows)
    print(f"wrote {len(rows)} rows to {ns.out} ({failures} failed)")
    return 1 if rows and failures == len(rows) else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xbarsim",
        description="Crossbar switch backlog simulator and bound calculator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one experiment")
    sim.add_argument("--ports", type=int)
    sim.add_argument("--load", type=float)
    sim.add_argument("--speedup", type=int)
    sim.add_argument("--policy", choices=("mm", "oq", "iqfcfs"))
    sim.add_argument("--slots", type=int)
    sim.add_argument("--warmup", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out")
    sim.add_argument("--format", choices=("csv", "json"))
    sim.add_argument("--verify-lemma2", dest="verify_lemma2", action="store_const", const=True)
    sim.add_argument("--bounds", action="store_true",
                     help="require the analytic bound comparison (mm, speedup >= 3)")
    sim.add_argument("--batches", type=int)
    sim.add_argument("--replicas", type=int)
    sim.add_argument("--config", help="flat key = value config file; flags override it")
    sim.set_defaults(func=cmd_simulate)

    bnd = sub.add_parser("bounds", help="evaluate the closed forms")
    bnd.add_argument("--ports", default="128", help="comma-separated port counts")
    bnd.add_argument("--speedup", default="3", help="comma-separated speedups")
    bnd.add_argument("--load", help="comma-separated loads (optional)")
    bnd.set_defaults(func=cmd_bounds)

    tbl = sub.add_parser("table1", help="ratio-bound table over speedups 3,4,5,8,15")
    tbl.add_argument("--ports", type=int, default=128)
    tbl.add_argument("--out", help="also write the table as CSV")
    tbl.set_defaults(func=cmd_table1)

    swp = sub.add_parser("sweep", help="grid of runs to CSV")
    swp.add_argument("--policy", choices=("mm", "oq", "iqfcfs"), default="mm")
    swp.add_argument("--ports-list", dest="ports_list", help="comma-separated port counts")
    swp.add_argument("--loads", help="comma-separated loads")
    swp.add_argument("--speedups", help="comma-separated speedups (mm only)")
    swp.add_argument("--slots", type=int, help="fixed horizon; default scales with 1/(1-load)^2")
    swp.add_argument("--warmup", type=int)
    swp.add_argument("--batches", type=int, default=20)
    swp.add_argument("--replicas", type=int, default=1)
    swp.add_argument("--seed", type=int)
    swp.add_argument("--verify-lemma2", dest="verify_lemma2", action="store_true")
    swp.add_argument("--workers", type=int, default=1)
    swp.add_argument("--out", required=True)
    swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
