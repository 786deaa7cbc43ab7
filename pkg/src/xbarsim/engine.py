"""Slot-by-slot simulation driver with warmup, batch-means confidence
intervals, parameter sweeps, and the Lyapunov drift diagnostic.

Estimand: the long-run average total backlog (all input plus all output
cells), sampled on the post-update state each slot, uniformly across policies.

Reproducibility: every stream is derived from the master seed through
numpy SeedSequence spawn keys.  A plain run gives replica r the stream
SeedSequence(seed, spawn_key=(r,)); sweep cell c gives replica r
SeedSequence(seed, spawn_key=(c, r, 0)).  Identical configuration and seed
therefore reproduce results bit for bit, including across process-parallel
sweeps (results are assembled by cell index, never by completion order).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import analysis, policies
from .errors import ConfigError
from .switch import SwitchState, TrafficConfig, apply_slot, sample_arrivals, total_backlog

__all__ = [
    "RunConfig",
    "RunResult",
    "SweepCell",
    "DriftDiagnostic",
    "default_horizon",
    "run",
    "sweep",
    "run_drift_diagnostic",
]

_CONSERVATION_PERIOD = 10_000


def default_horizon(load: float, base: float = 2000.0, floor: int = 100_000, cap: int = 8_000_000) -> int:
    """Default slot count for a target load: base/(1-load)^2, clipped.

    The relaxation time of the queues grows like 1/(1-load)^2, so horizons
    must scale the same way to keep the warmup fraction meaningful.
    """
    if not 0.0 <= load < 1.0:
        raise ConfigError(f"load must lie in [0, 1), got {load}")
    return int(min(cap, max(floor, math.ceil(base / (1.0 - load) ** 2))))


@dataclass(frozen=True)
class RunConfig:
    """One simulation experiment.

    horizon slots are simulated; the first `warmup` backlog samples are
    discarded and the rest split into `batches` equal batches (tail truncated
    if it does not divide evenly).  stream_key namespaces the RNG substream,
    used by sweep to give every grid cell an independent stream.
    """

    policy: policies.PolicyKind
    traffic: TrafficConfig
    horizon: int
    warmup: int
    batches: int = 20
    replicas: int = 1
    verify_lemma2: bool = False
    record_trace: bool = False
    stream_key: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        if not 0 <= self.warmup < self.horizon:
            raise ConfigError("warmup must satisfy 0 <= warmup < horizon")
        if self.batches < 2:
            raise ConfigError("need at least 2 batches for a confidence interval")
        if (self.horizon - self.warmup) < self.batches:
            raise ConfigError("horizon - warmup must cover at least one slot per batch")
        if self.replicas < 1:
            raise ConfigError("replicas must be positive")
        if self.traffic.load >= 1.0:
            raise ConfigError("steady-state runs need load < 1")
        if self.verify_lemma2:
            if not isinstance(self.policy, policies.MaximalMatching):
                raise ConfigError("verify_lemma2 applies to the maximal-matching policy only")
            if self.policy.speedup < 3:
                raise ConfigError("verify_lemma2 needs speedup >= 3")


@dataclass(frozen=True)
class RunResult:
    """Estimate of the average backlog with a 95% batch-means interval.

    batch_means pools every replica's batches; violations counts slots
    flagged by the lemma2 verifier (0 expected for maximal matching with
    speedup >= 3).  wall_time and trace are excluded from equality so that
    determinism can be asserted as result equality.
    """

    mean_backlog: float
    ci95_halfwidth: float
    batch_means: Tuple[float, ...]
    violations: int
    slots_simulated: int
    seed: int
    wall_time: float = field(compare=False)
    trace: Optional[Tuple[np.ndarray, ...]] = field(default=None, compare=False)


@dataclass(frozen=True)
class SweepCell:
    """One sweep row: a grid cell, a replica index, and its outcome."""

    policy: policies.PolicyKind
    n_ports: int
    load: float
    speedup: Optional[int]
    cell_index: int
    replica: int
    config: Optional[RunConfig]
    result: Optional[RunResult]
    error: Optional[str] = None


@dataclass(frozen=True)
class DriftDiagnostic:
    """Time average of backlog(t) + h(t+1) - h(t) along a maximal-matching
    trajectory, with its 95% interval and the bound constant it must stay
    below."""

    mean_drift_cost: float
    ci95_halfwidth: float
    bound_constant: float
    batch_means: Tuple[float, ...]


def _simulate(cfg: RunConfig, rng: np.random.Generator, want_drift: bool = False):
    """Simulate cfg.horizon slots; returns (backlogs, violations, drifts)."""
    n = cfg.traffic.n_ports
    lam = cfg.traffic.load
    stepper = policies.stepper_for(cfg.policy, n)
    state = SwitchState.empty(n)
    horizon = cfg.horizon
    backlogs = np.empty(horizon, dtype=np.int64)
    drifts = np.empty(horizon, dtype=np.float64) if want_drift else None
    speedup = cfg.policy.speedup if isinstance(cfg.policy, policies.MaximalMatching) else 0
    violations = 0
    cum_arrivals = 0
    cum_departures = 0
    if want_drift:
        h_prev = analysis.lyapunov_h(state, lam, speedup)
    for t in range(horizon):
        arrivals = sample_arrivals(cfg.traffic, rng)
        dec = stepper.decide(state, arrivals, rng)
        if cfg.verify_lemma2:
            violations += analysis.count_lemma2_violations(state, dec, lam, speedup)
        if want_drift:
            backlog_before = total_backlog(state)
        state = apply_slot(state, arrivals, dec)
        stepper.after_slot(arrivals)
        b = total_backlog(state)
        backlogs[t] = b
        cum_arrivals += int(arrivals.a.sum())
        cum_departures += int(dec.e.sum())
        if want_drift:
            h_new = analysis.lyapunov_h(state, lam, speedup)
            drifts[t] = backlog_before + h_new - h_prev
            h_prev = h_new
        if (t + 1) % _CONSERVATION_PERIOD == 0 and cum_arrivals != cum_departures + b:
            raise RuntimeError(
                f"cell conservation violated at slot {t}: "
                f"{cum_arrivals} arrived != {cum_departures} departed + {b} backlogged"
            )
    if cum_arrivals != cum_departures + int(backlogs[-1]):
        raise RuntimeError("cell conservation violated at end of run")
    return backlogs, violations, drifts


def _batch_means(samples: np.ndarray, batches: int) -> np.ndarray:
    """Means of `batches` contiguous equal blocks; the tail that does not fill
    a block is dropped."""
    length = len(samples) // batches
    if length < 1:
        raise ConfigError("not enough samples for the requested batch count")
    return samples[: batches * length].reshape(batches, length).mean(axis=1)


def _ci95(batch_means: np.ndarray) -> Tuple[float, float]:
    k = len(batch_means)
    mean = float(batch_means.mean())
    if k < 2:
        raise ConfigError("need at least 2 batch means")
    sd = float(batch_means.std(ddof=1))
    half = float(stats.t.ppf(0.975, k - 1) * sd / math.sqrt(k))
    return mean, half


def _replica_rng(cfg: RunConfig, replica: int) -> np.random.Generator:
    key = cfg.stream_key + (replica,)
    return np.random.default_rng(np.random.SeedSequence(cfg.traffic.seed, spawn_key=key))


def run(cfg: RunConfig) -> RunResult:
    """Simulate and estimate the average backlog.

    Each replica gets an independent substream; replica batches pool into one
    set of batch means for the Student-t interval.
    """
    t0 = time.perf_counter()
    pooled: List[float] = []
    violations = 0
    traces: List[np.ndarray] = []
    for r in range(cfg.replicas):
        backlogs, v, _ = _simulate(cfg, _replica_rng(cfg, r))
        violations += v
        pooled.extend(_batch_means(backlogs[cfg.warmup :], cfg.batches))
        if cfg.record_trace:
            traces.append(backlogs)
    mean, half = _ci95(np.asarray(pooled))
    return RunResult(
        mean_backlog=mean,
        ci95_halfwidth=half,
        batch_means=tuple(float(v) for v in pooled),
        violations=violations,
        slots_simulated=cfg.horizon * cfg.replicas,
        seed=cfg.traffic.seed,
        wall_time=time.perf_counter() - t0,
        trace=tuple(traces) if cfg.record_trace else None,
    )


def run_drift_diagnostic(cfg: RunConfig) -> DriftDiagnostic:
    """Estimate the long-run average of backlog(t) + h(t+1) - h(t) along a
    maximal-matching trajectory (single replica) and pair it with the bound
    constant it is expected to stay below."""
    if not isinstance(cfg.policy, policies.MaximalMatching) or cfg.policy.speedup < 3:
        raise ConfigError("drift diagnostic needs the maximal-matching policy with speedup >= 3")
    _, _, drifts = _simulate(replace(cfg, replicas=1), _replica_rng(cfg, 0), want_drift=True)
    means = _batch_means(drifts[cfg.warmup :], cfg.batches)
    mean, half = _ci95(means)
    constant = analysis.bound_mm_upper(
        analysis.BoundInputs(cfg.traffic.n_ports, cfg.traffic.load, cfg.policy.speedup)
    )
    return DriftDiagnostic(mean, half, constant, tuple(float(v) for v in means))


def _cell_configs(
    base: RunConfig,
    loads: Sequence[float],
    speedups: Sequence[Optional[int]],
    ports: Sequence[int],
    scale_horizon: bool,
) -> List[SweepCell]:
    cells: List[SweepCell] = []
    cell_index = 0
    for n in ports:
        for load in loads:
            for s in speedups:
                policy = base.policy
                if s is not None:
                    if not isinstance(policy, policies.MaximalMatching):
                        raise ConfigError("speedup grid applies to the maximal-matching policy only")
                    policy = policies.MaximalMatching(s)
                for rep in range(base.replicas):
                    cfg = err = None
                    try:
                        horizon = default_horizon(load) if scale_horizon else base.horizon
                        warmup = horizon // 10 if scale_horizon else base.warmup
                        cfg = replace(
                            base,
                            policy=policy,
                            traffic=TrafficConfig(load, n, base.traffic.seed),
                            horizon=horizon,
                            warmup=warmup,
                            replicas=1,
                            stream_key=(cell_index, rep),
                        )
                    except (ConfigError, ValueError) as exc:
                        err = str(exc)
                    cells.append(
                        SweepCell(
                            policy=policy,
                            n_ports=n,
                            load=load,
                            speedup=getattr(policy, "speedup", None),
                            cell_index=cell_index,
                            replica=rep,
                            config=cfg,
                            result=None,
                            error=err,
                        )
                    )
                cell_index += 1
    return cells


def _run_cell(cell: SweepCell) -> SweepCell:
    if cell.error is not None:
        return cell
    try:
        return replace(cell, result=run(cell.config))
    except (ConfigError, ValueError, RuntimeError) as exc:
        return replace(cell, error=str(exc))


def sweep(
    base: RunConfig,
    loads: Optional[Sequence[float]] = None,
    speedups: Optional[Sequence[int]] = None,
    ports: Optional[Sequence[int]] = None,
    scale_horizon: bool = False,
    workers: int = 1,
) -> List[SweepCell]:
    """One run per (ports x loads x speedups) cell per replica.

    Grids default to the base config's values.  Per-cell failures are recorded
    on the cell and do not stop the sweep.  With workers > 1 cells execute in
    separate processes; per-cell substreams keep the output independent of
    scheduling order.
    """
    loads = list(loads) if loads is not None else [base.traffic.load]
    ports = list(ports) if ports is not None else [base.traffic.n_ports]
    if speedups is not None:
        speedup_grid: List[Optional[int]] = list(speedups)
    else:
        speedup_grid = [None]
    if not loads or not ports or not speedup_grid:
        raise ConfigError("sweep grids must be nonempty")
    cells = _cell_configs(base, loads, speedup_grid, ports, scale_horizon)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_cell, cells))
    else:
        done = [_run_cell(c) for c in cells]
    return sorted(done, key=lambda c: (c.cell_index, c.replica))
