"""Discrete-time simulation engine.

Slot structure: arrivals land, backlogs are measured, the policy decides,
departures leave.  A queue that is offered service while empty simply does
not depart, so the backlog recursion is Q(t+1) = Q(t) - S(t)&1{Q(t)>0} + A(t+1)
with Q(t) always read just after the slot-t arrivals.

Runs are described by a picklable ``SimConfig`` that names the policy
rather than holding it, so worker processes can rebuild it.  Three loops
share the same accounting:

* occupancy policies run off a precomputed decision table indexed by the
  occupancy bitmask;
* randomized occupancy policies additionally consume one pregenerated
  uniform per slot (drawn from a dedicated substream, so arrivals stay
  bit-identical across policies with the same seed);
* everything stateful (backlog-dependent, framed, sensing) goes through a
  per-slot method call.

Backlog means use event-driven area accounting: a queue's contribution is
integrated only when its length changes, which keeps the hot loop to a few
integer operations per arrival or departure bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .arrivals import ArrivalSpec, arrival_masks
from .coc_policies import COC_CATALOG, make_coc_policy
from .matching import is_msm
from .model import (
    InterferenceGraph,
    clique_graph,
    is_activation_valid,
    linear_array_of_cliques,
    occupancy_of,
    path_graph,
    star_of_cliques,
)
from .path_policies import Policy, make_path_policy

# substream tag separating policy randomness from the arrival streams,
# which use (seed, queue_index)
POLICY_RANDOM_TAG = 10 ** 6

SAMPLE_POINTS = 4096


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def make_graph(kind: str, arg) -> InterferenceGraph:
    if kind == "path":
        return path_graph(int(arg))
    if kind == "clique":
        return clique_graph(int(arg))
    if kind == "soc":
        return star_of_cliques(list(arg))
    if kind == "laoc":
        return linear_array_of_cliques(list(arg))
    raise ValueError(f"unknown graph kind {kind!r}")


def make_policy(name: str, graph: InterferenceGraph, **params) -> Policy:
    """Unified policy factory across the path and clique-network catalogs."""
    if graph.kind == "path":
        return make_path_policy(name, graph, **params)
    if name in COC_CATALOG:
        return make_coc_policy(name, graph, **params)
    return make_path_policy(name, graph, **params)


@dataclass
class SimConfig:
    """One simulation run: network, policy (by name), arrivals, horizon."""

    graph_kind: str
    graph_arg: object                     # queue count, or clique sizes
    policy: str
    arrivals: ArrivalSpec
    policy_params: dict = field(default_factory=dict)
    horizon: int = 1_000_000
    seed: int = 0
    warmup_fraction: float = 0.1
    initial_backlogs: tuple[int, ...] | None = None
    track_queues: tuple[int, ...] = ()    # 0-based indices to sample
    collect_histogram: bool = True

    def graph(self) -> InterferenceGraph:
        return make_graph(self.graph_kind, self.graph_arg)

    def build_policy(self, graph: InterferenceGraph | None = None) -> Policy:
        return make_policy(self.policy, graph or self.graph(),
                           **self.policy_params)

    def canonical(self) -> dict:
        arg = self.graph_arg
        return {
            "graph_kind": self.graph_kind,
            "graph_arg": list(arg) if isinstance(arg, (tuple, list)) else arg,
            "policy": self.policy,
            "policy_params": dict(self.policy_params),
            "arrivals": {
                "kind": self.arrivals.kind,
                "rates": (None if self.arrivals.rates is None
                          else list(self.arrivals.rates)),
                "p": (None if self.arrivals.p is None
                      else list(self.arrivals.p)),
                "q": (None if self.arrivals.q is None
                      else list(self.arrivals.q)),
            },
            "horizon": self.horizon,
            "seed": self.seed,
            "warmup_fraction": self.warmup_fraction,
            "initial_backlogs": (None if self.initial_backlogs is None
                                 else list(self.initial_backlogs)),
        }


def config_hash(config: SimConfig) -> str:
    blob = json.dumps(config.canonical(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

@dataclass
class Metrics:
    config_hash: str
    policy: str
    seed: int
    horizon: int
    warmup: int
    mean_sum_backlog: float
    per_queue_mean: tuple[float, ...]
    max_sum_backlog: int
    growth_slope: float                   # packets per slot, sum backlog
    mean_delay: float                     # slots, via Little's law
    sample_period: int
    sample_times: tuple[int, ...]
    sum_samples: tuple[int, ...]
    queue_samples: dict[int, tuple[int, ...]] = field(default_factory=dict)
    sum_hist: dict[int, int] | None = None

    def queue_slope(self, i: int) -> float:
        return _series_slope(self.sample_times, self.queue_samples[i])


def _series_slope(times: Sequence[int], values: Sequence[int]) -> float:
    """Least-squares growth rate over the second half of a sampled series."""
    if len(values) < 4:
        return 0.0
    k = len(values) // 2
    return float(np.polyfit(times[k:], values[k:], 1)[0])


def stability_verdict(metrics: Metrics, slope_tol: float = 1e-3,
                      backlog_cap: float = 1e4) -> str:
    if metrics.growth_slope > 10 * slope_tol:
        return "unstable"
    if metrics.growth_slope < slope_tol and \
            metrics.max_sum_backlog < backlog_cap:
        return "stable"
    return "inconclusive"


def sum_backlog_cdf(metrics: Metrics) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF of the post-arrival sum backlog over measured slots."""
    if not metrics.sum_hist:
        raise ValueError("run was configured without a histogram")
    values = np.array(sorted(metrics.sum_hist))
    counts = np.array([metrics.sum_hist[v] for v in values], dtype=float)
    return values, np.cumsum(counts) / counts.sum()


def cdf_sup_distance(a: Metrics, b: Metrics) -> float:
    """Kolmogorov distance between two sum-backlog distributions."""
    va, ca = sum_backlog_cdf(a)
    vb, cb = sum_backlog_cdf(b)
    grid = np.union1d(va, vb)
    fa = np.concatenate(([0.0], ca))[np.searchsorted(va, grid, "right")]
    fb = np.concatenate(([0.0], cb))[np.searchsorted(vb, grid, "right")]
    return float(np.abs(fa - fb).max())


# --------------------------------------------------------------------------
# accounting shared by the loops
# --------------------------------------------------------------------------

class _Tally:
    """Event-driven backlog accounting for one run."""

    def __init__(self, config: SimConfig, n: int):
        self.n = n
        self.horizon = config.horizon
        self.warmup = int(config.horizon * config.warmup_fraction)
        self.area = [0] * n
        self.last = [0] * n
        self.sum_area = 0
        self.max_tot = 0
        self.period = max(1, config.horizon // SAMPLE_POINTS)
        self.times: list[int] = []
        self.sums: list[int] = []
        self.tracked = {i: [] for i in config.track_queues}
        self.hist: dict[int, int] | None = (
            {} if config.collect_histogram else None)

    def finish(self, config: SimConfig, q: list[int]) -> Metrics:
        H, W, n = self.horizon, self.warmup, self.n
        for i in range(n):
            self.area[i] += q[i] * (H - self.last[i])
        measured = max(1, H - W)
        mean_sum = self.sum_area / measured
        rate = sum(config.arrivals.means)
        return Metrics(
            config_hash=config_hash(config),
            policy=config.policy,
            seed=config.seed,
            horizon=H,
            warmup=W,
            mean_sum_backlog=mean_sum,
            per_queue_mean=tuple(a / measured for a in self.area),
            max_sum_backlog=self.max_tot,
            growth_slope=_series_slope(self.times, self.sums),
            mean_delay=mean_sum / rate if rate > 0 else 0.0,
            sample_period=self.period,
            sample_times=tuple(self.times),
            sum_samples=tuple(self.sums),
            queue_samples={i: tuple(v) for i, v in self.tracked.items()},
            sum_hist=self.hist,
        )


# --------------------------------------------------------------------------
# the three loops
# --------------------------------------------------------------------------

def _init_state(config: SimConfig, n: int) -> tuple[list[int], int, int]:
    q = list(config.initial_backlogs or (0,) * n)
    if len(q) != n:
        raise ValueError("initial backlog length does not match the network")
    return q, occupancy_of(q), sum(q)


def _run_table(graph, policy, masks, config: SimConfig) -> Metrics:
    table = policy.decision_table()
    t_ = _Tally(config, graph.n)
    q, occ, tot = _init_state(config, graph.n)
    area, last = t_.area, t_.last
    W, period = t_.warmup, t_.period
    hist = t_.hist
    for t in range(config.horizon):
        m = masks[t]
        if m:
            occ |= m
            tot += m.bit_count()
            while m:
                b = m & -m
                m ^= b
                i = b.bit_length() - 1
                area[i] += q[i] * (t - last[i])
                last[i] = t
                q[i] += 1
        if t >= W:
            if t == W:
                for i in range(graph.n):
                    area[i] = 0
                    last[i] = W
            t_.sum_area += tot
            if tot > t_.max_tot:
                t_.max_tot = tot
            if hist is not None:
                hist[tot] = hist.get(tot, 0) + 1
            if t % period == 0:
                t_.times.append(t)
                t_.sums.append(tot)
                for i in t_.tracked:
                    t_.tracked[i].append(q[i])
        d = table[occ] & occ
        if d:
            tot -= d.bit_count()
            while d:
                b = d & -d
                d ^= b
                i = b.bit_length() - 1
                area[i] += q[i] * (t + 1 - last[i])
                last[i] = t + 1
                q[i] -= 1
                if not q[i]:
                    occ ^= b
    return t_.finish(config, q)


def _policy_uniforms(config: SimConfig) -> np.ndarray:
    ss = np.random.SeedSequence((config.seed, POLICY_RANDOM_TAG))
    return np.random.Generator(np.random.PCG64(ss)).random(config.horizon)


def _run_random(graph, policy, masks, config: SimConfig) -> Metrics:
    options = policy.option_table()
    u = _policy_uniforms(config)
    t_ = _Tally(config, graph.n)
    q, occ, tot = _init_state(config, graph.n)
    area, last = t_.area, t_.last
    W, period = t_.warmup, t_.period
    hist = t_.hist
    for t in range(config.horizon):
        m = masks[t]
        if m:
            occ |= m
            tot += m.bit_count()
            while m:
                b = m & -m
                m ^= b
                i = b.bit_length() - 1
                area[i] += q[i] * (t - last[i])
                last[i] = t
                q[i] += 1
        if t >= W:
            if t == W:
                for i in range(graph.n):
                    area[i] = 0
                    last[i] = W
            t_.sum_area += tot
            if tot > t_.max_tot:
                t_.max_tot = tot
            if hist is not None:
                hist[tot] = hist.get(tot, 0) + 1
            if t % period == 0:
                t_.times.append(t)
                t_.sums.append(tot)
                for i in t_.tracked:
                    t_.tracked[i].append(q[i])
        opts = options[occ]
        if len(opts) == 1:
            s = opts[0][0]
        else:
            x = u[t]
            acc = 0.0
            s = opts[-1][0]
            for mask_, prob in opts:
                acc += prob
                if x < acc:
                    s = mask_
                    break
        d = s & occ
        if d:
            tot -= d.bit_count()
            while d:
                b = d & -d
                d ^= b
                i = b.bit_length() - 1
                area[i] += q[i] * (t + 1 - last[i])
                last[i] = t + 1
                q[i] -= 1
                if not q[i]:
                    occ ^= b
    return t_.finish(config, q)


def _decider(policy):
    cls = policy.info_class
    if cls == "full_state":
        return lambda q, occ, t: policy.decide_state(q)
    if cls in ("framed", "sensing", "stepping"):
        policy.reset()
        return lambda q, occ, t: policy.step(q, occ, t)
    if cls == "occupancy":
        return lambda q, occ, t: policy.decide(occ)
    raise ValueError(f"cannot run policy class {cls!r} in this loop")


def _run_general(graph, policy, masks, config: SimConfig) -> Metrics:
    decide = _decider(policy)
    t_ = _Tally(config, graph.n)
    q, occ, tot = _init_state(config, graph.n)
    area, last = t_.area, t_.last
    W, period = t_.warmup, t_.period
    hist = t_.hist
    for t in range(config.horizon):
        m = masks[t]
        if m:
            occ |= m
            tot += m.bit_count()
            while m:
                b = m & -m
                m ^= b
                i = b.bit_length() - 1
                area[i] += q[i] * (t - last[i])
                last[i] = t
                q[i] += 1
        if t >= W:
            if t == W:
                for i in range(graph.n):
                    area[i] = 0
                    last[i] = W
            t_.sum_area += tot
            if tot > t_.max_tot:
                t_.max_tot = tot
            if hist is not None:
                hist[tot] = hist.get(tot, 0) + 1
            if t % period == 0:
                t_.times.append(t)
                t_.sums.append(tot)
                for i in t_.tracked:
                    t_.tracked[i].append(q[i])
        d = decide(q, occ, t) & occ
        if d:
            tot -= d.bit_count()
            while d:
                b = d & -d
                d ^= b
                i = b.bit_length() - 1
                area[i] += q[i] * (t + 1 - last[i])
                last[i] = t + 1
                q[i] -= 1
                if not q[i]:
                    occ ^= b
    return t_.finish(config, q)


def run(config: SimConfig) -> Metrics:
    graph = config.graph()
    if config.arrivals.n_queues != graph.n:
        raise ValueError("arrival vector does not match the network size")
    policy = config.build_policy(graph)
    masks = arrival_masks(config.arrivals, config.seed, config.horizon)
    if policy.info_class == "occupancy":
        return _run_table(graph, policy, masks, config)
    if policy.info_class == "occupancy_random":
        return _run_random(graph, policy, masks, config)
    return _run_general(graph, policy, masks, config)


# --------------------------------------------------------------------------
# parallel and coupled runs
# --------------------------------------------------------------------------

def run_many(configs: Sequence[SimConfig],
             max_workers: int | None = None) -> list[Metrics]:
    """Run configs, forking workers only when QNB_THREADS allows it."""
    if max_workers is None:
        max_workers = int(os.environ.get("QNB_THREADS", "1"))
    if max_workers <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run, configs))


def coupled_compare(config_a: SimConfig, config_b: SimConfig
                    ) -> tuple[Metrics, Metrics]:
    """Run two policies against bit-identical arrivals.

    Both configs must agree on everything that feeds the arrival streams;
    only the policy may differ.
    """
    if (config_a.arrivals != config_b.arrivals
            or config_a.seed != config_b.seed
            or config_a.horizon != config_b.horizon):
        raise ValueError("coupled runs need identical arrivals and seed")
    return run(config_a), run(config_b)


# --------------------------------------------------------------------------
# traced runs and monitors
# --------------------------------------------------------------------------

class PairServiceMonitor:
    """Checks that whenever a designated pair of queue groups holds a
    packet, at least one departure occurs inside the pair that slot."""

    def __init__(self, pairs: Iterable[tuple[Iterable[int], Iterable[int]]],
                 name: str = "pair_service"):
        self.name = name
        self.masks = []
        for a, b in pairs:
            mask = 0
            for i in a:
                mask |= 1 << i
            for i in b:
                mask |= 1 << i
            self.masks.append(mask)
        self.violations = 0
        self.first_violation: int | None = None

    def observe(self, t, q, occ, s, d):
        for mask in self.masks:
            if occ & mask and not d & mask:
                self.violations += 1
                if self.first_violation is None:
                    self.first_violation = t
                return


def path_adjacent_pairs(graph: InterferenceGraph):
    if graph.kind != "path":
        raise ValueError("adjacent-queue pairs are a path notion")
    return [((i,), (i + 1,)) for i in range(graph.n - 1)]


def star_clique_pairs(graph: InterferenceGraph):
    if graph.kind != "soc":
        raise ValueError("central/peripheral pairs are a star notion")
    central = tuple(graph.clique_queues(0))
    return [(central, tuple(graph.clique_queues(c)))
            for c in range(1, graph.num_cliques)]


class MsmMonitor:
    """Checks that every slot's departures form a maximal service set."""

    def __init__(self, graph: InterferenceGraph, name: str = "msm"):
        self.graph = graph
        self.name = name
        self.violations = 0
        self.first_violation: int | None = None

    def observe(self, t, q, occ, s, d):
        if not is_msm(self.graph, occ, d):
            self.violations += 1
            if self.first_violation is None:
                self.first_violation = t


class ServiceRateMonitor:
    """Accumulates per-queue offered-service and departure frequencies."""

    def __init__(self, n: int, warmup: int = 0, name: str = "service_rate"):
        self.n = n
        self.warmup = warmup
        self.name = name
        self.slots = 0
        self.offered = [0] * n
        self.departed = [0] * n
        self.empty_slots = [0] * n

    def observe(self, t, q, occ, s, d):
        if t < self.warmup:
            return
        self.slots += 1
        for i in range(self.n):
            bit = 1 << i
            if s & bit:
                self.offered[i] += 1
            if d & bit:
                self.departed[i] += 1
            if not occ & bit:
                self.empty_slots[i] += 1

    def offered_rate(self, i: int) -> float:
        return self.offered[i] / self.slots

    def departure_rate(self, i: int) -> float:
        return self.departed[i] / self.slots

    def empty_rate(self, i: int) -> float:
        return self.empty_slots[i] / self.slots


class ActivationSanityMonitor:
    """Checks S is a valid activation and departures never exceed it."""

    def __init__(self, graph: InterferenceGraph, name: str = "sanity"):
        self.graph = graph
        self.name = name
        self.violations = 0
        self.first_violation: int | None = None

    def observe(self, t, q, occ, s, d):
        if not is_activation_valid(self.graph, s) or d & ~s or d & ~occ:
            self.violations += 1
            if self.first_violation is None:
                self.first_violation = t


def run_traced(config: SimConfig, monitors: Sequence = (),
               trace_path: str | None = None,
               trace_limit: int | None = None) -> Metrics:
    """Slower loop that feeds every slot to the monitors and, optionally,
    writes a slot/backlog/offered/departed CSV trace."""
    graph = config.graph()
    if config.arrivals.n_queues != graph.n:
        raise ValueError("arrival vector does not match the network size")
    policy = config.build_policy(graph)
    masks = arrival_masks(config.arrivals, config.seed, config.horizon)

    if policy.info_class == "occupancy_random":
        options = policy.option_table()
        u = _policy_uniforms(config)

        def decide(q, occ, t):
            opts = options[occ]
            if len(opts) == 1:
                return opts[0][0]
            x = u[t]
            acc = 0.0
            for mask_, prob in opts:
                acc += prob
                if x < acc:
                    return mask_
            return opts[-1][0]
    else:
        decide = _decider(policy)

    writer = None
    fh = None
    if trace_path is not None:
        fh = open(trace_path, "w", newline="")
        writer = csv.writer(fh)
        labels = [f"Q_{i + 1}" for i in range(graph.n)]
        labels += [f"S_{i + 1}" for i in range(graph.n)]
        labels += [f"D_{i + 1}" for i in range(graph.n)]
        writer.writerow(["slot"] + labels)

    t_ = _Tally(config, graph.n)
    q, occ, tot = _init_state(config, graph.n)
    area, last = t_.area, t_.last
    W, period = t_.warmup, t_.period
    hist = t_.hist
    try:
        for t in range(config.horizon):
            m = masks[t]
            if m:
                occ |= m
                tot += m.bit_count()
                while m:
                    b = m & -m
                    m ^= b
                    i = b.bit_length() - 1
                    area[i] += q[i] * (t - last[i])
                    last[i] = t
                    q[i] += 1
            if t >= W:
                if t == W:
                    for i in range(graph.n):
                        area[i] = 0
                        last[i] = W
                t_.sum_area += tot
                if tot > t_.max_tot:
                    t_.max_tot = tot
                if hist is not None:
                    hist[tot] = hist.get(tot, 0) + 1
                if t % period == 0:
                    t_.times.append(t)
                    t_.sums.append(tot)
                    for i in t_.tracked:
                        t_.tracked[i].append(q[i])
            s = decide(q, occ, t)
            d = s & occ
            for mon in monitors:
                mon.observe(t, q, occ, s, d)
            if writer is not None and (trace_limit is None or t < trace_limit):
                row = [t] + list(q)
                row += [s >> i & 1 for i in range(graph.n)]
                row += [d >> i & 1 for i in range(graph.n)]
                writer.writerow(row)
            if d:
                tot -= d.bit_count()
                while d:
                    b = d & -d
                    d ^= b
                    i = b.bit_length() - 1
                    area[i] += q[i] * (t + 1 - last[i])
                    last[i] = t + 1
                    q[i] -= 1
                    if not q[i]:
                        occ ^= b
    finally:
        if fh is not None:
            fh.close()
    return t_.finish(config, q)


# --------------------------------------------------------------------------
# CSV export
# --------------------------------------------------------------------------

METRIC_COLUMNS = [
    "config", "policy", "seed", "horizon", "warmup",
    "mean_sum_backlog", "mean_delay", "max_sum_backlog",
    "growth_slope", "verdict",
]


def write_metrics_csv(path: str, results: Sequence[Metrics],
                      extra: dict[str, Sequence] | None = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS + list(extra))
        for k, m in enumerate(results):
            row = [
                m.config_hash, m.policy, m.seed, m.horizon, m.warmup,
                f"{m.mean_sum_backlog:.6g}", f"{m.mean_delay:.6g}",
                m.max_sum_backlog, f"{m.growth_slope:.6g}",
                stability_verdict(m),
            ]
            row += [extra[c][k] for c in extra]
            w.writerow(row)