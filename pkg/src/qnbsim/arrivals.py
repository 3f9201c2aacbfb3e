"""Arrival processes: i.i.d. Bernoulli and two-state Markov streams.

Each queue draws from its own random substream keyed by (seed, queue index),
so two simulations with the same seed and the same per-queue arrival spec see
bit-identical arrivals regardless of which policy runs on top -- that is what
makes coupled policy comparisons exact.

The two-state Markov process has P{0->1} = p and P{1->0} = q; an arrival
occurs in every slot the chain spends in state 1, so the long-run rate is
p/(p+q).  Chains are started from their stationary distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


# --------------------------------------------------------------------------
# specs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ArrivalSpec:
    """Per-queue arrival description; kind is 'bernoulli' or 'markov'."""

    kind: str
    rates: tuple[float, ...] | None = None
    p: tuple[float, ...] | None = None
    q: tuple[float, ...] | None = None

    @property
    def n_queues(self) -> int:
        seq = self.rates if self.kind == "bernoulli" else self.p
        assert seq is not None
        return len(seq)

    @property
    def means(self) -> tuple[float, ...]:
        """Long-run arrival rate of every queue."""
        if self.kind == "bernoulli":
            assert self.rates is not None
            return self.rates
        assert self.p is not None and self.q is not None
        return tuple(p / (p + q) for p, q in zip(self.p, self.q))


def bernoulli(rates) -> ArrivalSpec:
    rates = tuple(float(r) for r in rates)
    for r in rates:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"Bernoulli rate {r} outside [0, 1]")
    return ArrivalSpec(kind="bernoulli", rates=rates)


def markov(p, q) -> ArrivalSpec:
    p = tuple(float(v) for v in p)
    q = tuple(float(v) for v in q)
    if len(p) != len(q):
        raise ValueError("p and q must have one entry per queue")
    for v in p + q:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"transition probability {v} outside (0, 1]")
    return ArrivalSpec(kind="markov", p=p, q=q)


def markov_from_mean(rates, p: float = 0.10) -> ArrivalSpec:
    """Markov spec with burst-in probability p and prescribed mean rates.

    Solves q = (1/rate - 1) * p per queue, which is only a probability when
    rate >= p/(1+p); out-of-range rates are rejected rather than clamped.
    """
    qs = []
    for r in rates:
        if not 0.0 < r < 1.0:
            raise ValueError(f"mean rate {r} must lie strictly in (0, 1)")
        qv = (1.0 / r - 1.0) * p
        if qv > 1.0:
            raise ValueError(
                f"mean rate {r} too small for burst-in p={p}: "
                f"would need q={qv:.3f} > 1")
        qs.append(qv)
    return ArrivalSpec(kind="markov", p=tuple(p for _ in qs), q=tuple(qs))


# --------------------------------------------------------------------------
# bit generation
# --------------------------------------------------------------------------

def _queue_rng(seed: int, queue: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, queue))))


def _markov_bits(rng: np.random.Generator, p: float, q: float,
                 horizon: int) -> np.ndarray:
    """Stationary two-state chain sampled path, vectorized.

    One uniform per step drives both conditional branches: from state 0 the
    next state is 1 iff u < p, from state 1 it is 1 iff u < 1-q.  A step
    whose two branches agree pins the state regardless of history; between
    such steps the state either holds or flips, so the path is the last
    pinned value xor the number of flips since, taken mod 2.
    """
    u = rng.random(horizon)
    x0 = bool(u[0] < p / (p + q))
    if horizon == 1:
        return np.array([x0])
    un = u[1:]
    b0 = un < p          # branch from state 0
    b1 = un < 1.0 - q    # branch from state 1
    decisive = b0 == b1
    flips = ~decisive & b0          # only possible when p + q > 1
    steps = np.arange(horizon - 1)
    last = np.maximum.accumulate(np.where(decisive, steps, -1))
    cum = np.cumsum(flips)
    safe = np.maximum(last, 0)
    base = np.where(last >= 0, b0[safe], x0)
    cum_at_last = np.where(last >= 0, cum[safe], 0)
    rest = base ^ (((cum - cum_at_last) & 1) == 1)
    return np.concatenate(([x0], rest))


def _markov_bits_reference(rng: np.random.Generator, p: float, q: float,
                           horizon: int) -> np.ndarray:
    """Slot-by-slot loop version of _markov_bits; identical draws."""
    u = rng.random(horizon)
    out = np.empty(horizon, dtype=bool)
    out[0] = u[0] < p / (p + q)
    for t in range(1, horizon):
        out[t] = u[t] < (1.0 - q if out[t - 1] else p)
    return out


def queue_bits(spec: ArrivalSpec, seed: int, queue: int,
               horizon: int) -> np.ndarray:
    """Arrival indicator path of one queue (bool array of length horizon)."""
    rng = _queue_rng(seed, queue)
    if spec.kind == "bernoulli":
        assert spec.rates is not None
        lam = spec.rates[queue]
        if lam == 0.0:
            return np.zeros(horizon, dtype=bool)
        if lam == 1.0:
            return np.ones(horizon, dtype=bool)
        return rng.random(horizon) < lam
    assert spec.p is not None and spec.q is not None
    return _markov_bits(rng, spec.p[queue], spec.q[queue], horizon)


def arrival_masks(spec: ArrivalSpec, seed: int, horizon: int) -> list[int]:
    """Per-slot arrival bitmasks (bit i set iff queue i gets a packet)."""
    acc = np.zeros(horizon, dtype=np.uint32)
    for i in range(spec.n_queues):
        bits = queue_bits(spec, seed, i, horizon)
        acc |= bits.astype(np.uint32) << np.uint32(i)
    return acc.tolist()


class ArrivalStream:
    """Incremental view of the same arrival sequence, one slot at a time."""

    _BLOCK = 1 << 14

    def __init__(self, spec: ArrivalSpec, seed: int):
        self.spec = spec
        self.seed = seed
        self._buf: list[int] = []
        self._pos = 0
        self._generated = 0

    def next_arrivals(self) -> list[int]:
        """0/1 arrival indicator per queue for the next slot."""
        if self._pos >= len(self._buf):
            self._refill()
        mask = self._buf[self._pos]
        self._pos += 1
        return [(mask >> i) & 1 for i in range(self.spec.n_queues)]

    def _refill(self) -> None:
        total = self._generated + self._BLOCK
        masks = arrival_masks(self.spec, self.seed, total)
        self._buf = masks[self._generated:]
        self._pos = 0
        self._generated = total
