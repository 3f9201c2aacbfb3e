"""Interference graphs for single-hop queueing networks.

A network is a set of N queues with unit-service slots and an interference
graph: an activation (set of queues offered service in a slot) is feasible
iff it is an independent set of the graph.  Four graph families are provided:

* ``path_graph(n)``      -- queues on a line, i interferes with i+1
* ``clique_graph(n)``    -- all queues mutually interfering (one server)
* ``star_of_cliques``    -- a central clique whose members interfere with
                            every other queue; peripheral cliques are
                            mutually independent
* ``linear_array_of_cliques`` -- cliques on a line, adjacent cliques fully
                            interfering

Queues are indexed 0..N-1 internally and activations are int bitmasks
(bit i set = queue i offered service).  User-facing labels are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

Activation = int  # bitmask over queues


# --------------------------------------------------------------------------
# graph representation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class InterferenceGraph:
    """Immutable interference structure plus optional clique metadata.

    ``nbr[i]`` is the bitmask of queues that interfere with queue i (i not
    included).  For clique-structured networks ``sizes`` holds the clique
    sizes in order, ``clique_of[i]`` the clique index of queue i and
    ``clique_masks[c]`` the bitmask of clique c's queues; queues are laid
    out clique-major (all of clique 0 first, then clique 1, ...).
    """

    kind: str
    n: int
    nbr: tuple[int, ...]
    sizes: tuple[int, ...] | None = None
    clique_of: tuple[int, ...] | None = None
    clique_masks: tuple[int, ...] | None = field(default=None)

    @property
    def num_cliques(self) -> int:
        return 0 if self.sizes is None else len(self.sizes)

    def clique_queues(self, c: int) -> range:
        """Queue indices of clique c (clique-major layout)."""
        if self.sizes is None:
            raise ValueError("graph has no clique structure")
        start = sum(self.sizes[:c])
        return range(start, start + self.sizes[c])


def _graph_from_edges(kind: str, n: int, edges: set[tuple[int, int]],
                      sizes: Sequence[int] | None = None) -> InterferenceGraph:
    nbr = [0] * n
    for i, j in edges:
        nbr[i] |= 1 << j
        nbr[j] |= 1 << i
    clique_of = None
    clique_masks = None
    if sizes is not None:
        clique_of = []
        for c, sz in enumerate(sizes):
            clique_of.extend([c] * sz)
        masks = []
        pos = 0
        for sz in sizes:
            masks.append(((1 << sz) - 1) << pos)
            pos += sz
        clique_masks = tuple(masks)
        clique_of = tuple(clique_of)
        sizes = tuple(sizes)
    return InterferenceGraph(kind=kind, n=n, nbr=tuple(nbr), sizes=sizes,
                             clique_of=clique_of, clique_masks=clique_masks)


def path_graph(n: int) -> InterferenceGraph:
    """Line of n queues; queue i interferes with queues i-1 and i+1."""
    if n < 1:
        raise ValueError("need at least one queue")
    edges = {(i, i + 1) for i in range(n - 1)}
    return _graph_from_edges("path", n, edges)


def clique_graph(n: int) -> InterferenceGraph:
    """n mutually interfering queues (at most one served per slot)."""
    if n < 1:
        raise ValueError("need at least one queue")
    edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    return _graph_from_edges("clique", n, edges, sizes=[n])


def star_of_cliques(sizes: Sequence[int]) -> InterferenceGraph:
    """Central clique (sizes[0]) interfering with every peripheral queue.

    Peripheral cliques (sizes[1:]) interfere internally but are mutually
    independent, so any set of queues drawn one-per-peripheral-clique is a
    feasible activation whenever the central clique is silent.
    """
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError("need a central clique and at least one peripheral")
    n = sum(sizes)
    central = range(sizes[0])
    edges: set[tuple[int, int]] = set()
    pos = 0
    for sz in sizes:
        for a in range(pos, pos + sz):
            for b in range(a + 1, pos + sz):
                edges.add((a, b))
        pos += sz
    for c in central:
        for j in range(sizes[0], n):
            edges.add((c, j))
    return _graph_from_edges("soc", n, edges, sizes=sizes)


def linear_array_of_cliques(sizes: Sequence[int]) -> InterferenceGraph:
    """Cliques on a line; adjacent cliques fully interfere."""
    if len(sizes) < 1 or any(s < 1 for s in sizes):
        raise ValueError("clique sizes must be positive")
    n = sum(sizes)
    edges: set[tuple[int, int]] = set()
    starts = []
    pos = 0
    for sz in sizes:
        starts.append(pos)
        for a in range(pos, pos + sz):
            for b in range(a + 1, pos + sz):
                edges.add((a, b))
        pos += sz
    for c in range(len(sizes) - 1):
        for a in range(starts[c], starts[c] + sizes[c]):
            for b in range(starts[c + 1], starts[c + 1] + sizes[c + 1]):
                edges.add((a, b))
    return _graph_from_edges("laoc", n, edges, sizes=sizes)


# --------------------------------------------------------------------------
# activations and occupancy
# --------------------------------------------------------------------------

def is_activation_valid(graph: InterferenceGraph, mask: Activation) -> bool:
    """True iff the offered-service set is an independent set of the graph."""
    m = mask
    while m:
        b = m & -m
        i = b.bit_length() - 1
        if mask & graph.nbr[i]:
            return False
        m ^= b
    return True


def enumerate_valid_activations(graph: InterferenceGraph) -> list[Activation]:
    """All independent-set bitmasks (exponential; intended for small n)."""
    return [m for m in range(1 << graph.n) if is_activation_valid(graph, m)]


def occupancy_of(backlogs: Sequence[int]) -> int:
    """Occupancy bitmask: bit i set iff queue i is nonempty."""
    z = 0
    for i, q in enumerate(backlogs):
        if q > 0:
            z |= 1 << i
    return z


def mask_to_bits(mask: int, n: int) -> list[int]:
    """Bitmask -> 0/1 list in queue order (index 0 first)."""
    return [(mask >> i) & 1 for i in range(n)]


def bits_to_mask(bits: Sequence[int]) -> int:
    """0/1 list in queue order -> bitmask."""
    m = 0
    for i, b in enumerate(bits):
        if b:
            m |= 1 << i
    return m


# --------------------------------------------------------------------------
# capacity regions
# --------------------------------------------------------------------------

def constraint_load(graph: InterferenceGraph, rates: Sequence[float]) -> float:
    """Largest constraint sum of the graph's rate region.

    The arrival-rate region of each family is an intersection of linear
    constraints of the form (sum of rates over a queue set) <= 1; this
    returns the maximum such sum, so rates are strictly inside the region
    iff the result is < 1 and on the boundary iff it equals 1.
    """
    if len(rates) != graph.n:
        raise ValueError("rate vector length must match queue count")
    if any(r < 0 for r in rates):
        raise ValueError("rates must be nonnegative")
    if graph.kind == "path":
        if graph.n == 1:
            return rates[0]
        return max(rates[i] + rates[i + 1] for i in range(graph.n - 1))
    if graph.kind == "clique":
        return sum(rates)
    sizes = graph.sizes
    assert sizes is not None
    clique_sums = []
    pos = 0
    for sz in sizes:
        clique_sums.append(sum(rates[pos:pos + sz]))
        pos += sz
    if graph.kind == "soc":
        return max(clique_sums[0] + clique_sums[m]
                   for m in range(1, len(sizes)))
    if graph.kind == "laoc":
        if len(sizes) == 1:
            return clique_sums[0]
        return max(clique_sums[c] + clique_sums[c + 1]
                   for c in range(len(sizes) - 1))
    raise ValueError(f"unknown graph kind {graph.kind!r}")


def in_capacity_region(graph: InterferenceGraph, rates: Sequence[float],
                       strict: bool = True) -> bool:
    """Whether the rate vector is supportable by some scheduling policy.

    With ``strict`` (default) the open region is tested -- the set on which
    stabilizing policies exist; ``strict=False`` includes the boundary.
    """
    load = constraint_load(graph, rates)
    return load < 1.0 if strict else load <= 1.0


def in_gamma_inner_bound(rates: Sequence[float], gamma: float) -> bool:
    """Inner rate region of the 3-queue randomized switch family.

    The gamma-parameterized policy on a 3-path is only guaranteed stable on
    the shrunken region lam1+lam2 < gamma and lam2+lam3 < gamma.
    """
    if len(rates) != 3:
        raise ValueError("the inner bound is defined for 3 queues")
    return rates[0] + rates[1] < gamma and rates[1] + rates[2] < gamma
