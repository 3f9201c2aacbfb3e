"""Activation combinatorics on interference graphs.

This module is occupancy-level: everything operates on bitmasks (occupancy
``zeta``, offered-service ``s``) and is pure.  It provides

* run decomposition of a path occupancy into maximal nonempty intervals,
* maximum-service (serve as many nonempty queues as possible) tests,
* max-weight independent sets with a deterministic tie-break,
* ``project_L`` -- rewrites any valid path activation into a maximum-service
  one, run by run, keeping the inner decision where it already is maximal,
* ``refine_inner_priority`` -- re-aligns boundary runs of a maximum-service
  path activation so service hugs the ends of the line.

The path-specific transformations are the building blocks of the composed
policy catalog; their structural properties (idempotence, maximality,
identity on already-maximal policies) are covered by exhaustive tests.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import InterferenceGraph, is_activation_valid


# --------------------------------------------------------------------------
# run decomposition
# --------------------------------------------------------------------------

def _runs0(zeta: int, n: int) -> list[tuple[int, int]]:
    """Maximal intervals of nonempty queues, 0-based inclusive [a, b]."""
    runs = []
    i = 0
    while i < n:
        if zeta >> i & 1:
            j = i
            while j + 1 < n and zeta >> (j + 1) & 1:
                j += 1
            runs.append((i, j))
            i = j + 2
        else:
            i += 1
    return runs


def decompose_runs(zeta: int, n: int) -> tuple[tuple[int, int], ...]:
    """Run boundaries of a path occupancy in 1-based queue labels.

    A run is a maximal interval of consecutive nonempty queues; the result
    lists (start, end) label pairs, e.g. occupancy 0,1,1,0,1,1,1 over seven
    queues decomposes into ((2, 3), (5, 7)).
    """
    return tuple((a + 1, b + 1) for a, b in _runs0(zeta, n))


def _is_valid_path_mask(mask: int) -> bool:
    return (mask & (mask >> 1)) == 0


# --------------------------------------------------------------------------
# maximum service
# --------------------------------------------------------------------------

def max_service_count(graph: InterferenceGraph, zeta: int) -> int:
    """Largest number of nonempty queues any valid activation can serve."""
    if graph.kind == "path":
        return sum((b - a) // 2 + 1 for a, b in _runs0(zeta, graph.n))
    if graph.kind == "clique":
        return 1 if zeta else 0
    assert graph.clique_masks is not None
    occupied = [1 if zeta & m else 0 for m in graph.clique_masks]
    if graph.kind == "soc":
        return max(occupied[0], sum(occupied[1:]))
    if graph.kind == "laoc":
        # a path over cliques with unit weight on occupied cliques
        skip = take = 0
        for occ in occupied:
            skip, take = max(skip, take), skip + occ
        return max(skip, take)
    raise ValueError(f"unknown graph kind {graph.kind!r}")


def is_msm(graph: InterferenceGraph, zeta: int, activation: int) -> bool:
    """True iff the activation is valid and serves the maximum possible
    number of nonempty queues (offered bits on empty queues are ignored)."""
    if not is_activation_valid(graph, activation):
        return False
    return (activation & zeta).bit_count() == max_service_count(graph, zeta)


def max_service_sets(graph: InterferenceGraph, zeta: int) -> list[int]:
    """All valid activations achieving the maximum service count,
    restricted to nonempty queues (no offered bits on empty queues)."""
    best = max_service_count(graph, zeta)
    out = []
    for m in _independent_subsets(graph, zeta):
        if m.bit_count() == best:
            out.append(m)
    return out


def _independent_subsets(graph: InterferenceGraph, universe: int) -> list[int]:
    """All independent sets contained in the given queue subset."""
    out = [0]
    m = universe
    order = []
    while m:
        b = m & -m
        order.append(b.bit_length() - 1)
        m ^= b
    def rec(idx: int, cur: int):
        if idx == len(order):
            out.append(cur)
            return
        i = order[idx]
        rec(idx + 1, cur)
        if not cur & graph.nbr[i]:
            rec(idx + 1, cur | (1 << i))
    if order:
        out = []
        rec(0, 0)
    return out


# --------------------------------------------------------------------------
# structural service conditions on a path
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ServiceConditions:
    """Which structural conditions a path activation satisfies.

    ``odd_runs_alternating``: every odd-length run is served in the unique
    maximal pattern (both ends, every other queue).
    ``even_runs_maximal``: every even-length run (2r queues) has exactly r
    of its queues served.
    ``boundary_priority``: runs touching an end of the line are served with
    the alternation anchored at that end (for a run spanning the whole line,
    either anchor counts).

    The first two together are exactly "maximum service" on a path.
    """

    odd_runs_alternating: bool
    even_runs_maximal: bool
    boundary_priority: bool


def lemma_conditions(zeta: int, s: int, n: int) -> ServiceConditions:
    if not _is_valid_path_mask(s & ((1 << n) - 1)):
        raise ValueError("offered-service mask is not a valid path activation")
    cond1 = cond2 = cond3 = True
    for a, b in _runs0(zeta, n):
        run_mask = ((1 << (b - a + 1)) - 1) << a
        served = s & run_mask
        length = b - a + 1
        if length % 2 == 1:
            pattern = _alternation(a, b, anchor=a)
            if served != pattern:
                cond1 = False
        else:
            if served.bit_count() != length // 2:
                cond2 = False
        if a == 0 and b == n - 1:
            if served not in (_alternation(a, b, anchor=a),
                              _alternation(a, b, anchor=b)):
                cond3 = False
        elif a == 0:
            if served != _alternation(a, b, anchor=a if length % 2 else b):
                cond3 = False
        elif b == n - 1:
            if served != _alternation(a, b, anchor=a):
                cond3 = False
    return ServiceConditions(cond1, cond2, cond3)


def _alternation(a: int, b: int, anchor: int) -> int:
    """Every-other-queue mask over [a, b] whose parity matches the anchor."""
    out = 0
    start = a if (anchor - a) % 2 == 0 else a + 1
    for j in range(start, b + 1, 2):
        out |= 1 << j
    return out


# --------------------------------------------------------------------------
# max-weight independent set
# --------------------------------------------------------------------------

def _lex_less(a: int, b: int) -> bool:
    """Bitstring order reading queue 1 first: 0 beats 1 at the first
    differing queue, so the preferred pattern leaves early queues idle."""
    if a == b:
        return False
    diff = a ^ b
    low = diff & -diff
    return not a & low


def _mwis_path_weights(weights) -> tuple[int, float]:
    n = len(weights)
    best = [0.0] * (n + 2)
    for i in range(n - 1, -1, -1):
        w = weights[i]
        take = (w + best[i + 2]) if w > 0 else best[i + 1]
        best[i] = take if take > best[i + 1] else best[i + 1]
    mask = 0
    i = 0
    while i < n:
        if best[i] == best[i + 1]:
            i += 1  # skipping is optimal and lexicographically preferred
        else:
            mask |= 1 << i
            i += 2
    return mask, best[0]


def _clique_pick(weights, queues) -> tuple[int, float]:
    """Best single queue of a clique; ties go to the latest queue, which is
    the lexicographically smallest one-hot pattern."""
    best_w = 0.0
    best_i = -1
    for i in queues:
        if weights[i] > 0 and weights[i] >= best_w:
            best_w = weights[i]
            best_i = i
    if best_i < 0:
        return 0, 0.0
    return 1 << best_i, best_w


def mwis(graph: InterferenceGraph, weights) -> tuple[int, float]:
    """Max-weight independent set.

    Queues with nonpositive weight are never served.  Among optimal sets the
    lexicographically smallest bit pattern (queue 1 read first) is returned,
    which on a 3-path resolves the classic tie w1+w3 == w2 toward queue 2.
    """
    if len(weights) != graph.n:
        raise ValueError("weight vector length must match queue count")
    if graph.kind == "path":
        return _mwis_path_weights(list(weights))
    if graph.kind == "clique":
        return _clique_pick(weights, range(graph.n))
    assert graph.sizes is not None
    cliques = [list(graph.clique_queues(c)) for c in range(graph.num_cliques)]
    picks = [_clique_pick(weights, qs) for qs in cliques]
    if graph.kind == "soc":
        center_mask, center_w = picks[0]
        per_mask = 0
        per_w = 0.0
        for m, w in picks[1:]:
            per_mask |= m
            per_w += w
        if center_w > per_w:
            return center_mask, center_w
        if per_w > center_w:
            return per_mask, per_w
        return (center_mask, center_w) if _lex_less(center_mask, per_mask) \
            else (per_mask, per_w)
    if graph.kind == "laoc":
        # path DP over cliques using each clique's best queue
        k = len(picks)
        best = [0.0] * (k + 2)
        for c in range(k - 1, -1, -1):
            take = picks[c][1] + best[c + 2]
            best[c] = take if take > best[c + 1] else best[c + 1]
        mask = 0
        c = 0
        while c < k:
            if best[c] == best[c + 1]:
                c += 1
            else:
                mask |= picks[c][0]
                c += 2
        return mask, best[0]
    raise ValueError(f"unknown graph kind {graph.kind!r}")


# --------------------------------------------------------------------------
# path activation transformations
# --------------------------------------------------------------------------

def project_L(zeta: int, s: int, n: int) -> int:
    """Rewrite a valid path activation into a maximum-service one.

    Works run by run on the occupancy.  Odd-length runs have a unique
    maximal pattern, which is forced.  Even-length runs keep the inner
    decision's end-alignment: if it served the left end the alternation is
    anchored left; if the right end, anchored right; if both ends, the run
    is split at the first idle-idle gap and each side keeps its anchor.
    Bits outside runs (offered service to empty queues) are dropped.

    The result serves the maximum possible number of nonempty queues, the
    map is idempotent, and activations that are already maximal with the
    same anchors pass through unchanged.
    """
    if not _is_valid_path_mask(s & ((1 << n) - 1)):
        raise ValueError("inner activation is not a valid path activation")
    out = 0
    for a, b in _runs0(zeta, n):
        length = b - a + 1
        if length % 2 == 1:
            out |= _alternation(a, b, anchor=a)
            continue
        sa = s >> a & 1
        sb = s >> b & 1
        if sa and sb:
            split = -1
            for cand in range(a + 1, b - 1):
                if not s >> cand & 3:  # s_cand = s_{cand+1} = 0
                    split = cand
                    break
            # a valid activation serving both ends of an even run always
            # has an idle-idle gap strictly inside, at odd offset from a
            for j in range(a, split, 2):
                out |= 1 << j
            for j in range(b, split + 1, -2):
                out |= 1 << j
        elif sa:
            out |= _alternation(a, b, anchor=a)
        else:
            out |= _alternation(a, b, anchor=b)
    return out


def refine_inner_priority(zeta: int, s: int, n: int) -> int:
    """Re-anchor boundary runs of a maximum-service activation.

    Runs touching an end of the line are served with the alternation
    anchored at that end (a run spanning the whole line anchors at the far
    end); interior runs are left as given.  Offered bits outside runs are
    dropped.  The input must already be maximum-service, else ValueError.
    """
    conds = lemma_conditions(zeta, s, n)
    if not (conds.odd_runs_alternating and conds.even_runs_maximal):
        raise ValueError("activation is not maximum-service on this occupancy")
    out = 0
    for a, b in _runs0(zeta, n):
        run_mask = ((1 << (b - a + 1)) - 1) << a
        if a == 0 and b == n - 1:
            out |= _alternation(a, b, anchor=b)
        elif a == 0:
            out |= _alternation(a, b, anchor=b)
        elif b == n - 1:
            out |= _alternation(a, b, anchor=a)
        else:
            out |= s & run_mask
    return out
