"""Scheduling policies for queues on a line.

Policies are grouped by how much of the state they read:

* occupancy policies see only which queues are nonempty (the bitmask zeta)
  and map it deterministically to an offered-service activation;
* randomized occupancy policies map zeta to a distribution over activations;
* full-state policies read the backlog vector (max-weight and friends).

Offered service and departures differ: a policy may offer service to an
empty queue (several catalog tables do, harmlessly); the departure set is
always ``S & zeta``.  Catalog tables are written exactly in their published
branch form, offered bits included, so closed-form service statistics that
depend on the offered convention hold as stated.
"""

from __future__ import annotations

from typing import Callable, ClassVar, Sequence

from .matching import (
    max_service_sets,
    mwis,
    project_L,
    refine_inner_priority,
)
from .model import InterferenceGraph, bits_to_mask, occupancy_of


# --------------------------------------------------------------------------
# base classes
# --------------------------------------------------------------------------

class Policy:
    """Common base: a named decision rule bound to an interference graph."""

    info_class: ClassVar[str] = "abstract"

    def __init__(self, graph: InterferenceGraph, name: str):
        self.graph = graph
        self.name = name

    def __repr__(self) -> str:  # pragma: no cover - debugging nicety
        return f"<{type(self).__name__} {self.name} on {self.graph.kind}({self.graph.n})>"


class OccupancyPolicy(Policy):
    """Deterministic map from occupancy bitmask to offered activation."""

    info_class = "occupancy"

    def decide(self, zeta: int) -> int:
        raise NotImplementedError

    def decision_table(self) -> list[int]:
        """Offered activation for every occupancy, indexed by bitmask."""
        cached = getattr(self, "_table", None)
        if cached is None:
            cached = [self.decide(z) for z in range(1 << self.graph.n)]
            self._table = cached
        return cached


class FnOccupancyPolicy(OccupancyPolicy):
    def __init__(self, graph: InterferenceGraph, name: str,
                 fn: Callable[[int], int]):
        super().__init__(graph, name)
        self._fn = fn

    def decide(self, zeta: int) -> int:
        return self._fn(zeta)


class RandomizedOccupancyPolicy(Policy):
    """Occupancy-measurable map to a distribution over activations."""

    info_class = "occupancy_random"

    def options(self, zeta: int) -> list[tuple[int, float]]:
        """(activation, probability) pairs; probabilities sum to one."""
        raise NotImplementedError

    def option_table(self) -> list[list[tuple[int, float]]]:
        cached = getattr(self, "_opt_table", None)
        if cached is None:
            cached = [self.options(z) for z in range(1 << self.graph.n)]
            self._opt_table = cached
        return cached


class FullStatePolicy(Policy):
    """Reads the whole backlog vector."""

    info_class = "full_state"

    def decide_state(self, backlogs: Sequence[int]) -> int:
        raise NotImplementedError


# --------------------------------------------------------------------------
# three-queue occupancy tables
# --------------------------------------------------------------------------

_OUTER = 0b101  # serve queues 1 and 3
_MID = 0b010    # serve queue 2


def decide_three_td(zeta: int) -> int:
    """Top-down precedence: queue 1 nonempty wins the outer pattern, else a
    nonempty queue 2 claims the middle slot."""
    if zeta & 0b001:
        return _OUTER
    if zeta & 0b010:
        return _MID
    return _OUTER


def decide_three_bu(zeta: int) -> int:
    """Bottom-up mirror of the top-down rule (queue 3 checked first)."""
    if zeta & 0b100:
        return _OUTER
    if zeta & 0b010:
        return _MID
    return _OUTER


def decide_three_iq(zeta: int) -> int:
    """Middle queue gets absolute priority whenever nonempty.  Not a
    maximum-service rule: on an all-nonempty line it serves one queue
    where two are possible."""
    if zeta & 0b010:
        return _MID
    return _OUTER


def decide_three_iq_tilde(zeta: int) -> int:
    """Middle-priority rule repaired for maximal service: the outer pair
    overrides when both outer queues are nonempty."""
    if zeta & 0b001 and zeta & 0b100:
        return _OUTER
    if zeta & 0b010:
        return _MID
    return _OUTER


def decide_three_oq(zeta: int) -> int:
    """Outer queues get priority whenever either is nonempty."""
    if zeta & 0b101:
        return _OUTER
    if zeta & 0b010:
        return _MID
    return _OUTER


class RandomSwitchPolicy(RandomizedOccupancyPolicy):
    """Three-queue switch that randomizes on the two ambiguous occupancies.

    With both patterns available but neither forced ([1,1,0] or [0,1,1]),
    the middle queue is served with probability ``gamma``, the outer pair
    otherwise.  Occupancies that force a pattern get it deterministically,
    and on the remaining occupancies the offered set is the occupancy
    itself.  Guaranteed stable only on the gamma-shrunken rate region; for
    gamma below one half it loses the full region.
    """

    def __init__(self, graph: InterferenceGraph, gamma: float,
                 name: str = "rho3_gamma"):
        if graph.kind != "path" or graph.n != 3:
            raise ValueError("the random switch is a 3-queue line policy")
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must be a probability")
        super().__init__(graph, name)
        self.gamma = gamma

    def options(self, zeta: int) -> list[tuple[int, float]]:
        if zeta in (0b111, 0b101):
            return [(_OUTER, 1.0)]
        if zeta in (0b011, 0b110):
            if self.gamma == 1.0:
                return [(_MID, 1.0)]
            if self.gamma == 0.0:
                return [(_OUTER, 1.0)]
            return [(_MID, self.gamma), (_OUTER, 1.0 - self.gamma)]
        return [(zeta, 1.0)]


# --------------------------------------------------------------------------
# four- and five-queue occupancy tables
# --------------------------------------------------------------------------

def decide_four_td(zeta: int) -> int:
    """Four-queue top-down rule in its published three-branch form."""
    q1, q2, q3 = zeta & 1, zeta & 2, zeta & 4
    if q1:
        return 0b0101 if q3 else 0b1001
    if q2:
        return 0b1010
    return 0b0101 if q3 else 0b1001


def decide_four_ti(zeta: int) -> int:
    """Inner-priority four-queue rule; not maximum-service (occupancy
    [1,1,1,0] gets one served queue where two are possible)."""
    if zeta & 2:
        return 0b1010
    if zeta & 4:
        return 0b0101
    return 0b1001


def decide_four_tilde_1(zeta: int) -> int:
    """Inner-priority rule repaired for maximal service; ties on the full
    line anchor service at queue 4."""
    if zeta == 0b0111:
        return 0b0101
    if zeta & 2:
        return 0b1010
    if zeta & 4:
        return 0b0101
    return 0b1001


def decide_four_tilde_2(zeta: int) -> int:
    if zeta == 0b1110:
        return 0b1010
    if zeta & 4:
        return 0b0101
    if zeta & 2:
        return 0b1010
    return 0b1001


def decide_four_tilde_3(zeta: int) -> int:
    """Same as variant 1 except the all-nonempty tie anchors at queue 1."""
    if zeta == 0b1111:
        return 0b0101
    return decide_four_tilde_1(zeta)


def decide_four_tilde_4(zeta: int) -> int:
    """Same as variant 2 with the all-nonempty tie anchored at queue 4."""
    if zeta == 0b1111:
        return 0b1010
    return decide_four_tilde_2(zeta)


def decide_five_m(zeta: int) -> int:
    """Five-queue maximal rule in its published branch order."""
    if zeta == 0b01110:
        return 0b01010
    if zeta & 0b00100:
        return 0b10101
    if zeta & 0b00010 and zeta & 0b01000:
        return 0b01010
    if zeta & 0b00010:
        return 0b10010
    if zeta & 0b01000:
        return 0b01001
    return 0b10101


def decide_five_tilde(zeta: int) -> int:
    """Five-queue maximal rule with boundary runs anchored at the ends."""
    if zeta == 0b01110:
        return 0b01010
    if zeta in (0b01111, 0b11110):
        return 0b01010
    if zeta & 0b00100:
        return 0b10101
    if zeta & 0b00010 and zeta & 0b01000:
        return 0b01010
    if zeta & 0b00010:
        return 0b10010
    if zeta & 0b01000:
        return 0b01001
    return 0b10101


# --------------------------------------------------------------------------
# generic sweep rules for any line length
# --------------------------------------------------------------------------

def decide_generic_td(n: int, zeta: int) -> int:
    """Left-to-right sweep: serve every nonempty queue whose left neighbor
    was not just served (imaginary always-idle queues off both ends).
    Maximum-service for every n."""
    s = 0
    prev = 0
    for j in range(n):
        if zeta >> j & 1 and not prev:
            s |= 1 << j
            prev = 1
        else:
            prev = 0
    return s


def decide_generic_bu(n: int, zeta: int) -> int:
    """Right-to-left mirror of the left-to-right sweep."""
    s = 0
    nxt = 0
    for j in range(n - 1, -1, -1):
        if zeta >> j & 1 and not nxt:
            s |= 1 << j
            nxt = 1
        else:
            nxt = 0
    return s


def decide_spliced(k: int, zeta: int) -> int:
    """Glue rule on 2k-1 queues built from two k-queue sweeps.

    The center queue (index k) is served whenever nonempty; both halves
    then alternate outward from it, the left half running the
    right-to-left sweep toward queue 1 and the right half the
    left-to-right sweep toward the last queue.  Restricted to queues
    1..k this is exactly the right-to-left sweep, and restricted to
    queues k..2k-1 the left-to-right sweep -- the two agree at the
    shared center, which is what makes the glue well defined.
    """
    n = 2 * k - 1
    c = k - 1
    center = zeta >> c & 1
    s = center << c
    nxt = center
    for j in range(c - 1, -1, -1):
        if zeta >> j & 1 and not nxt:
            s |= 1 << j
            nxt = 1
        else:
            nxt = 0
    prev = center
    for j in range(c + 1, n):
        if zeta >> j & 1 and not prev:
            s |= 1 << j
            prev = 1
        else:
            prev = 0
    return s


def decide_spliced_refined(k: int, zeta: int) -> int:
    """Spliced rule made maximal and boundary-anchored: project the glue
    rule's activation to maximum service, then re-anchor boundary runs."""
    n = 2 * k - 1
    s = project_L(zeta, decide_spliced(k, zeta), n)
    return refine_inner_priority(zeta, s, n)


# --------------------------------------------------------------------------
# composed and full-state policies
# --------------------------------------------------------------------------

class _ProjectedFullState(FullStatePolicy):
    def __init__(self, inner: FullStatePolicy, name: str):
        super().__init__(inner.graph, name)
        self._inner = inner

    def decide_state(self, backlogs: Sequence[int]) -> int:
        z = occupancy_of(backlogs)
        return project_L(z, self._inner.decide_state(backlogs), self.graph.n)


def project_policy(inner: Policy, name: str | None = None) -> Policy:
    """Wrap a deterministic policy with the maximum-service projection.

    The wrapped decision is rewritten run-by-run to serve the maximum
    number of nonempty queues while keeping its end-of-run anchoring.  The
    information class follows the inner policy: projecting an occupancy
    rule yields an occupancy rule, projecting a backlog-reading rule stays
    backlog-reading.
    """
    if inner.graph.kind != "path":
        raise ValueError("projection is defined on line networks")
    name = name or f"l_of_{inner.name}"
    n = inner.graph.n
    if isinstance(inner, OccupancyPolicy):
        return FnOccupancyPolicy(inner.graph, name,
                                 lambda z: project_L(z, inner.decide(z), n))
    if isinstance(inner, FullStatePolicy):
        return _ProjectedFullState(inner, name)
    raise ValueError("can only project deterministic policies")


class MaxWeightPolicy(FullStatePolicy):
    """Serve a max-backlog-weight independent set each slot.

    ``alpha`` exponentiates the weights (alpha below one flattens them,
    trading delay for robustness); ties go to the lexicographically
    smallest activation, which on a 3-line means the middle queue.
    """

    def __init__(self, graph: InterferenceGraph, alpha: float = 1.0,
                 name: str | None = None):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        default = "maxweight" if alpha == 1.0 else f"maxweight_a{alpha:g}"
        super().__init__(graph, name or default)
        self.alpha = alpha

    def decide_state(self, backlogs: Sequence[int]) -> int:
        if self.alpha == 1.0:
            weights = backlogs
        else:
            weights = [q ** self.alpha for q in backlogs]
        return mwis(self.graph, weights)[0]


class RandomTieMaximalPolicy(RandomizedOccupancyPolicy):
    """Serve a uniformly chosen maximum-service set of nonempty queues.

    Never offers service to empty queues.  Despite serving a maximal set
    every slot, the uniform tie-break loses part of the rate region on a
    4-queue line -- the canonical switching counterexample.
    """

    def __init__(self, graph: InterferenceGraph,
                 name: str = "msm_random_tie"):
        super().__init__(graph, name)

    def options(self, zeta: int) -> list[tuple[int, float]]:
        sets = max_service_sets(self.graph, zeta)
        p = 1.0 / len(sets)
        return [(m, p) for m in sets]


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------

def _require_path(graph: InterferenceGraph, n: int | None = None) -> None:
    if graph.kind != "path":
        raise ValueError("this policy is defined on line networks")
    if n is not None and graph.n != n:
        raise ValueError(f"this policy needs exactly {n} queues")


def _table3(fn: Callable[[int], int], name: str):
    def make(graph: InterferenceGraph, **kw):
        _require_path(graph, 3)
        return FnOccupancyPolicy(graph, name, fn)
    return make


def _table4(fn: Callable[[int], int], name: str):
    def make(graph: InterferenceGraph, **kw):
        _require_path(graph, 4)
        return FnOccupancyPolicy(graph, name, fn)
    return make


def _table5(fn: Callable[[int], int], name: str):
    def make(graph: InterferenceGraph, **kw):
        _require_path(graph, 5)
        return FnOccupancyPolicy(graph, name, fn)
    return make


def _make_generic_td(graph: InterferenceGraph, **kw):
    _require_path(graph)
    return FnOccupancyPolicy(graph, "piN_td",
                             lambda z: decide_generic_td(graph.n, z))


def _make_generic_bu(graph: InterferenceGraph, **kw):
    _require_path(graph)
    return FnOccupancyPolicy(graph, "piN_bu",
                             lambda z: decide_generic_bu(graph.n, z))


def _half_size(graph: InterferenceGraph) -> int:
    if graph.n % 2 == 0 or graph.n < 3:
        raise ValueError("splicing needs an odd line of at least 3 queues")
    return (graph.n + 1) // 2


def _make_spliced(graph: InterferenceGraph, **kw):
    _require_path(graph)
    k = _half_size(graph)
    return FnOccupancyPolicy(graph, "piN_sp",
                             lambda z: decide_spliced(k, z))


def _make_spliced_refined(graph: InterferenceGraph, **kw):
    _require_path(graph)
    k = _half_size(graph)
    return FnOccupancyPolicy(graph, "piN_tilde",
                             lambda z: decide_spliced_refined(k, z))


def _make_rho(graph: InterferenceGraph, gamma: float = 0.5, **kw):
    return RandomSwitchPolicy(graph, gamma=gamma)


def _make_maxweight(graph: InterferenceGraph, alpha: float = 1.0, **kw):
    return MaxWeightPolicy(graph, alpha=alpha)


def _make_l_maxweight(graph: InterferenceGraph, alpha: float = 1.0, **kw):
    inner = MaxWeightPolicy(graph, alpha=alpha)
    return project_policy(inner, name=f"l_{inner.name}")


def _make_l_of(graph: InterferenceGraph, inner: str = "pi3_iq", **kw):
    return project_policy(make_path_policy(inner, graph, **kw))


def _make_random_tie(graph: InterferenceGraph, **kw):
    return RandomTieMaximalPolicy(graph)


PATH_CATALOG: dict[str, Callable[..., Policy]] = {
    "pi3_td": _table3(decide_three_td, "pi3_td"),
    "pi3_bu": _table3(decide_three_bu, "pi3_bu"),
    "pi3_iq": _table3(decide_three_iq, "pi3_iq"),
    "pi3_iq_tilde": _table3(decide_three_iq_tilde, "pi3_iq_tilde"),
    "pi3_oq": _table3(decide_three_oq, "pi3_oq"),
    "rho3_gamma": _make_rho,
    "pi4_td": _table4(decide_four_td, "pi4_td"),
    "pi4_ti": _table4(decide_four_ti, "pi4_ti"),
    "pi4_tilde_1": _table4(decide_four_tilde_1, "pi4_tilde_1"),
    "pi4_tilde_2": _table4(decide_four_tilde_2, "pi4_tilde_2"),
    "pi4_tilde_3": _table4(decide_four_tilde_3, "pi4_tilde_3"),
    "pi4_tilde_4": _table4(decide_four_tilde_4, "pi4_tilde_4"),
    "pi5_m": _table5(decide_five_m, "pi5_m"),
    "pi5_tilde": _table5(decide_five_tilde, "pi5_tilde"),
    "piN_td": _make_generic_td,
    "piN_bu": _make_generic_bu,
    "piN_sp": _make_spliced,
    "piN_tilde": _make_spliced_refined,
    "msm_random_tie": _make_random_tie,
    "maxweight": _make_maxweight,
    "maxweight_alpha": _make_maxweight,
    "l_maxweight": _make_l_maxweight,
    "l_maxweight_alpha": _make_l_maxweight,
    "l_of": _make_l_of,
}


def make_path_policy(name: str, graph: InterferenceGraph, **params) -> Policy:
    """Instantiate a cataloged line policy by name."""
    try:
        factory = PATH_CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown line policy {name!r}; "
                         f"known: {sorted(PATH_CATALOG)}") from None
    return factory(graph, **params)
