"""Scheduling policies for clique-structured networks.

Two families of networks are covered: a star of cliques (one central clique
interfering with every peripheral clique, peripherals mutually independent)
and a linear array of cliques (adjacent cliques interfere).  Decisions are
hierarchical: pick which cliques transmit, then pick one queue inside each
chosen clique.

Beyond the per-slot occupancy rules, two stateful families are provided:

* framed policies, which freeze a backlog snapshot every T slots and serve
  only packets present at the frame boundary (new arrivals wait for the
  next frame);
* a channel-sensing policy, where each peripheral clique keeps an incumbent
  transmitter that holds the channel until it empties, with handoff to the
  queue that has been silent longest.

The within-clique queue selector defaults to lowest-index-first; clique
totals do not depend on the choice, so aggregate backlog statistics are
selector-invariant.  A round-robin selector is available as a stateful
wrapper for studies of per-queue fairness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .model import InterferenceGraph
from .path_policies import (
    MaxWeightPolicy,
    OccupancyPolicy,
    Policy,
    decide_spliced_refined,
)

# Control-plane cost of the distributed realizations, in minislots per slot:
# center-first needs one busy-tone round, peripherals-first adds a hole round.
MINISLOTS_CENTER_FIRST = 2
MINISLOTS_PERIPHERALS_FIRST = 3


# --------------------------------------------------------------------------
# clique-level observation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CliqueObservation:
    """Which cliques hold packets, plus the raw occupancy bitmask."""

    zeta: int
    nonempty: tuple[bool, ...]  # one flag per clique


def observe_cliques(graph: InterferenceGraph, zeta: int) -> CliqueObservation:
    if graph.clique_masks is None:
        raise ValueError("graph has no clique structure")
    flags = tuple(bool(zeta & m) for m in graph.clique_masks)
    return CliqueObservation(zeta=zeta, nonempty=flags)


def _lowest_nonempty(graph: InterferenceGraph, zeta: int, clique: int) -> int:
    sub = zeta & graph.clique_masks[clique]
    b = sub & -sub
    return b.bit_length() - 1


# --------------------------------------------------------------------------
# occupancy policies on a star of cliques
# --------------------------------------------------------------------------

class CliqueRulePolicy(OccupancyPolicy):
    """Occupancy policy given by a clique-selection rule.

    The rule maps clique-nonemptiness flags to the cliques that transmit;
    each chosen clique serves its lowest nonempty queue.  Empty cliques
    returned by a rule are ignored (nothing is offered there).
    """

    def __init__(self, graph: InterferenceGraph, name: str,
                 rule: Callable[[tuple[bool, ...]], Sequence[int]]):
        super().__init__(graph, name)
        self._rule = rule

    def decide(self, zeta: int) -> int:
        obs = observe_cliques(self.graph, zeta)
        mask = 0
        for c in self._rule(obs.nonempty):
            if obs.nonempty[c]:
                mask |= 1 << _lowest_nonempty(self.graph, zeta, c)
        return mask


def _star_rule_center_first(flags: tuple[bool, ...]) -> list[int]:
    """Central clique preempts; otherwise every nonempty peripheral goes."""
    if flags[0]:
        return [0]
    return [c for c in range(1, len(flags)) if flags[c]]


def _star_rule_peripherals_first(flags: tuple[bool, ...]) -> list[int]:
    """All peripherals nonempty -> they all go (maximal); otherwise the
    center preempts as usual."""
    peripherals = list(range(1, len(flags)))
    if all(flags[c] for c in peripherals):
        return peripherals
    if flags[0]:
        return [0]
    return [c for c in peripherals if flags[c]]


# --------------------------------------------------------------------------
# occupancy policies on a linear array of cliques
# --------------------------------------------------------------------------

def _line3_td_rule(flags: tuple[bool, ...]) -> list[int]:
    """First clique preempts (third rides along); else second; else third."""
    if flags[0]:
        return [0, 2] if flags[2] else [0]
    if flags[1]:
        return [1]
    return [2]


def _line3_bu_rule(flags: tuple[bool, ...]) -> list[int]:
    if flags[2]:
        return [0, 2] if flags[0] else [2]
    if flags[1]:
        return [1]
    return [0]


def _line5_sp_rule(flags: tuple[bool, ...]) -> list[int]:
    """Five-clique glue rule in its published branch order.

    The middle clique preempts, with the outermost cliques riding along.
    The two pair branches need both partners nonempty; a lone nonempty
    clique 2 or 4 therefore falls through to the last branch and is NOT
    served -- a corner the published branch list leaves open, kept as is.
    """
    i1, i2, i3, i4, i5 = flags
    if i3:
        out = [2]
        if i1:
            out.append(0)
        if i5:
            out.append(4)
        return out
    if i2 and i4:
        return [1, 3]
    if i2 and i5:
        return [1, 4]
    if i4 and i1:
        return [0, 3]
    return [c for c in (0, 4) if flags[c]]


class SplicedCliqueLinePolicy(OccupancyPolicy):
    """Maximal boundary-anchored rule applied at the clique level.

    The clique-nonemptiness vector, padded with virtual empty cliques up to
    five slots, is fed through the refined spliced line rule; each selected
    clique serves its lowest nonempty queue.  On a four-clique array this
    realizes the virtual-queue extension of the five-slot rule and keeps
    the clique-level decision maximal on every occupancy.
    """

    def __init__(self, graph: InterferenceGraph,
                 name: str = "theta5_tilde"):
        if graph.kind != "laoc" or not 2 <= graph.num_cliques <= 5:
            raise ValueError("needs a linear array of two to five cliques")
        super().__init__(graph, name)

    def decide(self, zeta: int) -> int:
        obs = observe_cliques(self.graph, zeta)
        cmask = 0
        for c, f in enumerate(obs.nonempty):
            if f:
                cmask |= 1 << c
        chosen = decide_spliced_refined(3, cmask)  # five clique slots
        mask = 0
        for c in range(self.graph.num_cliques):
            if chosen >> c & 1:
                mask |= 1 << _lowest_nonempty(self.graph, zeta, c)
        return mask


# --------------------------------------------------------------------------
# minislot realization of the peripherals-first star rule
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MinislotLog:
    """Control-plane record of one slot of the three-minislot protocol."""

    empty_peripheral_signals: tuple[int, ...]  # cliques that signaled a hole
    center_heard_hole: bool
    transmitting_cliques: tuple[int, ...]


def decide_star_tilde_minislot(graph: InterferenceGraph,
                               zeta: int) -> tuple[int, MinislotLog]:
    """Distributed realization of the peripherals-first star rule.

    Minislot 1: inside every peripheral clique, members learn whether their
    clique holds a packet.  Minislot 2: each EMPTY peripheral clique sends
    a hole signal, which only the center can hear.  Minislot 3: the center
    transmits iff it is nonempty and heard a hole; otherwise the nonempty
    peripheral cliques transmit.  The outcome coincides with the
    centralized rule on every occupancy.
    """
    obs = observe_cliques(graph, zeta)
    holes = tuple(c for c in range(1, graph.num_cliques)
                  if not obs.nonempty[c])
    heard = bool(holes)
    if obs.nonempty[0] and heard:
        cliques = (0,)
    else:
        cliques = tuple(c for c in range(1, graph.num_cliques)
                        if obs.nonempty[c])
    mask = 0
    for c in cliques:
        mask |= 1 << _lowest_nonempty(graph, zeta, c)
    return mask, MinislotLog(holes, heard, cliques)


# --------------------------------------------------------------------------
# stateful policy bases
# --------------------------------------------------------------------------

class SteppingPolicy(Policy):
    """Stateful per-slot decision; the engine calls reset() then step()."""

    info_class = "stepping"

    def reset(self) -> None:
        raise NotImplementedError

    def step(self, backlogs: Sequence[int], zeta: int, t: int) -> int:
        raise NotImplementedError


class RoundRobinSelectorPolicy(SteppingPolicy):
    """Clique-rule policy whose within-clique pick rotates per visit."""

    def __init__(self, graph: InterferenceGraph, name: str,
                 rule: Callable[[tuple[bool, ...]], Sequence[int]]):
        super().__init__(graph, name)
        self._rule = rule
        self.reset()

    def reset(self) -> None:
        self._next = [0] * self.graph.num_cliques

    def step(self, backlogs: Sequence[int], zeta: int, t: int) -> int:
        obs = observe_cliques(self.graph, zeta)
        mask = 0
        for c in self._rule(obs.nonempty):
            if not obs.nonempty[c]:
                continue
            queues = list(self.graph.clique_queues(c))
            k = len(queues)
            start = self._next[c] % k
            for off in range(k):
                i = queues[(start + off) % k]
                if zeta >> i & 1:
                    mask |= 1 << i
                    self._next[c] = (start + off + 1) % k
                    break
        return mask


# --------------------------------------------------------------------------
# framed policies (snapshot credits)
# --------------------------------------------------------------------------

class FramedStarPolicy(SteppingPolicy):
    """Frame-synchronized star rule serving only frame-start packets.

    Every T slots the backlog is snapshotted into per-queue credits.  If
    the central clique held packets at the frame boundary it transmits
    first, one queue-slot at a time, until its credits are gone; the
    remaining slots go to the peripheral cliques in parallel, each draining
    its own credits.  Packets arriving inside a frame are never served in
    that frame.  With T=1 this collapses to the center-first star rule
    evaluated on the occupancy.
    """

    info_class = "framed"

    def __init__(self, graph: InterferenceGraph, T: int,
                 name: str | None = None):
        if graph.kind != "soc":
            raise ValueError("needs a star of cliques")
        if T < 1:
            raise ValueError("frame length must be at least 1")
        super().__init__(graph, name or f"phi_ic_T{T}")
        self.T = T
        self.reset()

    def reset(self) -> None:
        self._credits = [0] * self.graph.n

    def step(self, backlogs: Sequence[int], zeta: int, t: int) -> int:
        g = self.graph
        if t % self.T == 0:
            self._credits = list(backlogs)
        credits = self._credits
        mask = 0
        central = [i for i in g.clique_queues(0) if credits[i] > 0]
        if central:
            i = central[0]
            credits[i] -= 1
            return 1 << i
        for c in range(1, g.num_cliques):
            for i in g.clique_queues(c):
                if credits[i] > 0:
                    credits[i] -= 1
                    mask |= 1 << i
                    break
        return mask


class FramedLinePolicy(SteppingPolicy):
    """Frame-synchronized three-clique line rule on snapshot credits.

    At each frame boundary the backlog snapshot fixes both the credits and
    the plan: if the primary clique held packets it drains first (the far
    clique drains in parallel, they do not interfere); the middle clique
    gets the channel next only if it held packets at the boundary; the far
    clique keeps draining for the rest of the frame.  ``reverse`` swaps the
    roles of the first and third cliques.
    """

    info_class = "framed"

    def __init__(self, graph: InterferenceGraph, T: int,
                 reverse: bool = False, name: str | None = None):
        if graph.kind != "laoc" or graph.num_cliques != 3:
            raise ValueError("needs a linear array of three cliques")
        if T < 1:
            raise ValueError("frame length must be at least 1")
        default = f"theta3_{'bu' if reverse else 'td'}_T{T}"
        super().__init__(graph, name or default)
        self.T = T
        self._primary, self._far = (2, 0) if reverse else (0, 2)
        self.reset()

    def reset(self) -> None:
        self._credits = [0] * self.graph.n
        self._serve_middle = False

    def _drain(self, clique: int) -> int:
        for i in self.graph.clique_queues(clique):
            if self._credits[i] > 0:
                self._credits[i] -= 1
                return 1 << i
        return 0

    def step(self, backlogs: Sequence[int], zeta: int, t: int) -> int:
        g = self.graph
        if t % self.T == 0:
            self._credits = list(backlogs)
            self._serve_middle = any(
                self._credits[i] > 0 for i in g.clique_queues(1))
        primary = self._drain(self._primary)
        if primary:
            return primary | self._drain(self._far)
        if self._serve_middle:
            middle = self._drain(1)
            if middle:
                return middle
        return self._drain(self._far)


# --------------------------------------------------------------------------
# channel-sensing policy
# --------------------------------------------------------------------------

class ChannelSensingStarPolicy(SteppingPolicy):
    """Incumbent-based sensing rule on a star with a single central queue.

    The central queue transmits whenever it holds a packet; peripherals
    sense it and stay silent.  In a silent slot each peripheral clique is
    held by an incumbent queue that keeps transmitting while nonempty.
    When the incumbent runs dry the clique grants the channel to the queue
    that has been idle longest (V_i counts slots since queue i last
    transmitted; ties break toward the lowest index; at t=0 the counters
    are seeded with the one-based queue labels).  The grantee becomes the
    new incumbent in the same slot and its counter resets on the grant,
    whether or not it had a packet to send.
    """

    info_class = "sensing"

    def __init__(self, graph: InterferenceGraph, name: str = "phi_cs"):
        if graph.kind != "soc" or graph.sizes[0] != 1:
            raise ValueError("needs a star of cliques with one central queue")
        super().__init__(graph, name)
        self.reset()

    def reset(self) -> None:
        self._idle_age = [i + 1 for i in range(self.graph.n)]
        self._incumbent: list[int | None] = [None] * self.graph.num_cliques

    def step(self, backlogs: Sequence[int], zeta: int, t: int) -> int:
        g = self.graph
        age = self._idle_age
        mask = 0
        granted: list[int] = []
        if zeta & 1:
            mask = 1
        else:
            for c in range(1, g.num_cliques):
                inc = self._incumbent[c]
                if inc is None or not zeta >> inc & 1:
                    best = max(g.clique_queues(c),
                               key=lambda i: (age[i], -i))
                    self._incumbent[c] = best
                    granted.append(best)
                    inc = best
                mask |= 1 << inc
        for i in range(g.n):
            age[i] += 1
        b = mask & zeta
        while b:
            low = b & -b
            age[low.bit_length() - 1] = 0
            b ^= low
        for i in granted:
            age[i] = 0
        return mask


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------

def _need_kind(graph: InterferenceGraph, kind: str, name: str) -> None:
    if graph.kind != kind:
        raise ValueError(f"{name} needs a {kind!r} network")


def _star(rule, default_name, minislots):
    def make(graph: InterferenceGraph, *, name: str | None = None,
             selector: str = "lowest") -> Policy:
        _need_kind(graph, "soc", default_name)
        if selector == "round_robin":
            pol = RoundRobinSelectorPolicy(graph, name or default_name, rule)
        elif selector == "lowest":
            pol = CliqueRulePolicy(graph, name or default_name, rule)
        else:
            raise ValueError(f"unknown selector {selector!r}")
        pol.minislots = minislots
        return pol
    return make


def _line(rule, default_name):
    def make(graph: InterferenceGraph, *, name: str | None = None,
             selector: str = "lowest") -> Policy:
        _need_kind(graph, "laoc", default_name)
        ncl = {"theta3_td": 3, "theta3_bu": 3, "theta5_sp": 5}[default_name]
        if graph.num_cliques != ncl:
            raise ValueError(f"{default_name} needs {ncl} cliques")
        if selector == "round_robin":
            return RoundRobinSelectorPolicy(graph, name or default_name, rule)
        if selector != "lowest":
            raise ValueError(f"unknown selector {selector!r}")
        return CliqueRulePolicy(graph, name or default_name, rule)
    return make


def _make_theta5_tilde(graph: InterferenceGraph, **_):
    return SplicedCliqueLinePolicy(graph)


def _make_phi_ic_T(graph: InterferenceGraph, *, T: int = 1, **_):
    return FramedStarPolicy(graph, T)


def _make_theta3_td_T(graph: InterferenceGraph, *, T: int = 1, **_):
    return FramedLinePolicy(graph, T, reverse=False)


def _make_theta3_bu_T(graph: InterferenceGraph, *, T: int = 1, **_):
    return FramedLinePolicy(graph, T, reverse=True)


def _make_phi_cs(graph: InterferenceGraph, **_):
    pol = ChannelSensingStarPolicy(graph)
    pol.minislots = MINISLOTS_CENTER_FIRST
    return pol


def _make_maxweight(graph: InterferenceGraph, *, alpha: float = 1.0, **_):
    return MaxWeightPolicy(graph, alpha=alpha)


COC_CATALOG: dict[str, Callable[..., Policy]] = {
    "phi_ic": _star(_star_rule_center_first, "phi_ic",
                    MINISLOTS_CENTER_FIRST),
    "phi_ic_tilde": _star(_star_rule_peripherals_first, "phi_ic_tilde",
                          MINISLOTS_PERIPHERALS_FIRST),
    "phi_ic_T": _make_phi_ic_T,
    "phi_cs": _make_phi_cs,
    "theta3_td": _line(_line3_td_rule, "theta3_td"),
    "theta3_bu": _line(_line3_bu_rule, "theta3_bu"),
    "theta3_td_T": _make_theta3_td_T,
    "theta3_bu_T": _make_theta3_bu_T,
    "theta5_sp": _line(_line5_sp_rule, "theta5_sp"),
    "theta5_tilde": _make_theta5_tilde,
    "maxweight": _make_maxweight,
}


def make_coc_policy(name: str, graph: InterferenceGraph, **params) -> Policy:
    try:
        factory = COC_CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown clique-network policy {name!r}") from None
    return factory(graph, **params)