"""Tests for clique-network policies: star rules, line rules, framed and
sensing variants."""

import pytest

from qnbsim.coc_policies import (
    COC_CATALOG,
    MINISLOTS_CENTER_FIRST,
    MINISLOTS_PERIPHERALS_FIRST,
    decide_star_tilde_minislot,
    make_coc_policy,
    observe_cliques,
)
from qnbsim.matching import is_msm
from qnbsim.model import (
    is_activation_valid,
    linear_array_of_cliques,
    occupancy_of,
    star_of_cliques,
)


def _m(bits):
    mask = 0
    for i, b in enumerate(bits):
        mask |= b << i
    return mask


def _bits(mask, n):
    return [mask >> i & 1 for i in range(n)]


STAR3 = star_of_cliques([1, 1, 1])          # queues: 0 central; 1, 2 peripheral
STAR122 = star_of_cliques([1, 2, 2])        # 0 | 1,2 | 3,4
LINE212 = linear_array_of_cliques([2, 1, 2])  # 0,1 | 2 | 3,4
LINE5 = linear_array_of_cliques([1, 1, 1, 1, 1])


# --------------------------------------------------------------------------
# clique observation
# --------------------------------------------------------------------------

def test_observe_cliques():
    obs = observe_cliques(LINE212, _m([0, 1, 0, 0, 1]))
    assert obs.nonempty == (True, False, True)
    obs = observe_cliques(STAR122, _m([1, 0, 0, 0, 0]))
    assert obs.nonempty == (True, False, False)


# --------------------------------------------------------------------------
# star rules
# --------------------------------------------------------------------------

# full decision tables on the three-singleton star, central queue first
STAR3_IC = {
    (0, 0, 0): [0, 0, 0],
    (1, 0, 0): [1, 0, 0],
    (0, 1, 0): [0, 1, 0],
    (0, 0, 1): [0, 0, 1],
    (1, 1, 0): [1, 0, 0],
    (1, 0, 1): [1, 0, 0],
    (0, 1, 1): [0, 1, 1],
    (1, 1, 1): [1, 0, 0],
}
STAR3_IC_TILDE = {
    (0, 0, 0): [0, 0, 0],
    (1, 0, 0): [1, 0, 0],
    (0, 1, 0): [0, 1, 0],
    (0, 0, 1): [0, 0, 1],
    (1, 1, 0): [1, 0, 0],
    (1, 0, 1): [1, 0, 0],
    (0, 1, 1): [0, 1, 1],
    (1, 1, 1): [0, 1, 1],
}


def test_star_center_first_table():
    pol = make_coc_policy("phi_ic", STAR3)
    for zeta, want in STAR3_IC.items():
        assert _bits(pol.decide(_m(list(zeta))), 3) == want


def test_star_peripherals_first_table():
    pol = make_coc_policy("phi_ic_tilde", STAR3)
    for zeta, want in STAR3_IC_TILDE.items():
        assert _bits(pol.decide(_m(list(zeta))), 3) == want


def test_star_rules_differ_only_when_everything_is_nonempty():
    ic = make_coc_policy("phi_ic", STAR3)
    tilde = make_coc_policy("phi_ic_tilde", STAR3)
    diffs = [z for z in range(8) if ic.decide(z) != tilde.decide(z)]
    assert diffs == [0b111]


def test_star_backlog_examples():
    # backlogs [2, 1, 1]: center-first serves the central queue only,
    # peripherals-first serves both peripheral queues
    ic = make_coc_policy("phi_ic", STAR3)
    tilde = make_coc_policy("phi_ic_tilde", STAR3)
    z = occupancy_of([2, 1, 1])
    assert _bits(ic.decide(z), 3) == [1, 0, 0]
    assert _bits(tilde.decide(z), 3) == [0, 1, 1]
    # backlogs [0, 1, 0]: both serve the lone nonempty peripheral
    z = occupancy_of([0, 1, 0])
    assert _bits(ic.decide(z), 3) == [0, 1, 0]
    assert _bits(tilde.decide(z), 3) == [0, 1, 0]


def test_star_rules_pick_lowest_queue_within_clique():
    ic = make_coc_policy("phi_ic", STAR122)
    tilde = make_coc_policy("phi_ic_tilde", STAR122)
    # peripheral cliques {1,2} and {3,4} fully backlogged, center empty
    z = _m([0, 1, 1, 1, 1])
    assert _bits(ic.decide(z), 5) == [0, 1, 0, 1, 0]
    assert _bits(tilde.decide(z), 5) == [0, 1, 0, 1, 0]
    # only the second member of each clique holds packets
    z = _m([0, 0, 1, 0, 1])
    assert _bits(ic.decide(z), 5) == [0, 0, 1, 0, 1]


def test_star_decisions_valid_and_never_offered_to_empty():
    g = star_of_cliques([2, 3, 2])
    for name in ("phi_ic", "phi_ic_tilde"):
        pol = make_coc_policy(name, g)
        for z in range(1 << g.n):
            s = pol.decide(z)
            assert is_activation_valid(g, s)
            assert s & ~z == 0


def test_minislot_realization_matches_peripherals_first():
    for g in (STAR3, STAR122, star_of_cliques([2, 3, 2])):
        tilde = make_coc_policy("phi_ic_tilde", g)
        for z in range(1 << g.n):
            mask, log = decide_star_tilde_minislot(g, z)
            assert mask == tilde.decide(z)
            assert log.center_heard_hole == bool(log.empty_peripheral_signals)


def test_minislot_log_contents():
    # center and first peripheral clique loaded, second peripheral empty
    z = _m([1, 1, 0, 0, 0])
    mask, log = decide_star_tilde_minislot(STAR122, z)
    assert log.empty_peripheral_signals == (2,)
    assert log.center_heard_hole
    assert log.transmitting_cliques == (0,)
    assert _bits(mask, 5) == [1, 0, 0, 0, 0]


def test_minislot_counts_exposed():
    assert MINISLOTS_CENTER_FIRST == 2
    assert MINISLOTS_PERIPHERALS_FIRST == 3
    assert make_coc_policy("phi_ic", STAR3).minislots == 2
    assert make_coc_policy("phi_ic_tilde", STAR3).minislots == 3
    assert make_coc_policy("phi_cs", STAR3).minislots == 2


# --------------------------------------------------------------------------
# three-clique line rules
# --------------------------------------------------------------------------

# frozen on single-queue cliques, indexed by clique flags
LINE3_TD = {
    (0, 0, 0): [0, 0, 0],
    (1, 0, 0): [1, 0, 0],
    (0, 1, 0): [0, 1, 0],
    (0, 0, 1): [0, 0, 1],
    (1, 1, 0): [1, 0, 0],
    (1, 0, 1): [1, 0, 1],
    (0, 1, 1): [0, 1, 0],
    (1, 1, 1): [1, 0, 1],
}


def test_line3_rule_tables():
    line3 = linear_array_of_cliques([1, 1, 1])
    td = make_coc_policy("theta3_td", line3)
    bu = make_coc_policy("theta3_bu", line3)
    for zeta, want in LINE3_TD.items():
        assert _bits(td.decide(_m(list(zeta))), 3) == want
        assert _bits(bu.decide(_m(list(zeta[::-1]))), 3) == want[::-1]


def test_line3_on_wider_cliques():
    td = make_coc_policy("theta3_td", LINE212)
    # first and third cliques loaded: one queue from each, in parallel
    assert _bits(td.decide(_m([0, 1, 0, 0, 1])), 5) == [0, 1, 0, 0, 1]
    # first clique empty: middle preempts the third
    assert _bits(td.decide(_m([0, 0, 1, 1, 0])), 5) == [0, 0, 1, 0, 0]
    bu = make_coc_policy("theta3_bu", LINE212)
    assert _bits(bu.decide(_m([1, 0, 0, 1, 0])), 5) == [1, 0, 0, 1, 0]
    # last clique empty: middle preempts the first (mirror image)
    assert _bits(bu.decide(_m([1, 0, 1, 0, 0])), 5) == [0, 0, 1, 0, 0]
    assert _bits(bu.decide(_m([1, 0, 0, 0, 0])), 5) == [1, 0, 0, 0, 0]


def test_line3_decisions_valid():
    for name in ("theta3_td", "theta3_bu"):
        pol = make_coc_policy(name, LINE212)
        for z in range(1 << 5):
            s = pol.decide(z)
            assert is_activation_valid(LINE212, s)
            assert s & ~z == 0


# --------------------------------------------------------------------------
# five-clique line rules
# --------------------------------------------------------------------------

def test_line5_branch_table():
    sp = make_coc_policy("theta5_sp", LINE5)
    cases = {
        (1, 1, 1, 1, 1): [1, 0, 1, 0, 1],   # middle + both ends
        (0, 1, 1, 1, 0): [0, 0, 1, 0, 0],   # middle preempts its neighbors
        (1, 0, 1, 0, 1): [1, 0, 1, 0, 1],
        (0, 0, 1, 0, 0): [0, 0, 1, 0, 0],
        (0, 1, 0, 1, 0): [0, 1, 0, 1, 0],   # inner pair
        (0, 1, 0, 0, 1): [0, 1, 0, 0, 1],   # second with far end
        (1, 0, 0, 1, 0): [1, 0, 0, 1, 0],   # fourth with near end
        (1, 0, 0, 0, 1): [1, 0, 0, 0, 1],   # ends only
        (1, 0, 0, 0, 0): [1, 0, 0, 0, 0],
        (0, 0, 0, 0, 1): [0, 0, 0, 0, 1],
    }
    for zeta, want in cases.items():
        assert _bits(sp.decide(_m(list(zeta))), 5) == want


def test_line5_branch_rule_starves_lone_inner_cliques():
    # the published branch list serves cliques 2 and 4 only in pairs, so a
    # lone packet there waits -- kept verbatim, the maximal variant below
    # repairs it
    sp = make_coc_policy("theta5_sp", LINE5)
    assert sp.decide(_m([0, 1, 0, 0, 0])) == 0
    assert sp.decide(_m([0, 0, 0, 1, 0])) == 0
    tilde = make_coc_policy("theta5_tilde", LINE5)
    assert _bits(tilde.decide(_m([0, 1, 0, 0, 0])), 5) == [0, 1, 0, 0, 0]
    assert _bits(tilde.decide(_m([0, 0, 0, 1, 0])), 5) == [0, 0, 0, 1, 0]


def test_line5_maximal_variant_is_msm_on_singleton_cliques():
    tilde = make_coc_policy("theta5_tilde", LINE5)
    for z in range(1 << 5):
        assert is_msm(LINE5, z, tilde.decide(z) & z)


def test_line5_maximal_variant_examples():
    tilde = make_coc_policy("theta5_tilde", LINE5)
    assert _bits(tilde.decide(_m([0, 1, 1, 1, 0])), 5) == [0, 1, 0, 1, 0]
    assert _bits(tilde.decide(_m([1, 1, 1, 1, 1])), 5) == [1, 0, 1, 0, 1]


def test_line5_variant_pads_shorter_arrays():
    g = linear_array_of_cliques([1, 2, 1, 1])   # queues 0 | 1,2 | 3 | 4
    tilde = make_coc_policy("theta5_tilde", g)
    # all four cliques loaded: padded occupancy anchors cliques 2 and 4
    assert _bits(tilde.decide(_m([1, 1, 1, 1, 1])), 5) == [0, 1, 0, 0, 1]
    for z in range(1 << 5):
        s = tilde.decide(z)
        assert is_activation_valid(g, s)
        assert s & ~z == 0


def test_line5_decisions_valid():
    g = linear_array_of_cliques([2, 1, 2, 1, 2])
    for name in ("theta5_sp", "theta5_tilde"):
        pol = make_coc_policy(name, g)
        for z in range(1 << g.n):
            s = pol.decide(z)
            assert is_activation_valid(g, s)
            assert s & ~z == 0


# --------------------------------------------------------------------------
# framed policies
# --------------------------------------------------------------------------

def _run_stepping(pol, q, slots):
    """Step a stateful policy against an arrival-free backlog, returning
    the served bit-lists per slot."""
    pol.reset()
    out = []
    for t in range(slots):
        s = pol.step(q, occupancy_of(q), t)
        for i in range(len(q)):
            if s >> i & 1 and q[i]:
                q[i] -= 1
        out.append(_bits(s, len(q)))
    return out


def test_framed_star_drains_snapshot_center_first():
    pol = make_coc_policy("phi_ic_T", STAR3, T=4)
    served = _run_stepping(pol, [3, 2, 2], 6)
    assert served == [
        [1, 0, 0], [1, 0, 0], [1, 0, 0],    # central credits drain first
        [0, 1, 1],                          # then peripherals in parallel
        [0, 1, 1],                          # next frame: snapshot [0, 1, 1]
        [0, 0, 0],
    ]


def test_framed_star_ignores_mid_frame_arrivals():
    pol = make_coc_policy("phi_ic_T", STAR3, T=4)
    pol.reset()
    q = [0, 1, 0]
    assert pol.step(q, occupancy_of(q), 0) == _m([0, 1, 0])
    q = [0, 0, 0]
    # a central packet lands inside the frame: no credit until slot 4
    q[0] = 1
    for t in (1, 2, 3):
        assert pol.step(q, occupancy_of(q), t) == 0
    assert pol.step(q, occupancy_of(q), 4) == _m([1, 0, 0])


def test_framed_star_unit_frame_matches_center_first_rule():
    ic = make_coc_policy("phi_ic", STAR122)
    pol = make_coc_policy("phi_ic_T", STAR122, T=1)
    pol.reset()
    import random
    rng = random.Random(7)
    for t in range(200):
        q = [rng.randrange(3) for _ in range(5)]
        assert pol.step(q, occupancy_of(q), 0) == ic.decide(occupancy_of(q))


def test_framed_line_trace_with_parallel_far_clique():
    pol = make_coc_policy("theta3_td_T", LINE212, T=6)
    served = _run_stepping(pol, [2, 0, 1, 1, 0], 5)
    assert served == [
        [1, 0, 0, 1, 0],    # primary and far cliques in parallel
        [1, 0, 0, 0, 0],
        [0, 0, 1, 0, 0],    # middle was nonempty at the frame boundary
        [0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0],
    ]


def test_framed_line_gates_middle_on_frame_start():
    pol = make_coc_policy("theta3_td_T", LINE212, T=4)
    pol.reset()
    q = [1, 0, 0, 0, 0]
    assert pol.step(q, occupancy_of(q), 0) == _m([1, 0, 0, 0, 0])
    q = [0, 0, 0, 0, 0]
    # middle packet arrives mid-frame: blocked until the next boundary
    q[2] = 1
    for t in (1, 2, 3):
        assert pol.step(q, occupancy_of(q), t) == 0
    assert pol.step(q, occupancy_of(q), 4) == _m([0, 0, 1, 0, 0])


def test_framed_line_reverse_mirrors_primary_clique():
    pol = make_coc_policy("theta3_bu_T", LINE212, T=4)
    served = _run_stepping(pol, [1, 0, 0, 2, 0], 4)
    assert served == [
        [1, 0, 0, 1, 0],
        [0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0],
    ]


def test_framed_line_unit_frame_matches_line_rule():
    td = make_coc_policy("theta3_td", LINE212)
    pol = make_coc_policy("theta3_td_T", LINE212, T=1)
    pol.reset()
    import random
    rng = random.Random(11)
    for t in range(200):
        q = [rng.randrange(3) for _ in range(5)]
        assert pol.step(q, occupancy_of(q), 0) == td.decide(occupancy_of(q))


# --------------------------------------------------------------------------
# channel sensing
# --------------------------------------------------------------------------

def test_sensing_central_queue_preempts():
    pol = make_coc_policy("phi_cs", STAR122)
    pol.reset()
    q = [2, 3, 3, 3, 3]
    assert pol.step(q, occupancy_of(q), 0) == 1
    q[0] -= 1
    assert pol.step(q, occupancy_of(q), 1) == 1


def test_sensing_grant_and_idle_age_trace():
    pol = make_coc_policy("phi_cs", STAR122)
    pol.reset()
    # counters seeded with one-based labels: highest age wins the grant
    q = [0, 1, 0, 0, 0]
    s = pol.step(q, occupancy_of(q), 0)
    # queue 2 (age 3) beats queue 1 (age 2); queue 4 beats queue 3;
    # both grants reset even though the grantees are empty
    assert _bits(s, 5) == [0, 0, 1, 0, 1]
    assert pol._idle_age == [2, 3, 0, 5, 0]
    assert pol._incumbent == [None, 2, 4]
    # empty incumbents are replaced next slot by the longest-idle queues
    s = pol.step(q, occupancy_of(q), 1)
    assert _bits(s, 5) == [0, 1, 0, 1, 0]
    assert pol._incumbent == [None, 1, 3]


def test_sensing_incumbent_holds_channel_while_nonempty():
    pol = make_coc_policy("phi_cs", STAR122)
    pol.reset()
    q = [0, 0, 3, 0, 0]
    served = _run_stepping(pol, q, 4)
    # queue 2 is granted once and keeps transmitting until it drains;
    # once it empties the clique hands the channel to queue 1 (an empty
    # grant: offered but nothing departs)
    assert [row[2] for row in served] == [1, 1, 1, 0]
    assert [row[1] for row in served] == [0, 0, 0, 1]
    assert pol._incumbent[1] == 1
    assert q[1] == 0


def test_sensing_tie_breaks_to_lowest_index():
    pol = make_coc_policy("phi_cs", star_of_cliques([1, 2]))
    pol.reset()
    pol._idle_age = [1, 7, 7]
    assert pol.step([0, 1, 1], 0b110, 0) == _m([0, 1, 0])


def test_sensing_needs_singleton_center():
    with pytest.raises(ValueError):
        make_coc_policy("phi_cs", star_of_cliques([2, 1, 1]))


# --------------------------------------------------------------------------
# selectors and factory
# --------------------------------------------------------------------------

def test_round_robin_selector_rotates():
    pol = make_coc_policy("phi_ic", STAR122, selector="round_robin")
    pol.reset()
    picks = [pol.step([0, 5, 5, 0, 0], _m([0, 1, 1, 0, 0]), t)
             for t in range(4)]
    assert [_bits(p, 5) for p in picks] == [
        [0, 1, 0, 0, 0], [0, 0, 1, 0, 0],
        [0, 1, 0, 0, 0], [0, 0, 1, 0, 0],
    ]


def test_round_robin_skips_empty_members():
    pol = make_coc_policy("phi_ic", STAR122, selector="round_robin")
    pol.reset()
    for t in range(3):
        assert pol.step([0, 5, 0, 0, 0], _m([0, 1, 0, 0, 0]), t) == _m(
            [0, 1, 0, 0, 0])


def test_factory_validation():
    with pytest.raises(ValueError):
        make_coc_policy("no_such_rule", STAR3)
    with pytest.raises(ValueError):
        make_coc_policy("phi_ic", LINE212)          # wrong network kind
    with pytest.raises(ValueError):
        make_coc_policy("theta3_td", LINE5)         # wrong clique count
    with pytest.raises(ValueError):
        make_coc_policy("theta5_sp", LINE212)
    with pytest.raises(ValueError):
        make_coc_policy("phi_ic_T", STAR3, T=0)
    with pytest.raises(ValueError):
        make_coc_policy("phi_ic", STAR3, selector="weighted")
    with pytest.raises(ValueError):
        make_coc_policy("theta5_tilde",
                        linear_array_of_cliques([1] * 6))


def test_factory_names_and_info_classes():
    assert make_coc_policy("phi_ic", STAR3).info_class == "occupancy"
    assert make_coc_policy("phi_ic_T", STAR3, T=8).name == "phi_ic_T8"
    assert make_coc_policy("phi_ic_T", STAR3, T=8).info_class == "framed"
    assert make_coc_policy("phi_cs", STAR3).info_class == "sensing"
    assert make_coc_policy("theta3_bu_T", LINE212, T=2).name == "theta3_bu_T2"
    rr = make_coc_policy("phi_ic", STAR3, selector="round_robin")
    assert rr.info_class == "stepping"
    assert "maxweight" in COC_CATALOG
    mw = make_coc_policy("maxweight", STAR122)
    assert mw.info_class == "full_state"
    assert mw.decide_state([0, 2, 0, 3, 1]) == _m([0, 1, 0, 1, 0])