"""Graph construction, activation validity and rate-region tests."""

from __future__ import annotations

from hypothesis import given, strategies as st

from qnbsim.model import (
    bits_to_mask,
    clique_graph,
    constraint_load,
    enumerate_valid_activations,
    in_capacity_region,
    in_gamma_inner_bound,
    is_activation_valid,
    linear_array_of_cliques,
    mask_to_bits,
    occupancy_of,
    path_graph,
    star_of_cliques,
)


# ----- construction -----

def test_path_graph_neighbors():
    g = path_graph(3)
    assert g.n == 3
    assert g.nbr[0] == 0b010
    assert g.nbr[1] == 0b101
    assert g.nbr[2] == 0b010


def test_path_graph_single_queue():
    g = path_graph(1)
    assert g.nbr == (0,)
    assert is_activation_valid(g, 0b1)


def test_clique_graph_all_pairs():
    g = clique_graph(4)
    for i in range(4):
        assert g.nbr[i] == 0b1111 ^ (1 << i)
    assert g.sizes == (4,)


def test_star_of_cliques_layout():
    g = star_of_cliques([1, 2, 2])
    assert g.n == 5
    assert g.sizes == (1, 2, 2)
    assert g.clique_of == (0, 1, 1, 2, 2)
    assert g.clique_masks == (0b00001, 0b00110, 0b11000)
    assert list(g.clique_queues(2)) == [3, 4]
    # center interferes with everyone
    assert g.nbr[0] == 0b11110
    # peripheral queues: own clique plus center
    assert g.nbr[1] == 0b00101
    assert g.nbr[3] == 0b10001


def test_linear_array_layout():
    g = linear_array_of_cliques([2, 1, 2])
    assert g.n == 5
    # queue 2 (the middle singleton) interferes with everything else
    assert g.nbr[2] == 0b11011
    # first-clique queue sees its sibling and the middle clique only
    assert g.nbr[0] == 0b00110
    # last-clique queue sees its sibling and the middle clique
    assert g.nbr[4] == 0b01100


# ----- activation validity -----

def test_path_activation_validity():
    g = path_graph(3)
    assert is_activation_valid(g, 0b101)
    assert is_activation_valid(g, 0b010)
    assert is_activation_valid(g, 0)
    assert not is_activation_valid(g, 0b011)
    assert not is_activation_valid(g, 0b110)
    assert not is_activation_valid(g, 0b111)


def test_star_activation_validity():
    g = star_of_cliques([1, 2, 2])
    # one queue per peripheral clique, center silent
    assert is_activation_valid(g, bits_to_mask([0, 1, 0, 1, 0]))
    # center alone
    assert is_activation_valid(g, bits_to_mask([1, 0, 0, 0, 0]))
    # center plus any peripheral queue collides
    assert not is_activation_valid(g, bits_to_mask([1, 1, 0, 0, 0]))
    # two queues of one peripheral clique collide
    assert not is_activation_valid(g, bits_to_mask([0, 1, 1, 0, 0]))


def test_linear_array_activation_validity():
    g = linear_array_of_cliques([2, 1, 2])
    assert is_activation_valid(g, bits_to_mask([1, 0, 0, 1, 0]))
    assert not is_activation_valid(g, bits_to_mask([1, 0, 1, 0, 0]))
    assert not is_activation_valid(g, bits_to_mask([1, 1, 0, 0, 0]))


def _edges_of(g):
    return {(i, j) for i in range(g.n) for j in range(i + 1, g.n)
            if g.nbr[i] >> j & 1}


@given(st.integers(2, 6), st.integers(0, 255))
def test_validity_matches_edge_scan_on_paths(n, seed_mask):
    g = path_graph(n)
    mask = seed_mask & ((1 << n) - 1)
    brute = all(not (mask >> i & 1 and mask >> j & 1) for i, j in _edges_of(g))
    assert is_activation_valid(g, mask) == brute


@given(st.lists(st.integers(1, 3), min_size=2, max_size=4),
       st.integers(0, 2 ** 12 - 1))
def test_validity_matches_edge_scan_on_clique_networks(sizes, raw):
    for g in (star_of_cliques(sizes), linear_array_of_cliques(sizes)):
        mask = raw & ((1 << g.n) - 1)
        brute = all(not (mask >> i & 1 and mask >> j & 1)
                    for i, j in _edges_of(g))
        assert is_activation_valid(g, mask) == brute


def test_enumerate_valid_activations_counts():
    # independent sets of a 3-path: {}, {1}, {2}, {3}, {1,3}
    assert len(enumerate_valid_activations(path_graph(3))) == 5
    # clique: empty set or a single queue
    assert len(enumerate_valid_activations(clique_graph(4))) == 5


# ----- occupancy helpers -----

def test_occupancy_of():
    assert occupancy_of([0, 3, 1]) == 0b110
    assert occupancy_of([0, 0, 0]) == 0
    assert occupancy_of([2]) == 1


@given(st.lists(st.integers(0, 1), min_size=1, max_size=12))
def test_mask_bits_round_trip(bits):
    assert mask_to_bits(bits_to_mask(bits), len(bits)) == bits


# ----- rate regions -----

def test_path_region_examples():
    g = path_graph(3)
    assert in_capacity_region(g, [0.2, 0.3, 0.2])
    assert constraint_load(g, [0.2, 0.3, 0.2]) == 0.5
    # boundary point: strictly outside the open region, inside the closure
    assert not in_capacity_region(g, [0.5, 0.5, 0.5])
    assert in_capacity_region(g, [0.5, 0.5, 0.5], strict=False)
    assert not in_capacity_region(g, [0.3, 0.75, 0.2])
    # a large middle rate is fine as long as both pair sums stay below one
    assert in_capacity_region(g, [0.2, 0.75, 0.2])


def test_clique_region():
    g = clique_graph(3)
    assert in_capacity_region(g, [0.3, 0.3, 0.3])
    assert not in_capacity_region(g, [0.4, 0.4, 0.4])


def test_star_region():
    g = star_of_cliques([1, 2, 2])
    rates = [0.34, 0.33, 0.33, 0.33, 0.33]
    assert constraint_load(g, rates) == 1.0
    assert not in_capacity_region(g, rates)
    scaled = [0.9 * r for r in rates]
    assert in_capacity_region(g, scaled)


def test_star_region_unbalanced_assignment():
    # peripheral cliques never constrain each other
    g = star_of_cliques([1, 3, 1, 1])
    rates = [0.09, 0.3, 0.3, 0.3, 0.9, 0.9]
    assert abs(constraint_load(g, rates) - 0.99) < 1e-12
    assert in_capacity_region(g, rates)


def test_linear_array_region():
    g = linear_array_of_cliques([2, 1, 2])
    rates = [0.25, 0.25, 0.5, 0.25, 0.25]
    assert constraint_load(g, rates) == 1.0
    assert in_capacity_region(g, [0.9 * r for r in rates])


def test_gamma_inner_bound():
    assert in_gamma_inner_bound([0.45, 0.45, 0.45], 1.0)
    assert not in_gamma_inner_bound([0.45, 0.45, 0.45], 0.9)
    assert in_gamma_inner_bound([0.2, 0.2, 0.2], 0.5)
    assert not in_gamma_inner_bound([0.3, 0.25, 0.2], 0.5)


@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8))
def test_path_region_iff_pairwise_sums(rates):
    g = path_graph(len(rates))
    expected = all(rates[i] + rates[i + 1] < 1 for i in range(len(rates) - 1))
    assert in_capacity_region(g, rates) == expected


def test_scaling_toward_boundary():
    g = path_graph(4)
    rates = [0.49, 0.49, 0.49, 0.49]
    load = constraint_load(g, rates)
    assert abs(load - 0.98) < 1e-12
    # scaling by 1/load lands exactly on the boundary
    boundary = [r / load for r in rates]
    assert not in_capacity_region(g, boundary)
    assert in_capacity_region(g, boundary, strict=False)


def test_rate_vector_validation():
    g = path_graph(3)
    for bad in ([0.1, 0.1], [0.1, 0.1, 0.1, 0.1], [0.2, -0.1, 0.2]):
        try:
            in_capacity_region(g, bad)
        except ValueError:
            continue
        raise AssertionError(f"expected rejection of {bad}")


def test_all_valid_activation_sets_agree_with_products():
    # cross-check star enumeration against the structural description
    g = star_of_cliques([1, 2, 2])
    acts = set(enumerate_valid_activations(g))
    expected = set()
    expected.add(0)
    expected.add(0b00001)  # center alone
    for a in [0, 1, 2]:          # choice in clique 1 (0 = none)
        for b in [0, 3, 4]:      # choice in clique 2
            m = 0
            if a:
                m |= 1 << a
            if b:
                m |= 1 << b
            expected.add(m)
    assert acts == expected


def test_linear_array_activations_skip_adjacent_cliques():
    g = linear_array_of_cliques([1, 1, 1])
    acts = set(enumerate_valid_activations(g))
    # same structure as a 3-path
    assert acts == {0, 0b001, 0b010, 0b100, 0b101}


def test_clique_queue_helpers_cover_all_queues():
    g = linear_array_of_cliques([3, 1, 2, 3])
    seen = []
    for c in range(g.num_cliques):
        seen.extend(g.clique_queues(c))
    assert seen == list(range(g.n))
