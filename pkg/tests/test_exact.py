import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_topology
from scatternet import exact
from scatternet.heuristic import build_hierarchy
from scatternet.model import ModelParams, ParameterError, Topology, generate_topology, price_hierarchy, validate_hierarchy


def test_two_pairs_hand_computed():
    # two tight pairs 20 m apart: each pair needs its own master and super master
    t = make_topology([(0, 0), (1, 0), (20, 0), (21, 0)], battery=[0.9, 0.6, 0.9, 0.6], area=(30, 5))
    sol = exact.solve_bilevel(t)
    assert sol.status == exact.OPTIMAL
    assert sol.hierarchy.masters == [0, 2]
    assert sol.hierarchy.super_masters == [0, 2]
    assert sol.objective == 2 * 1.0 + 2 * 100 + 2 * 100
    assert sol.level1_cost == 202.0 and sol.level2_cost == 200.0


def test_single_level_reports_zero_level2():
    t = generate_topology(12, area=(6, 6), seed=3)
    sol = exact.solve_single_level(t)
    assert sol.level2_cost == 0.0
    assert sol.objective == sol.level1_cost == price_hierarchy(t, sol.hierarchy)[0]
    assert sol.hierarchy.m1 == sol.hierarchy.m2


def test_empty_and_infeasible():
    assert exact.solve_bilevel(Topology(())).objective == 0.0
    t = make_topology([(0, 0), (1, 0)], battery=0.2)
    for backend in exact.BACKENDS:
        assert exact.solve_bilevel(t, backend=backend).status == exact.INFEASIBLE
    assert exact.solve_bruteforce(t).status == exact.INFEASIBLE
    # eligible masters exist but one node is out of everyone's range
    t = make_topology([(0, 0), (1, 0), (40, 0)], battery=[0.9, 0.9, 0.1], area=(50, 5))
    assert exact.solve_single_level(t).status == exact.INFEASIBLE


def test_bruteforce_size_limit():
    with pytest.raises(ParameterError):
        exact.solve_bruteforce(generate_topology(11, seed=0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8), st.booleans(), st.sampled_from([2, 3, 8]))
def test_search_matches_bruteforce(seed, n, bilevel, cap):
    t = generate_topology(n, area=(15, 15), battery_law="uniform:0.3:1", seed=seed)
    p = ModelParams(max_cluster_size_l1=cap, max_cluster_size_l2=cap)
    brute = exact.solve_bruteforce(t, p, bilevel=bilevel)
    solve = exact.solve_bilevel if bilevel else exact.solve_single_level
    sol = solve(t, p, 30)
    assert sol.status == brute.status
    if brute.status == exact.OPTIMAL:
        assert sol.objective == pytest.approx(brute.objective, rel=1e-12)
        assert validate_hierarchy(t, sol.hierarchy, p).feasible


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("bilevel", [False, True])
def test_search_matches_highs(seed, bilevel):
    t = generate_topology(18, area=(14, 14), battery_law="uniform:0.3:1", seed=seed)
    solve = exact.solve_bilevel if bilevel else exact.solve_single_level
    a = solve(t, budget=60, backend="search")
    b = solve(t, budget=60, backend="highs")
    assert a.status == b.status == exact.OPTIMAL
    assert a.objective == pytest.approx(b.objective, rel=1e-9)
    assert validate_hierarchy(t, b.hierarchy).feasible


def test_exact_never_worse_than_heuristic():
    for seed in range(5):
        t = generate_topology(25, area=(8, 8), seed=seed)
        h, orphans, _ = build_hierarchy(t)
        sol = exact.solve_bilevel(t, budget=30)
        if orphans:
            continue
        assert sol.objective <= sum(price_hierarchy(t, h)) + 1e-9


def test_timeout_keeps_incumbent_and_gap():
    t = generate_topology(120, area=(7, 7), seed=0)  # everyone in range: the greedy start has no orphans
    sol = exact.solve_bilevel(t, budget=0.2)
    assert sol.status == exact.TIMEOUT
    assert sol.hierarchy is not None
    assert validate_hierarchy(t, sol.hierarchy).feasible
    assert 0.0 <= sol.gap < 1.0
    assert sol.elapsed < 5.0


def test_to_dict_fields():
    t = generate_topology(6, area=(5, 5), seed=1)
    d = exact.solve_bilevel(t).to_dict()
    assert d["status"] == "optimal"
    assert set(d) >= {"objective", "masters", "super_masters", "l1_master_of", "l2_master_of", "gap"}
    assert not math.isnan(d["objective"])


def test_timeout_without_incumbent():
    t = generate_topology(120, seed=0)
    assert build_hierarchy(t)[1], "fixture needs a greedy orphan"
    sol = exact.solve_bilevel(t, budget=0.2)
    assert sol.status == exact.TIMEOUT and sol.hierarchy is None
