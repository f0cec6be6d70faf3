import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_reanalysis.causal import (
    DagError,
    ancestors,
    backdoor_adjustment_sets,
    build_paper_dag,
    classify_path,
    d_separated,
    d_separated_by_paths,
    descendants,
    is_backdoor_set,
    load_dag,
    make_dag,
    model_covariates,
    parse_dot,
    passes_through,
    reduced_dag,
    to_dot,
    undirected_paths,
)

from .conftest import random_dag
from .oracles import backdoor_oracle, directed_paths, minimal_backdoor_oracle

OUTCOME_NODES = ("missing_actors", "missing_objects", "missing_associations")


# ---------------------------------------------------------------- examples


def test_chain_descendants():
    g = make_dag([("a", "b"), ("b", "c")])
    assert descendants(g, "a") == {"b", "c"}
    assert ancestors(g, "c") == {"a", "b"}


def test_isolated_node_has_no_descendants():
    g = make_dag([("a", "b")], nodes=["lonely"])
    assert descendants(g, "lonely") == set()


def test_blocked_chain_and_collider():
    chain = make_dag([("x", "m"), ("m", "y")])
    assert d_separated(chain, "x", "y", {"m"})
    assert not d_separated(chain, "x", "y")
    coll = make_dag([("x", "c"), ("y", "c"), ("c", "d")])
    assert d_separated(coll, "x", "y")
    assert not d_separated(coll, "x", "y", {"c"})
    assert not d_separated(coll, "x", "y", {"d"})


def test_d_separated_rejects_bad_queries():
    g = make_dag([("x", "y")])
    with pytest.raises(DagError):
        d_separated(g, "x", "x")
    with pytest.raises(DagError):
        d_separated(g, "x", "y", {"x"})
    with pytest.raises(DagError):
        d_separated(g, "x", "nope")


def test_confounder_and_randomized_exposure():
    g = make_dag([("u", "x"), ("u", "y"), ("x", "y")])
    assert [s.variables for s in backdoor_adjustment_sets(g, "x", "y")] == [("u",)]
    r = make_dag([("x", "y"), ("w", "y")])
    assert [s.variables for s in backdoor_adjustment_sets(r, "x", "y")] == [()]
    assert [s.variables for s in backdoor_adjustment_sets(make_dag([("x", "y")]), "x", "y")] == [()]


def test_no_valid_set():
    # y causes x: the backdoor path x <- y can only be blocked by y itself
    g = make_dag([("y", "x")])
    assert backdoor_adjustment_sets(g, "x", "y") == []


def test_cycle_rejected():
    with pytest.raises(DagError, match="cycle"):
        make_dag([("a", "b"), ("b", "c"), ("c", "a")])
    with pytest.raises(DagError):
        parse_dot("digraph { a -> b; b -> a; }")


def test_dot_round_trip():
    g = build_paper_dag()
    again = parse_dot(to_dot(g))
    assert again.nodes == g.nodes and again.edges == g.edges
    assert again.rationale == g.rationale


def test_dot_parser_features():
    g = parse_dot(
        """
        // comment
        digraph demo {
          a -> b -> c [rationale="chain"];  /* block */
          d;
          # hash comment
        }
        """
    )
    assert g.edges == {("a", "b"), ("b", "c")}
    assert "d" in g.nodes
    with pytest.raises(DagError):
        parse_dot("digraph { a -> b; a -> b; }")


def test_load_dag_with_sidecar(tmp_path):
    (tmp_path / "g.dot").write_text("digraph { u -> x; u -> y; x -> y; }")
    (tmp_path / "g.json").write_text('{"version": 1, "exposure": "x", "outcomes": ["y"]}')
    g = load_dag(tmp_path / "g.dot")
    assert g.exposure == "x" and g.outcomes == ("y",)
    assert model_covariates(g, "y", "total").variables == ("u",)


# ----------------------------------------------------------- fixture DAG


def test_paper_dag_structure():
    g = build_paper_dag()
    assert ("missing_actors", "missing_associations") in g.edges
    assert ("missing_objects", "missing_associations") in g.edges
    assert g.exposure == "passive_voice"
    assert g.parents("passive_voice") == set()
    assert descendants(g, "passive_voice") >= set(OUTCOME_NODES)
    for o in g.outcomes:
        assert directed_paths(g, g.exposure, o)
    assert all(g.rationale.get(e) for e in g.edges)


def test_paper_dag_d_separation_matches_paths():
    g = build_paper_dag()
    z = {"exp_re_acad", "exp_re_ind", "program"}
    assert d_separated(g, "age_group", "missing_actors", z) == d_separated_by_paths(g, "age_group", "missing_actors", z)
    assert d_separated(g, "age_group", "missing_actors", z)
    assert not d_separated(g, "age_group", "missing_actors", {"program"})


def test_paper_dag_identification():
    g = build_paper_dag()
    for o in OUTCOME_NODES:
        # the exposure is randomized: nothing needs adjusting
        assert [s.variables for s in backdoor_adjustment_sets(g, g.exposure, o)] == [()]
    assert model_covariates(g, "missing_associations", "paper").variables == (
        "exp_re_acad", "exp_re_ind", "missing_actors", "missing_objects",
    )
    assert model_covariates(g, "missing_associations", "total").variables == ("exp_re_acad", "exp_re_ind")
    assert model_covariates(g, "missing_actors", "paper").variables == ("exp_re_acad", "exp_re_ind")


def test_paper_reduced_dag():
    g = build_paper_dag()
    r = reduced_dag(g)
    assert set(r.nodes) == {"passive_voice", "exp_re_ind", "exp_re_acad", *OUTCOME_NODES}
    excluded = set(g.nodes) - set(r.nodes)
    assert excluded == {"age_group", "program", "exp_se_ind", "exp_se_acad", "exp_prog_ind", "exp_prog_acad"}
    for e in excluded:
        assert passes_through(g, e, set(r.nodes), g.outcomes)


def test_reduced_dag_without_covariates_is_identity():
    g = make_dag([("x", "y1"), ("x", "y2"), ("y1", "y2")], exposure="x", outcomes=["y1", "y2"])
    r = reduced_dag(g)
    assert r.nodes == g.nodes and r.edges == g.edges


# ------------------------------------------------------------- properties

seeds = st.integers(0, 2**32 - 1)


@given(seed=seeds, n=st.integers(2, 8))
@settings(max_examples=150, deadline=None)
def test_fast_d_separation_matches_paths(seed, n):
    rng = np.random.default_rng(seed)
    g = random_dag(rng, n)
    x, y = rng.choice(g.nodes, 2, replace=False)
    others = [v for v in g.nodes if v not in (x, y)]
    z = {v for v in others if rng.random() < 0.35}
    assert d_separated(g, x, y, z) == d_separated_by_paths(g, x, y, z)


@given(seed=seeds, n=st.integers(2, 7))
@settings(max_examples=80, deadline=None)
def test_backdoor_sets_valid_and_minimal(seed, n):
    rng = np.random.default_rng(seed)
    g = random_dag(rng, n, p_edge=0.4)
    x, y = rng.choice(g.nodes, 2, replace=False)
    sets = backdoor_adjustment_sets(g, x, y)
    for s in sets:
        assert backdoor_oracle(g, x, y, s.variables)
        assert is_backdoor_set(g, x, y, s.variables)
        for r in range(len(s)):
            for sub in itertools.combinations(s.variables, r):
                assert not backdoor_oracle(g, x, y, sub)
    assert {frozenset(s.variables) for s in sets} == minimal_backdoor_oracle(g, x, y)


@given(seed=seeds, n=st.integers(3, 8))
@settings(max_examples=80, deadline=None)
def test_collider_descendant_only_unblocks(seed, n):
    """Conditioning on a collider's descendant never blocks a path that was open."""
    rng = np.random.default_rng(seed)
    g = random_dag(rng, n, p_edge=0.45)
    x, y = rng.choice(g.nodes, 2, replace=False)
    z = {v for v in g.nodes if v not in (x, y) and rng.random() < 0.3}
    for path in undirected_paths(g, x, y):
        before = classify_path(g, path, z)
        for node, role in zip(path[1:-1], before.roles):
            if role != "collider":
                continue
            for w in descendants(g, node) - {x, y} - set(path):
                after = classify_path(g, path, z | {w})
                if not before.blocked:
                    assert not after.blocked


@given(seed=seeds, n=st.integers(3, 8))
@settings(max_examples=80, deadline=None)
def test_reduced_dag_pass_through(seed, n):
    rng = np.random.default_rng(seed)
    base = random_dag(rng, n, p_edge=0.4)
    # choose an exposure with at least one descendant and use those as outcomes
    candidates = [v for v in base.nodes if descendants(base, v)]
    if not candidates:
        return
    x = candidates[int(rng.integers(len(candidates)))]
    outs = sorted(descendants(base, x))[:2]
    g = make_dag(sorted(base.edges), nodes=base.nodes, exposure=x, outcomes=outs)
    if any(not backdoor_adjustment_sets(g, x, o) for o in outs):
        return
    r = reduced_dag(g)
    kept = set(r.nodes)
    for e in set(g.nodes) - kept:
        fast = passes_through(g, e, kept, outs)
        brute = all(
            any(v in kept for v in path[1:-1])
            for o in outs
            for path in directed_paths(g, e, o)
        )
        assert fast == brute
        assert brute
