import random

import pytest

from kflow.model import (
    Scenario,
    UniverseOverflow,
    build_universe,
    enumerate_bindings,
    flow_step,
    initial_oscar_state,
    knowledge,
    merge,
    project_rules,
    simulate_full,
    FullRule,
)
from kflow.protocols import cpuf_renewal, ns, otway_rees
from randomized import full_flow


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario.make(ns(), honest=0)
    with pytest.raises(ValueError):
        Scenario.make(ns(), sessions=0)
    sc = Scenario.make(ns(), honest=3)
    assert [p.name for p in sc.principals] == ["Alice", "Bob", "Carol", "Oscar"]
    assert sc.oscar.identity == "O"


def test_bindings_modulo_honest_renaming():
    sc = Scenario.make(ns(), honest=2, sessions=1)
    b = enumerate_bindings(sc)
    # (A,A) (A,B) (A,O) (O,A); Bob-variants are renamings
    assert b == [(("Alice", "Alice"),), (("Alice", "Bob"),), (("Alice", "Oscar"),), (("Oscar", "Alice"),)]
    assert all("Oscar" != s[0] or "Oscar" != s[1] for (s,) in b)
    assert len(enumerate_bindings(Scenario.make(ns(), honest=2, sessions=2))) == 20
    assert enumerate_bindings(sc) == b


def test_universe_is_subterm_closed_and_bounded():
    proto = ns()
    sc = Scenario.make(proto, honest=2, sessions=2)
    u = build_universe(sc, (("Alice", "Oscar"), ("Alice", "Bob")))
    for h in u.values:
        assert u.table.subterms(h) <= u.values
    w = sc.sessions
    assert len(u.values - u.base) <= w * u.per_session
    assert "enc{key=B, plain={A, nonce{seed=eps#1, id=A}}}" in u.dump()


def test_universe_cap():
    proto = otway_rees()
    sc = Scenario.make(proto, honest=2, sessions=1)
    with pytest.raises(UniverseOverflow):
        build_universe(sc, (("Alice", "Bob"),), max_values=50)


def test_universe_deterministic():
    proto = cpuf_renewal()
    sc = Scenario.make(proto, honest=2, sessions=1)
    assert build_universe(sc, (("Alice",),)).dump() == build_universe(sc, (("Alice",),)).dump()


def test_initial_state_withholds_secrets():
    proto = otway_rees()
    sc = Scenario.make(proto, honest=2, sessions=1)
    u = build_universe(sc, (("Alice", "Bob"),))
    s = initial_oscar_state(sc, u)
    drawn = {u.table.render(h) for h in s.draws}
    assert {"O", "srv", "eps#1"} <= drawn
    assert not {"A", "B"} & drawn
    assert all(u.table.is_atom(h) for h in s.draws)

    proto = cpuf_renewal()
    sc = Scenario.make(proto, honest=2, sessions=1)
    u = build_universe(sc, (("Alice",),))
    drawn = {u.table.render(h) for h in initial_oscar_state(sc, u).draws}
    assert "pre#1" not in drawn and "A" in drawn


def test_flow_step_applies_each_rule_once():
    r1 = FullRule("e", "c", "a", frozenset({("a", "k")}))
    r2 = FullRule("a", "c", "b")
    k0 = frozenset({("e", "c"), ("a", "k")})
    k1 = flow_step([r1, r2], k0)
    assert ("a", "c") in k1 and ("b", "c") not in k1
    assert simulate_full([r1, r2], k0) == k1 | {("b", "c")}
    assert knowledge(k1) == {"c", "k"}


def test_merge_collapses_adversaries_and_drops_self_rules():
    rules = [FullRule("x", 1, "y"), FullRule("h", 2, "x", frozenset({("y", 3)}))]
    ps, rs, k = merge(["h", "x", "y"], rules, {("x", 1), ("y", 3)}, {"x", "y"})
    assert ps == ["h", "o"]
    assert rs == {FullRule("h", 2, "o", frozenset({("o", 3)}))}
    assert k == {("o", 1), ("o", 3)}
    with pytest.raises(ValueError):
        merge(["h"], rules, set(), {"z"})


def test_projection_small_case():
    principals, rules, k0 = full_flow(random.Random(3))
    g = project_rules(rules, k0, "o")
    for r in g:
        assert r.conclusion in knowledge(k0)
