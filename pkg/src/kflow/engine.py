"""Saturation of Oscar's knowledge, theorem checking, trace extraction and
the bounded-session analysis driver."""

from __future__ import annotations

import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

from .model import (
    DEFAULT_MAX_UNIVERSE,
    OscarState,
    Scenario,
    Universe,
    build_universe,
    enumerate_bindings,
    initial_oscar_state,
)
from .patterns import Ctor, Matcher, Sort, infer_sorts
from .rules import PRIMITIVES, GroundRule, ground


class MissingDerivation(RuntimeError):
    """A value Oscar knows has no recorded derivation and was not drawn."""


# -- saturation ------------------------------------------------------------------


def ordered(rules: Iterable[GroundRule]) -> list[GroundRule]:
    return sorted(rules, key=GroundRule.order)


def step(state: OscarState, rules: Iterable[GroundRule]) -> OscarState:
    """One application of g: every rule whose premises are known fires."""
    known = state.known
    learns = dict(state.learns)
    depth = dict(state.depth)
    d = max(depth.values(), default=0) + 1
    new = set()
    for r in ordered(rules):
        if r.conclusion in known or r.conclusion in new:
            continue
        if r.premises <= known:
            new.add(r.conclusion)
            learns[r.conclusion] = (r.premises, r.label)
            depth[r.conclusion] = d
    if not new:
        return state
    return OscarState(known | new, state.draws, learns, depth)


def saturate(state: OscarState, rules: Iterable[GroundRule]) -> OscarState:
    """Least fixed point of :func:`step` above ``state``.

    Semi-naive: each rule keeps a count of premises not yet known and is only
    revisited when one of them arrives. Rounds are synchronous, so the
    result (learns included) is the same as iterating :func:`step`.
    """
    rules = ordered(rules)
    known = set(state.known)
    learns = dict(state.learns)
    depth = dict(state.depth)
    d = max(depth.values(), default=0)
    missing = []
    watchers: dict = defaultdict(list)
    ready = []
    for i, r in enumerate(rules):
        gap = r.premises - known
        missing.append(len(gap))
        for p in gap:
            watchers[p].append(i)
        if not gap:
            ready.append(i)
    while True:
        d += 1
        new = []
        for i in sorted(ready):
            r = rules[i]
            if r.conclusion in known:
                continue
            known.add(r.conclusion)
            new.append(r.conclusion)
            learns[r.conclusion] = (r.premises, r.label)
            depth[r.conclusion] = d
        if not new:
            break
        ready = []
        for h in new:
            for i in watchers.pop(h, ()):
                missing[i] -= 1
                if missing[i] == 0:
                    ready.append(i)
    return OscarState(frozenset(known), state.draws, learns, depth)


def saturate_naive(known: Iterable, rules: Iterable[GroundRule]) -> frozenset:
    """Reference closure: apply every rule until nothing changes."""
    rules = list(rules)
    k = frozenset(known)
    while True:
        new = {r.conclusion for r in rules if r.premises <= k} - k
        if not new:
            return k
        k |= new


def g_iterates(known: Iterable, rules: Iterable[GroundRule], n: int) -> list[frozenset]:
    """[X, g(X), ..., g^n(X)]."""
    rules = list(rules)
    out = [frozenset(known)]
    for _ in range(n):
        k = out[-1]
        out.append(k | {r.conclusion for r in rules if r.premises <= k})
    return out


# -- theorems ---------------------------------------------------------------------


@dataclass(frozen=True)
class TheoremSpec:
    """An attack pattern: the theorem fails when some assignment of
    ``variables`` satisfies every guard."""

    label: str
    variables: tuple
    guards: tuple

    def templates(self) -> list:
        out = []
        for g in self.guards:
            if g.name in ("knows", "present") and isinstance(g.args[0], Ctor):
                out.append(g.args[0])
        return out

    def sorts(self) -> dict[str, Sort]:
        return infer_sorts(self.templates(), self.guards)


def check_theorem(theorem: TheoremSpec, scenario: Scenario, universe: Universe, state: OscarState) -> dict | None:
    """First satisfying assignment (the attack witness), or None if the
    theorem holds."""
    world = scenario.world(universe, knows=state.known, draws=state.draws)
    # candidates in rendering order so the witness does not depend on the
    # order values happened to be interned in
    render = universe.table.render
    for kind, hs in world.by_kind.items():
        world.by_kind[kind] = sorted(hs, key=render)
    m = Matcher(world, theorem.sorts())
    for env in m.solve(theorem.templates(), theorem.guards):
        return env
    return None


def witness_values(theorem: TheoremSpec, env: dict, scenario: Scenario, universe: Universe) -> list[int]:
    """Values the witness claims Oscar knows."""
    m = Matcher(scenario.world(universe), theorem.sorts())
    out = set()
    for g in theorem.guards:
        if g.name == "knows":
            vals = m._values(g.args[0], env)
            out |= vals or set()
    return sorted(out)


def render_witness(env: dict, table) -> list[dict]:
    out = []
    for name in sorted(env):
        v = env[name]
        text = table.render_set(v) if isinstance(v, frozenset) else table.render(v)
        out.append({"variable": name, "value": text})
    return out


# -- traces -------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceStep:
    value: int
    premises: tuple
    rule: str


@dataclass
class AttackTrace:
    steps: list
    witness: dict
    targets: tuple = ()

    def values(self) -> list[int]:
        return [s.value for s in self.steps]

    def to_json(self, table) -> list[dict]:
        return [
            {
                "value": table.render(s.value),
                "premises": sorted(table.render(p) for p in s.premises),
                "rule": s.rule,
            }
            for s in self.steps
        ]


def extract_trace(state: OscarState, targets: Iterable[int], table, witness: dict | None = None) -> AttackTrace:
    """Backward slice of ``learns`` from ``targets`` down to drawn values,
    ordered by derivation round and then rendering."""
    need = set()
    stack = list(targets)
    while stack:
        h = stack.pop()
        if h in need or h in state.draws:
            continue
        if h not in state.learns:
            raise MissingDerivation(f"{table.render(h)} is neither drawn nor derived")
        need.add(h)
        stack.extend(state.learns[h][0])
    order = sorted(need, key=lambda h: (state.depth[h], table.render(h)))
    steps = [TraceStep(h, tuple(sorted(state.learns[h][0])), state.learns[h][1]) for h in order]
    return AttackTrace(steps, dict(witness or {}), tuple(sorted(targets)))


def replay(trace: AttackTrace, draws: frozenset) -> frozenset:
    """Known set after replaying ``trace`` from ``draws``; raises ValueError
    if a step uses a premise not yet available."""
    known = set(draws)
    for s in trace.steps:
        if not set(s.premises) <= known:
            raise ValueError(f"step for {s.value} used an unknown premise")
        known.add(s.value)
    return frozenset(known)


# -- analysis driver ----------------------------------------------------------------


def protocol_schemas(protocol) -> list:
    return [*protocol.schemas, *(PRIMITIVES[name]() for name in protocol.primitives)]


def ground_all(protocol, scenario: Scenario, universe: Universe) -> list[GroundRule]:
    rules = set()
    for schema in protocol_schemas(protocol):
        rules |= ground(schema, universe, scenario)
    return ordered(rules)


@dataclass
class BindingResult:
    binding: tuple
    universe_size: int
    per_session: int
    known_size: int
    witness: list | None = None
    trace: list | None = None
    trace_values: list | None = None


@dataclass
class Analysis:
    """Everything computed for one binding; kept for tests and tooling."""

    scenario: Scenario
    universe: Universe
    rules: list
    state: OscarState
    witness: dict | None
    trace: AttackTrace | None


def analyze_binding(protocol, scenario: Scenario, binding, max_universe: int = DEFAULT_MAX_UNIVERSE) -> Analysis:
    universe = build_universe(scenario, binding, max_universe)
    rules = ground_all(protocol, scenario, universe)
    state = saturate(initial_oscar_state(scenario, universe), rules)
    env = check_theorem(protocol.theorem, scenario, universe, state)
    trace = None
    if env is not None:
        targets = witness_values(protocol.theorem, env, scenario, universe)
        trace = extract_trace(state, targets, universe.table, env)
    return Analysis(scenario, universe, rules, state, env, trace)


def _run(args) -> BindingResult:
    protocol, scenario, binding, max_universe = args
    a = analyze_binding(protocol, scenario, binding, max_universe)
    table = a.universe.table
    res = BindingResult(binding, len(a.universe), a.universe.per_session, len(a.state.known))
    if a.witness is not None:
        res.witness = render_witness(a.witness, table)
        res.trace = a.trace.to_json(table)
        res.trace_values = [table.render(h) for h in a.trace.targets]
    return res


@dataclass
class Report:
    protocol: str
    sessions: int
    honest: int
    bindings_explored: int
    verdict: str
    binding: list | None = None
    witness: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    universe_size: int = 0
    ms: float = 0.0

    @property
    def attack(self) -> bool:
        return self.verdict == "Attack"

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "sessions": self.sessions,
            "honest": self.honest,
            "bindings_explored": self.bindings_explored,
            "verdict": self.verdict,
            "binding": self.binding,
            "witness": self.witness,
            "trace": self.trace,
            "universe_size": self.universe_size,
            "ms": self.ms,
        }


def analyze(
    protocol,
    sessions: int = 1,
    honest: int = 2,
    jobs: int = 1,
    max_universe: int = DEFAULT_MAX_UNIVERSE,
) -> Report:
    """Check ``protocol`` against every role binding of ``sessions``
    sessions. The first attacking binding in enumeration order wins, so the
    report does not depend on ``jobs``."""
    if sessions < 1:
        raise ValueError("sessions must be >= 1")
    start = time.perf_counter()
    scenario = Scenario.make(protocol, honest=honest, sessions=sessions)
    bindings = enumerate_bindings(scenario)
    work = [(protocol, scenario, b, max_universe) for b in bindings]
    explored, largest, hit = 0, 0, None
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(_run, work):
                explored += 1
                largest = max(largest, res.universe_size)
                if res.witness is not None:
                    hit = res
                    pool.shutdown(wait=False, cancel_futures=True)
                    break
    else:
        for item in work:
            res = _run(item)
            explored += 1
            largest = max(largest, res.universe_size)
            if res.witness is not None:
                hit = res
                break
    report = Report(
        protocol=protocol.name,
        sessions=sessions,
        honest=honest,
        bindings_explored=explored,
        verdict="Attack" if hit else f"Secure({sessions})",
        universe_size=hit.universe_size if hit else largest,
    )
    if hit:
        report.binding = [list(s) for s in hit.binding]
        report.witness = hit.witness
        report.trace = hit.trace
    report.ms = round((time.perf_counter() - start) * 1000, 3)
    return report
