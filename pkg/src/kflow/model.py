"""Principals, scenarios, bounded universes and the full knowledge-state
simulator.

Honest principals are taken to know the whole universe, so the only
knowledge tracked during analysis is Oscar's. The full-state simulator and
:func:`merge` exist to check that simplification on small random instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

from .patterns import Matcher, Mode, Sort, World
from .rules import GroundRule
from .terms import AtomKind, Kind, ValueTable, family

DEFAULT_MAX_UNIVERSE = 10_000

_HONEST = [("Alice", "A"), ("Bob", "B"), ("Carol", "C"), ("Dave", "D"), ("Erin", "E")]


class UniverseOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class Principal:
    name: str
    identity: str
    honest: bool = True

    @property
    def role(self) -> str:
        return "Honest" if self.honest else "Oscar"


OSCAR = Principal("Oscar", "O", honest=False)


def honest_principals(n: int) -> list[Principal]:
    out = [Principal(name, ident) for name, ident in _HONEST[:n]]
    out += [Principal(f"P{i}", f"I{i}") for i in range(len(out), n)]
    return out


@dataclass(frozen=True)
class Scenario:
    protocol: object
    principals: tuple
    sessions: int = 1

    def __post_init__(self):
        if self.sessions < 1:
            raise ValueError("sessions must be >= 1")
        if sum(not p.honest for p in self.principals) != 1:
            raise ValueError("a scenario has exactly one Oscar")

    @classmethod
    def make(cls, protocol, honest: int = 2, sessions: int = 1) -> "Scenario":
        if honest < 1:
            raise ValueError("need at least one honest principal")
        return cls(protocol, (*honest_principals(honest), OSCAR), sessions)

    @property
    def roles(self) -> tuple:
        return tuple(self.protocol.roles)

    @property
    def options(self) -> frozenset:
        return frozenset(self.protocol.options)

    @property
    def oscar(self) -> Principal:
        return next(p for p in self.principals if not p.honest)

    @property
    def honest(self) -> list[Principal]:
        return [p for p in self.principals if p.honest]

    def principal(self, name: str) -> Principal:
        for p in self.principals:
            if p.name == name:
                return p
        raise KeyError(name)

    def world(self, universe: "Universe", knows=None, draws=None) -> World:
        table = universe.table
        principals, owns = {}, {}
        for p in self.principals:
            h = table.by_label(p.identity)
            if h is not None and h in universe.values:
                principals[h] = (p.name, p.honest)
                owns[h] = frozenset({h})
        oscar_id = table.by_label(self.oscar.identity)
        return World(
            table,
            universe.values,
            principals,
            options=self.options,
            oscar_owns=frozenset({oscar_id}) if oscar_id is not None else frozenset(),
            owns=owns,
            knows=knows,
            draws=draws,
        )


@dataclass
class Universe:
    table: ValueTable
    values: frozenset
    base: frozenset
    provenance: dict = field(default_factory=dict)
    bindings: tuple = ()

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, h) -> bool:
        return h in self.values

    @property
    def per_session(self) -> int:
        """m: the most values any one session contributed, subterms included."""
        counts: dict = {}
        for note in self.provenance.values():
            counts[note[0]] = counts.get(note[0], 0) + 1
        return max(counts.values(), default=0)

    def dump(self) -> list[str]:
        return sorted(self.table.render(h) for h in self.values)


# -- bindings -------------------------------------------------------------------


def enumerate_bindings(scenario: Scenario) -> list[tuple]:
    """Role assignments for ``scenario.sessions`` sessions, one per honest
    renaming class. Each binding is a tuple of sessions; a session is a tuple
    of principal names in role order."""
    names = [p.name for p in scenario.principals]
    honest = [p.name for p in scenario.honest]
    roles = scenario.roles
    if not roles:
        return [()]
    per_session = [s for s in itertools.product(names, repeat=len(roles)) if any(n in honest for n in s)]
    index = {s: i for i, s in enumerate(per_session)}
    renamings = []
    for perm in itertools.permutations(honest):
        mapping = dict(zip(honest, perm))
        renamings.append(mapping)
    out = []
    for combo in itertools.combinations_with_replacement(range(len(per_session)), scenario.sessions):
        canon = min(
            tuple(sorted(index[tuple(m.get(n, n) for n in per_session[i])] for i in combo)) for m in renamings
        )
        if canon == combo:
            out.append(tuple(per_session[i] for i in combo))
    return out


# -- universe generation --------------------------------------------------------


class _GenMode(Mode):
    """Universe generation: templates are built rather than looked up, and a
    template with a single free variable may draw it from the parameter pool."""

    intern = True

    def __init__(self, world, sorts, pool_values, pool_sets, admissible):
        super().__init__(world)
        self.sorts = sorts
        self.pool_values = pool_values
        self.pool_sets = pool_sets
        self.admissible = admissible

    def make(self, structure):
        if not self.admissible(structure):
            return None
        return self.world.table.intern(structure)

    def present(self, h):
        return True

    def extra(self, t, env, free):
        if len(free) != 1:
            return
        (name,) = free
        sort = self.sorts.get(name, Sort.VALUE)
        if sort is Sort.SET:
            domain = self.pool_sets
        elif sort is Sort.VALUE:
            domain = self.pool_values
        else:
            return
        for v in domain:
            env2 = dict(env)
            env2[name] = v
            yield env2

    def param_domain(self, sort):
        return self.pool_sets if sort is Sort.SET else self.pool_values


def fresh_families(protocol) -> list[str]:
    fams = set()
    for schema in protocol.schemas:
        for name, sort in schema.sorts(protocol.roles).items():
            if sort is Sort.FRESH:
                fams.add(name.lower())
    return sorted(fams)


def _admissible(table: ValueTable, options: frozenset, identities: frozenset):
    def check(structure) -> bool:
        if structure[0] is Kind.ENC:
            key = structure[1]
            if "IdentitiesAreKeys" in options or "PublicKeyCryptography" in options:
                return key in identities
        return True

    return check


def build_universe(
    scenario: Scenario, bindings: Iterable, max_values: int = DEFAULT_MAX_UNIVERSE, table: ValueTable | None = None
) -> Universe:
    """The closed value pool induced by running each session's role binding.

    Every protocol schema is applied per session with roles, session seed and
    session-fresh atoms fixed; premises are matched against what exists so
    far, and a premise with one free variable may also take any pooled atom,
    nonce or set field (an input Oscar could have forged). ``sessions + 1``
    rounds are run, each with a fresh pool snapshot.
    """
    protocol = scenario.protocol
    bindings = tuple(tuple(s) for s in bindings)
    table = table or ValueTable()
    base = []
    for p in scenario.principals:
        base.append(table.atom(p.identity, AtomKind.IDENTITY))
    for s in range(1, scenario.sessions + 1):
        base.append(table.atom(f"eps#{s}", AtomKind.SEED))
    for label, kind in protocol.atoms:
        base.append(table.atom(label, kind))
    for fam in fresh_families(protocol):
        for s in range(1, scenario.sessions + 1):
            base.append(table.atom(f"{fam}#{s}", AtomKind.GENERIC))
    values = set(base)
    provenance: dict = {}
    identities = frozenset(table.by_label(p.identity) for p in scenario.principals)
    admissible = _admissible(table, scenario.options, identities)
    roles = scenario.roles

    def universe() -> Universe:
        return Universe(table, frozenset(values), frozenset(base), provenance, bindings)

    for _ in range(scenario.sessions + 1):
        snapshot = scenario.world(universe())
        pool_values = snapshot.by_kind[Kind.ATOM] + snapshot.by_kind[Kind.NONCE]
        pool_sets = list(snapshot.set_fields)
        seen_sets = set(pool_sets)
        for v in pool_values:
            if frozenset({v}) not in seen_sets:
                pool_sets.append(frozenset({v}))
        for _pass in range(max(1, len(protocol.schemas))):
            before = len(values)
            for schema in protocol.schemas:
                sorts = schema.sorts(roles)
                for s_idx, session in enumerate(bindings):
                    env = _session_env(table, scenario, sorts, roles, session, s_idx + 1)
                    if env is None:
                        continue
                    world = scenario.world(universe())
                    mode = _GenMode(world, sorts, pool_values, pool_sets, admissible)
                    m = Matcher(world, sorts, mode)
                    for found in list(m.solve([*schema.premises, schema.conclusion], schema.guards, env)):
                        made = [m.build(t, found) for t in (*schema.premises, schema.conclusion)]
                        if any(h is None for h in made):
                            continue
                        for h in made:
                            for sub in sorted(table.subterms(h)):
                                if sub not in values:
                                    values.add(sub)
                                    provenance[sub] = (s_idx + 1, schema.label)
                    if len(values) > max_values:
                        raise UniverseOverflow(
                            f"universe exceeded {max_values} values (protocol {protocol.name}, binding {bindings})"
                        )
            if len(values) == before:
                break
    return universe()


def _session_env(table, scenario, sorts, roles, session, s):
    env = {}
    for role, name in zip(roles, session):
        if role in sorts:
            env[role] = table.by_label(scenario.principal(name).identity)
    for name, sort in sorts.items():
        if sort is Sort.SEED:
            env[name] = table.by_label(f"eps#{s}")
        elif sort is Sort.FRESH:
            h = table.by_label(f"{name.lower()}#{s}")
            if h is None:
                return None
            env[name] = h
    return env


# -- Oscar's knowledge -------------------------------------------------------


@dataclass
class OscarState:
    """Oscar's knowledge and how he came by it.

    ``learns`` maps each derived value to (premises, rule label); ``depth``
    gives the round in which a value became known (0 for drawn values).
    """

    known: frozenset
    draws: frozenset
    learns: dict = field(default_factory=dict)
    depth: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.depth:
            self.depth = {h: 0 for h in self.draws}


def secret_atoms(scenario: Scenario, universe: Universe) -> frozenset:
    table = universe.table
    out = set()
    for decl in scenario.protocol.secrets:
        if decl == "identities":
            out |= {table.by_label(p.identity) for p in scenario.honest}
        else:
            out |= {
                h for h in universe.values if table.is_atom(h) and "#" in table.label(h) and family(table.label(h)) == decl
            }
    return frozenset(out)


def initial_oscar_state(scenario: Scenario, universe: Universe) -> OscarState:
    table = universe.table
    secrets = secret_atoms(scenario, universe)
    draws = frozenset(h for h in universe.values if table.is_atom(h) and h not in secrets)
    return OscarState(known=draws, draws=draws)


# -- full knowledge states ---------------------------------------------------------


@dataclass(frozen=True)
class FullRule:
    """``sender`` tells ``value`` to ``receiver`` once every (principal, value)
    pair in ``needs`` is known."""

    sender: object
    value: object
    receiver: object
    needs: frozenset = frozenset()


def knowledge(state: Iterable) -> frozenset:
    return frozenset(v for _, v in state)


def flow_step(rules: Iterable[FullRule], state: frozenset) -> frozenset:
    new = {(r.receiver, r.value) for r in rules if (r.sender, r.value) in state and r.needs <= state}
    return state | new


def simulate_full(rules: Iterable[FullRule], state: Iterable, steps: int | None = None) -> frozenset:
    """Apply every rule at most once per step; ``steps=None`` runs to the
    least fixed point above ``state``."""
    rules = list(rules)
    k = frozenset(state)
    n = 0
    while steps is None or n < steps:
        nxt = flow_step(rules, k)
        if nxt == k:
            break
        k, n = nxt, n + 1
    return k


def merge(principals, rules, state, adversaries, merged="o"):
    """Collapse the adversaries into one principal ``merged``; rules that end
    up telling a principal something by itself are dropped."""
    adversaries = set(adversaries)
    if not adversaries or not adversaries <= set(principals):
        raise ValueError("adversaries must be a non-empty subset of principals")

    def m(p):
        return merged if p in adversaries else p

    new_principals = []
    for p in principals:
        if m(p) not in new_principals:
            new_principals.append(m(p))
    new_rules = set()
    for r in rules:
        sender, receiver = m(r.sender), m(r.receiver)
        if sender == receiver:
            continue
        new_rules.add(FullRule(sender, r.value, receiver, frozenset((m(p), v) for p, v in r.needs)))
    new_state = frozenset((m(p), v) for p, v in state)
    return new_principals, new_rules, new_state


def project_rules(rules: Iterable[FullRule], k0: Iterable, oscar) -> set[GroundRule]:
    """Oscar's view X -> x of the rules applicable to ``k0``."""
    v0 = knowledge(k0)
    out = set()
    for r in rules:
        if r.receiver != oscar or r.sender == oscar:
            continue
        if r.value not in v0 or not knowledge(r.needs) <= v0:
            continue
        premises = frozenset(v for p, v in r.needs if p == oscar)
        if r.value in premises:
            continue
        out.add(GroundRule(f"{r.sender}->{r.receiver}", premises, r.value, tuple(sorted(map(str, premises)))))
    return out
