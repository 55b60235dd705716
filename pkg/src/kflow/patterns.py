"""Value templates, guards and the matcher shared by grounding, universe
generation and theorem checking.

A template is a constructor term over variables and atom constants. Set
fields are either a literal ``{t1, ..., tn}`` (matched injectively, so the
value set has exactly n members) or a set variable that binds the whole set.
Principal variables are bound to the principal's identity atom.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterator, Union

from .terms import SET_KINDS, AtomKind, Kind, ValueTable, family


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    label: str


@dataclass(frozen=True)
class SetLit:
    items: tuple


@dataclass(frozen=True)
class Ctor:
    """``kind`` with positional args.

    ENC: (key, plain)   NONCE: (seed, id)   HASH/TUPLE: (members,)   PUF: (arg,)
    where plain/members is a SetLit or a set Var.
    """

    kind: Kind
    args: tuple


Template = Union[Var, Const, Ctor]


@dataclass(frozen=True)
class Guard:
    name: str
    args: tuple = ()


class Sort(enum.Enum):
    PRINCIPAL = "principal"
    SEED = "seed"
    FRESH = "fresh"
    VALUE = "value"
    SET = "set"


SESSION_SEED = "eps"

# guard name -> positional argument kinds: v = variable, t = template,
# w = word, n = integer
GUARD_SIGNATURES = {
    "principal": "v",
    "honest": "v",
    "oscar": "v",
    "seed": "v",
    "fresh": "v",
    "param": "v",
    "identity": "t",
    "atomic": "t",
    "kind": "tw",
    "eq": "vt",
    "distinct": "tt",
    "member": "vv",
    "card": "vn",
    "owns": "vt",
    "option": "w",
    "decrypt_key": "t",
    "knows": "t",
    "draws": "t",
    "notdraws": "t",
    "present": "t",
}

KIND_WORDS = {k.value: k for k in Kind}


class SortError(ValueError):
    pass


# -- static helpers -----------------------------------------------------------


def template_vars(t, out: set | None = None) -> set:
    out = set() if out is None else out
    if isinstance(t, Var):
        out.add(t.name)
    elif isinstance(t, SetLit):
        for i in t.items:
            template_vars(i, out)
    elif isinstance(t, Ctor):
        for a in t.args:
            template_vars(a, out)
    return out


def guard_vars(g: Guard) -> set:
    out: set = set()
    for a in g.args:
        if isinstance(a, (Var, Const, Ctor)):
            template_vars(a, out)
    return out


def _set_positions(t, out: set) -> None:
    if isinstance(t, Ctor):
        for i, a in enumerate(t.args):
            setpos = (t.kind is Kind.ENC and i == 1) or t.kind in SET_KINDS
            if setpos and isinstance(a, Var):
                out.add(a.name)
            elif isinstance(a, SetLit):
                for x in a.items:
                    _set_positions(x, out)
            else:
                _set_positions(a, out)


def infer_sorts(templates, guards, roles=()) -> dict[str, Sort]:
    sorts: dict[str, Sort] = {}

    def put(name, sort):
        old = sorts.get(name)
        if old is not None and old is not sort and old is not Sort.VALUE:
            raise SortError(f"variable {name} used both as {old.value} and {sort.value}")
        if old is None or old is Sort.VALUE:
            sorts[name] = sort

    for t in templates:
        for v in template_vars(t):
            sorts.setdefault(v, Sort.VALUE)
    for g in guards:
        for v in guard_vars(g):
            sorts.setdefault(v, Sort.VALUE)
    setvars: set = set()
    for t in templates:
        _set_positions(t, setvars)
    for g in guards:
        for a in g.args:
            _set_positions(a, setvars)
        if g.name == "member":
            setvars.add(g.args[1].name)
        elif g.name == "card":
            setvars.add(g.args[0].name)
    for v in setvars:
        put(v, Sort.SET)
    for r in roles:
        if r in sorts:
            put(r, Sort.PRINCIPAL)
    for g in guards:
        if g.name in ("principal", "honest", "oscar", "owns"):
            put(g.args[0].name, Sort.PRINCIPAL)
        elif g.name == "seed":
            put(g.args[0].name, Sort.SEED)
        elif g.name == "fresh":
            put(g.args[0].name, Sort.FRESH)
    return sorts


def params(guards) -> frozenset:
    return frozenset(g.args[0].name for g in guards if g.name == "param")


# -- runtime ------------------------------------------------------------------


@dataclass
class World:
    """Everything a pattern can be evaluated against."""

    table: ValueTable
    universe: frozenset
    principals: dict  # identity handle -> (name, honest)
    options: frozenset = frozenset()
    oscar_owns: frozenset = frozenset()
    owns: dict = field(default_factory=dict)  # identity handle -> frozenset
    knows: frozenset | None = None
    draws: frozenset | None = None

    def __post_init__(self):
        self.by_kind: dict[Kind, list[int]] = {k: [] for k in Kind}
        for h in sorted(self.universe):
            self.by_kind[self.table.kind_of(h)].append(h)
        fields_seen: dict[frozenset, None] = {}
        for h in sorted(self.universe):
            for s in self.table.set_fields(h):
                fields_seen.setdefault(s, None)
        self.set_fields = list(fields_seen)
        self.oscar = next((h for h, (_, honest) in self.principals.items() if not honest), None)

    def atoms_of_family(self, fam: str) -> list[int]:
        return [
            h for h in self.by_kind[Kind.ATOM] if "#" in self.table.label(h) and family(self.table.label(h)) == fam
        ]


class Mode:
    """Grounding: everything is looked up in a fixed universe."""

    intern = False

    def __init__(self, world: World):
        self.world = world

    def present(self, h: int) -> bool:
        return h in self.world.universe

    def extra(self, t, env, free) -> Iterator[dict]:
        return iter(())

    def param_domain(self, sort: Sort):
        if sort is Sort.SET:
            return self.world.set_fields
        return sorted(self.world.universe)


class Matcher:
    def __init__(self, world: World, sorts: dict[str, Sort], mode: Mode | None = None):
        self.world = world
        self.table = world.table
        self.sorts = sorts
        self.mode = mode or Mode(world)

    # -- building ------------------------------------------------------------

    def bound(self, t, env) -> bool:
        return template_vars(t) <= env.keys()

    def build(self, t, env):
        """Handle of a fully bound template, or None if absent/unbuildable."""
        table = self.table
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, Const):
            return table.by_label(t.label)
        args = []
        for i, a in enumerate(t.args):
            if isinstance(a, SetLit) or (isinstance(a, Var) and self.sorts.get(a.name) is Sort.SET):
                s = self.build_set(a, env)
                if s is None:
                    return None
                args.append(s)
            else:
                h = self.build(a, env)
                if h is None:
                    return None
                args.append(h)
        structure = (t.kind, *args)
        if self.mode.intern:
            return self.mode.make(structure)
        return table.lookup(structure)

    def build_set(self, s, env):
        if isinstance(s, Var):
            return env[s.name]
        members = []
        for item in s.items:
            h = self.build(item, env)
            if h is None:
                return None
            members.append(h)
        out = frozenset(members)
        if len(out) != len(members):
            return None  # literal sets match injectively
        return out

    # -- matching ------------------------------------------------------------

    def match(self, t, h: int, env: dict) -> Iterator[dict]:
        table = self.table
        if isinstance(t, Var):
            name = t.name
            if name in env:
                if env[name] == h:
                    yield env
                return
            if not self._admits(name, h):
                return
            env2 = dict(env)
            env2[name] = h
            yield env2
            return
        if isinstance(t, Const):
            if table.by_label(t.label) == h:
                yield env
            return
        term = table.term(h)
        if term[0] is not t.kind:
            return
        yield from self._match_args(t.args, term[1:], env)

    def _match_args(self, targs, vals, env) -> Iterator[dict]:
        if not targs:
            yield env
            return
        a, v = targs[0], vals[0]
        if isinstance(v, frozenset):
            it = self.match_set(a, v, env)
        else:
            it = self.match(a, v, env)
        for env2 in it:
            yield from self._match_args(targs[1:], vals[1:], env2)

    def match_set(self, s, members: frozenset, env) -> Iterator[dict]:
        if isinstance(s, Var):
            if s.name in env:
                if env[s.name] == members:
                    yield env
                return
            env2 = dict(env)
            env2[s.name] = members
            yield env2
            return
        if len(s.items) != len(members):
            return
        ordered = sorted(members)
        seen = []
        for perm in itertools.permutations(ordered):
            for env2 in self._match_seq(s.items, perm, env):
                if env2 not in seen:
                    seen.append(env2)
                    yield env2

    def _match_seq(self, items, vals, env):
        if not items:
            yield env
            return
        for env2 in self.match(items[0], vals[0], env):
            yield from self._match_seq(items[1:], vals[1:], env2)

    def _admits(self, name: str, h: int) -> bool:
        sort = self.sorts.get(name, Sort.VALUE)
        if sort is Sort.VALUE:
            return True
        if sort is Sort.PRINCIPAL:
            return h in self.world.principals
        if sort in (Sort.SEED, Sort.FRESH):
            if not self.table.is_atom(h):
                return False
            label = self.table.label(h)
            want = SESSION_SEED if sort is Sort.SEED else name.lower()
            return "#" in label and family(label) == want
        return False

    def domain(self, name: str) -> list:
        sort = self.sorts.get(name, Sort.VALUE)
        w = self.world
        if sort is Sort.PRINCIPAL:
            return sorted(w.principals)
        if sort is Sort.SEED:
            return w.atoms_of_family(SESSION_SEED)
        if sort is Sort.FRESH:
            return w.atoms_of_family(name.lower())
        return list(self.mode.param_domain(sort))

    # -- guards ----------------------------------------------------------------

    def check(self, g: Guard, env) -> bool | None:
        """True/False once decidable, None while variables are unbound."""
        if not guard_vars(g) <= env.keys():
            return None
        w = self.world
        table = self.table
        name, args = g.name, g.args
        if name in ("principal", "seed", "fresh", "param"):
            return True
        if name == "honest":
            p = w.principals.get(env[args[0].name])
            return p is not None and p[1]
        if name == "oscar":
            return env[args[0].name] == w.oscar
        if name == "option":
            return args[0] in w.options
        if name == "card":
            return len(env[args[0].name]) == args[1]
        if name == "member":
            return env[args[0].name] in env[args[1].name]
        if name == "eq":
            x = env[args[0].name]
            return self.build(args[1], env) == x
        hs = self._values(args[0], env)
        if hs is None:
            return False
        if name == "identity":
            return all(table.atom_kind(h) is AtomKind.IDENTITY for h in hs)
        if name == "atomic":
            return all(table.is_atom(h) for h in hs)
        if name == "kind":
            want = KIND_WORDS[args[1]]
            return all(table.kind_of(h) is want for h in hs)
        if name == "distinct":
            other = self._values(args[1], env)
            return other is not None and hs != other
        if name == "owns":
            owner = env[args[0].name]
            other = self._values(args[1], env)
            return other is not None and other <= w.owns.get(owner, frozenset())
        if name == "decrypt_key":
            if "PublicKeyCryptography" not in w.options:
                return True
            return hs <= w.oscar_owns
        if name == "knows":
            return w.knows is not None and hs <= w.knows
        if name == "draws":
            return w.draws is not None and hs <= w.draws
        if name == "notdraws":
            return w.draws is not None and not (hs & w.draws)
        if name == "present":
            return hs <= w.universe
        raise ValueError(f"unknown guard {name}")

    def _values(self, t, env) -> frozenset | None:
        if isinstance(t, Var) and self.sorts.get(t.name) is Sort.SET:
            return env[t.name]
        h = self.build(t, env)
        return None if h is None else frozenset({h})

    def binder(self, g: Guard, env) -> Iterator[dict] | None:
        """Branches for guards that can bind a variable, else None."""
        if g.name == "member":
            x, s = g.args[0].name, g.args[1].name
            if x not in env and s in env:
                return (e for h in sorted(env[s]) for e in self.match(g.args[0], h, env))
        elif g.name == "eq":
            x, t = g.args[0].name, g.args[1]
            if x in env and not self.bound(t, env):
                return self.match(t, env[x], env)
            if x not in env and self.bound(t, env):
                h = self.build(t, env)
                if h is None or not self.mode.present(h):
                    return iter(())
                return self.match(g.args[0], h, env)
        return None

    # -- search ----------------------------------------------------------------

    def solve(self, templates, guards, env=None) -> Iterator[dict]:
        """All environments under which every template denotes a present
        value and every guard holds."""
        yield from self._search(dict(env or {}), list(templates), list(guards))

    def _search(self, env, templates, guards):
        rest = []
        for g in guards:
            r = self.check(g, env)
            if r is False:
                return
            if r is None:
                rest.append(g)
        guards = rest

        for i, t in enumerate(templates):
            if self.bound(t, env):
                h = self.build(t, env)
                if h is None or not self.mode.present(h):
                    return
                yield from self._search(env, templates[:i] + templates[i + 1 :], guards)
                return

        for i, g in enumerate(guards):
            branches = self.binder(g, env)
            if branches is not None:
                others = guards[:i] + guards[i + 1 :]
                for env2 in branches:
                    yield from self._search(env2, templates, others)
                return

        if templates:
            i = self._pick(templates, env)
            t = templates[i]
            others = templates[:i] + templates[i + 1 :]
            if isinstance(t, Var):
                cands = self.domain(t.name)
            else:
                cands = self.world.by_kind[t.kind] if isinstance(t, Ctor) else [self.build(t, env)]
            free = template_vars(t) - env.keys()
            for h in cands:
                for env2 in self.match(t, h, env):
                    yield from self._search(env2, others, guards)
            for env2 in self.mode.extra(t, env, free):
                yield from self._search(env2, others, guards)
            return

        unbound = sorted(set().union(*(guard_vars(g) for g in guards)) - env.keys()) if guards else []
        if unbound:
            name = unbound[0]
            for h in self.domain(name):
                if self._admits(name, h) or self.sorts.get(name) in (Sort.VALUE, Sort.SET):
                    env2 = dict(env)
                    env2[name] = h
                    yield from self._search(env2, templates, guards)
            return
        yield env

    def _pick(self, templates, env) -> int:
        def score(t):
            if isinstance(t, Var):
                return (2, 0)
            return (0, -_size(t)) if isinstance(t, Ctor) else (1, 0)

        return min(range(len(templates)), key=lambda i: score(templates[i]))


def _size(t) -> int:
    if isinstance(t, Ctor):
        return 1 + sum(_size(a) for a in t.args)
    if isinstance(t, SetLit):
        return sum(_size(a) for a in t.items)
    return 1
