"""Rule schemas, the primitive rule library, and grounding."""

from __future__ import annotations

from dataclasses import dataclass, field

from .patterns import Ctor, Guard, Matcher, SetLit, Sort, Var, World, infer_sorts
from .terms import Kind


@dataclass(frozen=True)
class RuleSchema:
    label: str
    premises: tuple
    conclusion: object
    guards: tuple = ()

    def templates(self) -> tuple:
        return (*self.premises, self.conclusion)

    def sorts(self, roles=()) -> dict[str, Sort]:
        return infer_sorts(self.templates(), self.guards, roles)

    def variables(self, roles=()) -> list[tuple[str, Sort]]:
        return sorted(self.sorts(roles).items())


@dataclass(frozen=True)
class GroundRule:
    label: str
    premises: frozenset
    conclusion: int
    key: tuple = field(default=(), compare=False, hash=False, repr=False)

    def order(self) -> tuple:
        return (self.label, self.key, self.conclusion)


def ground(schema: RuleSchema, universe, scenario) -> set[GroundRule]:
    """Every instance of ``schema`` whose values all lie in ``universe``."""
    return ground_in(schema, scenario.world(universe), scenario.roles)


def ground_in(schema: RuleSchema, world: World, roles=()) -> set[GroundRule]:
    sorts = schema.sorts(roles)
    splats = [p for p in schema.premises if isinstance(p, Var) and sorts[p.name] is Sort.SET]
    plain = [p for p in schema.premises if p not in splats]
    m = Matcher(world, sorts)
    table = world.table
    out: set[GroundRule] = set()
    for env in m.solve([schema.conclusion, *plain], schema.guards):
        c = m.build(schema.conclusion, env)
        prem = {m.build(p, env) for p in plain}
        for s in splats:
            prem |= env[s.name]
        if c in prem:
            continue
        key = tuple(sorted(table.render(h) for h in prem))
        out.add(GroundRule(schema.label, frozenset(prem), c, key))
    return out


# -- primitive library ----------------------------------------------------------

K, P, X, S, O = Var("K"), Var("P"), Var("X"), Var("S"), Var("O")


def primitive_encryptor() -> RuleSchema:
    return RuleSchema("encryptor", (K, P), Ctor(Kind.ENC, (K, P)))


def primitive_decryptor() -> RuleSchema:
    # decrypt_key only bites when PublicKeyCryptography is on
    return RuleSchema(
        "decryptor",
        (Ctor(Kind.ENC, (K, P)), K),
        X,
        (Guard("member", (X, P)), Guard("decrypt_key", (K,))),
    )


def primitive_nonce_generator() -> RuleSchema:
    return RuleSchema("nonce_generator", (S,), Ctor(Kind.NONCE, (S, O)), (Guard("oscar", (O,)),))


def primitive_hasher() -> RuleSchema:
    return RuleSchema("hasher", (P,), Ctor(Kind.HASH, (P,)))


def primitive_tuple_projection() -> RuleSchema:
    return RuleSchema(
        "tuple_projection", (Ctor(Kind.TUPLE, (P,)),), X, (Guard("member", (X, P)),)
    )


def primitive_get_response() -> RuleSchema:
    challenge = Ctor(Kind.HASH, (SetLit((O, X)),))
    return RuleSchema(
        "get_response", (challenge, X), Ctor(Kind.PUF, (challenge,)), (Guard("oscar", (O,)),)
    )


def primitive_get_secret() -> RuleSchema:
    resp = Ctor(Kind.PUF, (X,))
    return RuleSchema(
        "get_secret",
        (resp, O, X),
        Ctor(Kind.HASH, (SetLit((resp, O)),)),
        (Guard("oscar", (O,)),),
    )


PRIMITIVES = {
    "encryptor": primitive_encryptor,
    "decryptor": primitive_decryptor,
    "nonce_generator": primitive_nonce_generator,
    "hasher": primitive_hasher,
    "tuple_projection": primitive_tuple_projection,
    "get_response": primitive_get_response,
    "get_secret": primitive_get_secret,
}
