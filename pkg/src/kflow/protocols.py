"""Built-in protocol specifications."""

from __future__ import annotations

from dataclasses import dataclass

from .engine import TheoremSpec
from .patterns import Const, Ctor, Guard, SetLit, Var
from .rules import RuleSchema
from .terms import AtomKind, Kind


@dataclass(frozen=True)
class ProtocolSpec:
    """A protocol: its honest rules, Oscar's primitives and the attack
    pattern to look for.

    ``atoms`` lists protocol constants as (label, AtomKind). ``secrets``
    names what Oscar does not draw: ``identities`` (honest identity atoms) or
    a fresh-variable family such as ``kab``.
    """

    name: str
    roles: tuple
    primitives: tuple
    options: tuple
    schemas: tuple
    theorem: TheoremSpec
    atoms: tuple = ()
    secrets: tuple = ()

    @classmethod
    def make(cls, name, roles, primitives, options, schemas, theorem, atoms=(), secrets=()):
        """Build with clauses in canonical order, so that specs written in
        different orders compare equal."""
        return cls(
            name=name,
            roles=tuple(roles),
            primitives=tuple(sorted(set(primitives))),
            options=tuple(sorted(set(options))),
            schemas=tuple(sorted(schemas, key=lambda s: s.label)),
            theorem=theorem,
            atoms=tuple(sorted(set(atoms), key=lambda a: a[0])),
            secrets=tuple(sorted(set(secrets))),
        )

    def schema(self, label: str) -> RuleSchema:
        for s in self.schemas:
            if s.label == label:
                return s
        raise KeyError(label)


def V(name):
    return Var(name)


def enc(key, *plain):
    return Ctor(Kind.ENC, (key, SetLit(tuple(plain))))


def enc_set(key, plain: Var):
    """Cipher whose whole plaintext set is the variable ``plain``."""
    return Ctor(Kind.ENC, (key, plain))


def nonce(seed, ident):
    return Ctor(Kind.NONCE, (seed, ident))


def hash_(*items):
    return Ctor(Kind.HASH, (SetLit(tuple(items)),))


def tup(*items):
    return Ctor(Kind.TUPLE, (SetLit(tuple(items)),))


def puf(x):
    return Ctor(Kind.PUF, (x,))


def G(name, *args):
    return Guard(name, tuple(args))


I, R, EPS, VAL, X = V("I"), V("R"), V("EPS"), V("V"), V("X")

_NS_THEOREM = TheoremSpec(
    "secrecy",
    ("A", "B", "NA", "S"),
    (
        G("honest", V("A")),
        G("honest", V("B")),
        G("distinct", V("A"), V("B")),
        G("knows", V("NA")),
        G("eq", V("NA"), nonce(V("S"), V("A"))),
        G("knows", nonce(enc(V("B"), V("A"), V("NA")), V("B"))),
    ),
)


def _ns_rules(lowe: bool) -> list[RuleSchema]:
    # the responder's nonce is seeded by the cipher it answers
    incoming = enc(R, I, VAL)
    response = enc(I, VAL, nonce(incoming, R), R) if lowe else enc(I, VAL, nonce(incoming, R))
    final_premise = enc(I, nonce(EPS, I), VAL, X) if lowe else enc(I, nonce(EPS, I), VAL)
    final_guards = [G("honest", I), G("seed", EPS)]
    if lowe:
        final_guards.append(G("eq", X, R))
    return [
        RuleSchema("ns1", (), enc(R, I, nonce(EPS, I)), (G("honest", I), G("seed", EPS))),
        RuleSchema("ns2", (incoming,), response, (G("honest", R),)),
        RuleSchema("ns3", (final_premise,), enc(R, VAL), tuple(final_guards)),
    ]


def ns() -> ProtocolSpec:
    """Needham-Schroeder public key: I -> R: E_R(I, nI); R -> I: E_I(nI, nR);
    I -> R: E_R(nR)."""
    return ProtocolSpec.make(
        "ns",
        ("I", "R"),
        ("encryptor", "decryptor", "nonce_generator"),
        ("PublicKeyCryptography", "IdentitiesAreKeys"),
        _ns_rules(lowe=False),
        _NS_THEOREM,
        secrets=(),
    )


def nsl() -> ProtocolSpec:
    """Lowe's fix: the response names the responder and the initiator
    checks it."""
    return ProtocolSpec.make(
        "nsl",
        ("I", "R"),
        ("encryptor", "decryptor", "nonce_generator"),
        ("PublicKeyCryptography", "IdentitiesAreKeys"),
        _ns_rules(lowe=True),
        _NS_THEOREM,
    )


def _server_key(p):
    return nonce(Const("srv"), p)


def otway_rees() -> ProtocolSpec:
    """Otway-Rees with the server's work folded into message 3."""
    K1, K2, S1, S2, P = V("K1"), V("K2"), V("S1"), V("S2"), V("P")
    c1 = enc(nonce(S1, I), I, R)
    m1 = tup(c1, I, R)
    m2 = tup(c1, enc(_server_key(R), I, R), I, R)
    schemas = [
        RuleSchema("or1", (), tup(enc(_server_key(I), I, R), I, R), (G("distinct", I, R),)),
        RuleSchema("or2", (m1,), m2, ()),
        RuleSchema(
            "or3",
            (tup(enc(K1, I, R), enc(K2, I, R), I, R),),
            tup(enc_set(K1, P), enc_set(K2, P)),
            (G("eq", K1, nonce(S1, I)), G("eq", K2, nonce(S2, R)), G("param", P)),
        ),
        RuleSchema(
            "or4",
            (tup(enc_set(K1, P), enc_set(K2, P)),),
            tup(enc_set(K1, P)),
            (G("eq", K1, nonce(S1, V("J1"))), G("eq", K2, nonce(S2, V("J2")))),
        ),
    ]
    A, B, Q, Y = V("A"), V("B"), V("Q"), V("Y")
    theorem = TheoremSpec(
        "session_key",
        ("A", "B", "Y", "P3", "Q", "S1", "S2", "S3", "S4", "S5", "S6"),
        (
            G("honest", A),
            G("honest", B),
            G("distinct", A, B),
            G("knows", tup(enc(nonce(V("S1"), A), A, Y), A, Y)),
            G("identity", Y),
            G("knows", tup(enc(nonce(V("S2"), A), A, B), enc(nonce(V("S3"), B), A, B), A, B)),
            G("knows", tup(enc_set(nonce(V("S4"), A), V("P3")), enc_set(nonce(V("S5"), B), V("P3")))),
            G("knows", tup(enc_set(nonce(V("S6"), A), Q))),
            G("atomic", Q),
            G("notdraws", Q),
            G("knows", Q),
        ),
    )
    return ProtocolSpec.make(
        "otway_rees",
        ("I", "R"),
        ("encryptor", "decryptor", "nonce_generator", "tuple_projection"),
        (),
        schemas,
        theorem,
        atoms=(("srv", AtomKind.SEED),),
        secrets=("identities",),
    )


def cpuf_renewal() -> ProtocolSpec:
    """CPUF challenge-response renewal: the owner hands the device a renewal
    program and gets the new response back encrypted under the old one."""
    PRE = V("PRE")
    param = hash_(PRE)
    old_resp = puf(param)
    new_resp = puf(hash_(R, param))
    fresh = (G("honest", R), G("fresh", PRE))
    schemas = [
        RuleSchema("reveal_param", (), param, fresh),
        RuleSchema("reveal_hash", (), R, (G("honest", R),)),
        RuleSchema("renew", (), enc(hash_(old_resp, R), new_resp), fresh),
    ]
    OC, Q = V("OC"), V("Q")
    theorem = TheoremSpec(
        "new_response_secret",
        ("R", "OC", "Q"),
        (
            G("honest", R),
            G("present", enc(hash_(puf(OC), R), puf(hash_(OC, R)))),
            G("eq", OC, hash_(Q)),
            G("atomic", Q),
            G("notdraws", Q),
            G("knows", puf(hash_(OC, R))),
        ),
    )
    return ProtocolSpec.make(
        "cpuf_renewal",
        ("R",),
        ("encryptor", "decryptor", "hasher", "get_response", "get_secret"),
        (),
        schemas,
        theorem,
        secrets=("pre",),
    )


BUILTINS = {
    "ns": ns,
    "nsl": nsl,
    "otway_rees": otway_rees,
    "cpuf_renewal": cpuf_renewal,
}
