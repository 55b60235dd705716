"""Symbolic value algebra.

Values are interned in a :class:`ValueTable`; a value is referred to by an
integer handle, and two handles are equal exactly when the terms they stand
for are structurally equal. That makes constructor injectivity (perfect
cryptography) a property of the table rather than something to check.
"""

from __future__ import annotations

import enum
from typing import Iterable, Iterator


class Kind(enum.Enum):
    ATOM = "atom"
    ENC = "enc"
    NONCE = "nonce"
    HASH = "hash"
    TUPLE = "tuple"
    PUF = "puf"


class AtomKind(enum.Enum):
    IDENTITY = "identity"
    SEED = "seed"
    GENERIC = "generic"


# Kinds whose payload is a single set of children.
SET_KINDS = (Kind.HASH, Kind.TUPLE)


class TermError(ValueError):
    pass


class OccursViolation(TermError):
    """A value would contain itself."""


class EmptyComposite(TermError):
    """A set-valued field was empty."""


class UnknownHandle(TermError):
    pass


class ValueTable:
    """Append-only store of interned terms.

    Term structures are plain tuples::

        (ATOM, label, atom_kind)
        (ENC, key, frozenset(plain))
        (NONCE, seed, id)
        (HASH, frozenset(items))
        (TUPLE, frozenset(items))
        (PUF, challenge)
    """

    def __init__(self):
        self._terms: list[tuple] = []
        self._index: dict[tuple, int] = {}
        self._subterms: list[frozenset[int]] = []
        self._render: list[str] = []
        self._labels: dict[str, int] = {}
        self.frozen = False

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[int]:
        return iter(range(len(self._terms)))

    def __contains__(self, h) -> bool:
        return isinstance(h, int) and 0 <= h < len(self._terms)

    # -- construction -------------------------------------------------------

    def intern(self, structure: tuple) -> int:
        h = self._index.get(structure)
        if h is not None:
            return h
        self._check(structure)
        if self.frozen:
            raise TermError("value table is frozen")
        h = len(self._terms)
        self._terms.append(structure)
        self._index[structure] = h
        subs = {h}
        for c in _children(structure):
            subs |= self._subterms[c]
        self._subterms.append(frozenset(subs))
        self._render.append(self._render_structure(structure))
        if structure[0] is Kind.ATOM:
            self._labels[structure[1]] = h
        return h

    def lookup(self, structure: tuple) -> int | None:
        """Handle for an already interned structure, else None."""
        return self._index.get(structure)

    def by_label(self, label: str) -> int | None:
        return self._labels.get(label)

    def _check(self, structure: tuple) -> None:
        kind = structure[0]
        if not isinstance(kind, Kind):
            raise TermError(f"bad term structure {structure!r}")
        if kind is Kind.ATOM:
            if not isinstance(structure[1], str) or not structure[1]:
                raise TermError("atom label must be a non-empty string")
            if not isinstance(structure[2], AtomKind):
                raise TermError("atom kind missing")
            if structure[1] in self._labels:
                raise TermError(f"atom label {structure[1]!r} already used with another kind")
            return
        if kind is Kind.ENC and not structure[2]:
            raise EmptyComposite("ciphertext plaintext is empty")
        if kind in SET_KINDS and not structure[1]:
            raise EmptyComposite(f"{kind.value} has no members")
        nxt = len(self._terms)
        for c in _children(structure):
            if c == nxt:
                # the only way to name a not-yet-existing parent
                raise OccursViolation("value would be its own subterm")
            if c not in self:
                raise UnknownHandle(f"unknown handle {c!r}")

    # convenience constructors

    def atom(self, label: str, kind: AtomKind = AtomKind.GENERIC) -> int:
        return self.intern((Kind.ATOM, label, kind))

    def enc(self, key: int, plain: Iterable[int]) -> int:
        return self.intern((Kind.ENC, key, frozenset(plain)))

    def nonce(self, seed: int, ident: int) -> int:
        return self.intern((Kind.NONCE, seed, ident))

    def hash(self, items: Iterable[int]) -> int:
        return self.intern((Kind.HASH, frozenset(items)))

    def tuple(self, items: Iterable[int]) -> int:
        return self.intern((Kind.TUPLE, frozenset(items)))

    def puf(self, challenge: int) -> int:
        return self.intern((Kind.PUF, challenge))

    # -- inspection ---------------------------------------------------------

    def term(self, h: int) -> tuple:
        if h not in self:
            raise UnknownHandle(f"unknown handle {h!r}")
        return self._terms[h]

    def kind_of(self, h: int) -> Kind:
        return self.term(h)[0]

    def is_atom(self, h: int) -> bool:
        return self._terms[h][0] is Kind.ATOM

    def atom_kind(self, h: int) -> AtomKind | None:
        t = self._terms[h]
        return t[2] if t[0] is Kind.ATOM else None

    def label(self, h: int) -> str:
        t = self.term(h)
        if t[0] is not Kind.ATOM:
            raise TermError(f"{self.render(h)} is not an atom")
        return t[1]

    def children(self, h: int) -> tuple[int, ...]:
        return _children(self.term(h))

    def subterms(self, h: int) -> frozenset[int]:
        """Reflexive-transitive closure of field reachability."""
        self.term(h)
        return self._subterms[h]

    def render(self, h: int) -> str:
        self.term(h)
        return self._render[h]

    def render_set(self, hs: Iterable[int]) -> str:
        return "{" + ", ".join(sorted(self._render[h] for h in hs)) + "}"

    def _render_structure(self, s: tuple) -> str:
        kind = s[0]
        r = self._render
        if kind is Kind.ATOM:
            return s[1]
        if kind is Kind.ENC:
            return f"enc{{key={r[s[1]]}, plain={self.render_set(s[2])}}}"
        if kind is Kind.NONCE:
            return f"nonce{{seed={r[s[1]]}, id={r[s[2]]}}}"
        if kind in SET_KINDS:
            return kind.value + self.render_set(s[1])
        return f"puf{{{r[s[1]]}}}"

    def set_fields(self, h: int) -> tuple[frozenset[int], ...]:
        t = self._terms[h]
        if t[0] is Kind.ENC:
            return (t[2],)
        if t[0] in SET_KINDS:
            return (t[1],)
        return ()


def _children(s: tuple) -> tuple[int, ...]:
    kind = s[0]
    if kind is Kind.ATOM:
        return ()
    if kind is Kind.ENC:
        return (s[1], *sorted(s[2]))
    if kind is Kind.NONCE:
        return (s[1], s[2])
    if kind in SET_KINDS:
        return tuple(sorted(s[1]))
    return (s[1],)


def family(label: str) -> str:
    """``eps#2`` -> ``eps``; labels without ``#`` are their own family."""
    return label.split("#", 1)[0]
