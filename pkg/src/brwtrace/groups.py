"""Finitely generated groups with easy normal forms and their Cayley graphs.

Three families are supported:

``free:<d>``
    Free group on ``d`` generators; freely reduced words.
``abelian:<d>``
    Free abelian group ``Z^d``; words are sorted exponent vectors.
``zprod:<n1>,<n2>,...``
    Free product of cyclic groups ``Z_{n1} * Z_{n2} * ...``; words alternate
    between factors, one generator per syllable.

Generators are integer indices into ``GroupSpec.generators``. For the free and
free abelian families generator ``2i`` is the ``i``-th basis element and
``2i + 1`` its inverse. For free products every non-trivial element of every
cyclic factor is a generator, so order-2 factors contribute one involution.
"""
from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GroupSpec",
    "GroupElement",
    "GroupSpecError",
    "GroupSpecSyntaxError",
    "GroupSpecValidationError",
    "parse_group_spec",
    "identity",
    "multiply",
    "inverse",
    "neighbors",
    "srw_step",
    "word_length",
    "encode_element",
    "decode_element",
]

_LETTERS = string.ascii_lowercase


class GroupSpecError(ValueError):
    """Base class for presentation-string errors."""


class GroupSpecSyntaxError(GroupSpecError):
    def __init__(self, text: str, position: int, message: str):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position} in {text!r}")


class GroupSpecValidationError(GroupSpecError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class GroupElement:
    """Group element stored as its normal-form word of generator indices."""

    word: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.word)

    @property
    def is_identity(self) -> bool:
        return not self.word


@dataclass(frozen=True)
class GroupSpec:
    family: str
    orders: tuple[int, ...]
    # generator index -> (factor, power); power is +1/-1 for free and abelian
    generators: tuple[tuple[int, int], ...] = field(init=False)
    text: str = field(default="", compare=False)

    def __post_init__(self):
        if self.family in ("free", "abelian"):
            gens = []
            for i in range(len(self.orders)):
                gens.append((i, 1))
                gens.append((i, -1))
        elif self.family == "zprod":
            gens = [(f, k) for f, n in enumerate(self.orders) for k in range(1, n)]
        else:
            raise GroupSpecValidationError("family", f"unknown family {self.family!r}")
        object.__setattr__(self, "generators", tuple(gens))
        object.__setattr__(self, "_index", {g: i for i, g in enumerate(gens)})

    @property
    def rank(self) -> int:
        return len(self.orders)

    @property
    def degree(self) -> int:
        return len(self.generators)

    @property
    def name(self) -> str:
        if self.family == "zprod":
            return "zprod:" + ",".join(str(n) for n in self.orders)
        return f"{self.family}:{self.rank}"

    @property
    def tree_degree(self) -> int | None:
        """Degree ``q`` if the Cayley graph is the homogeneous tree ``T_q``."""
        if self.family == "free":
            return self.degree
        if self.family == "abelian" and self.rank == 1:
            return 2
        if self.family == "zprod" and all(n == 2 for n in self.orders):
            return self.degree
        return None

    def generator_index(self, factor: int, power: int) -> int:
        return self._index[(factor, power)]

    def inverse_generator(self, g: int) -> int:
        f, k = self.generators[g]
        if self.family == "zprod":
            n = self.orders[f]
            return self._index[(f, (n - k) % n)]
        return g ^ 1

    def generator_names(self) -> list[str]:
        return [encode_element(self, GroupElement((g,))) for g in range(self.degree)]

    # word-level operations; words are tuples of generator indices in normal form

    def step(self, word: tuple[int, ...], g: int) -> tuple[int, ...]:
        """Normal form of ``word * g`` for a single generator ``g``."""
        if self.family == "free":
            if word and word[-1] == g ^ 1:
                return word[:-1]
            return word + (g,)
        if self.family == "abelian":
            f = g >> 1
            vec = _abelian_vector(word, self.rank)
            vec[f] += 1 if g % 2 == 0 else -1
            return _abelian_word(vec)
        f, k = self.generators[g]
        if word:
            lf, lk = self.generators[word[-1]]
            if lf == f:
                p = (lk + k) % self.orders[f]
                if p == 0:
                    return word[:-1]
                return word[:-1] + (self._index[(f, p)],)
        return word + (g,)

    def multiply_words(self, a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
        if self.family == "abelian":
            va = _abelian_vector(a, self.rank)
            vb = _abelian_vector(b, self.rank)
            return _abelian_word([x + y for x, y in zip(va, vb)])
        w = a
        for g in b:
            w = self.step(w, g)
        return w

    def reduce_word(self, letters: Iterable[int]) -> tuple[int, ...]:
        w: tuple[int, ...] = ()
        for g in letters:
            if not 0 <= g < self.degree:
                raise GroupSpecValidationError("word", f"generator index {g} out of range")
            w = self.step(w, g)
        return w


def _abelian_vector(word: Sequence[int], rank: int) -> list[int]:
    vec = [0] * rank
    for g in word:
        vec[g >> 1] += 1 if g % 2 == 0 else -1
    return vec


def _abelian_word(vec: Sequence[int]) -> tuple[int, ...]:
    out: list[int] = []
    for i, e in enumerate(vec):
        if e > 0:
            out.extend([2 * i] * e)
        elif e < 0:
            out.extend([2 * i + 1] * (-e))
    return tuple(out)


_GRAMMAR = re.compile(r"(free|abelian|zprod):")


def parse_group_spec(text: str) -> GroupSpec:
    """Parse ``free:<d>``, ``abelian:<d>`` or ``zprod:<n1>,<n2>,...``.

    Raises
    ------
    GroupSpecSyntaxError
        The text does not match the grammar; carries the character position.
    GroupSpecValidationError
        Rank or order below its minimum.
    """
    s = text.strip()
    offset = len(text) - len(text.lstrip())
    m = _GRAMMAR.match(s)
    if m is None:
        raise GroupSpecSyntaxError(text, offset, "expected 'free:', 'abelian:' or 'zprod:'")
    family = m.group(1)
    pos = m.end()
    body = s[pos:]
    if not body:
        raise GroupSpecSyntaxError(text, offset + pos, "expected an integer")
    numbers: list[int] = []
    for chunk in body.split(","):
        if not chunk.isdigit():
            bad = next((i for i, c in enumerate(chunk) if not c.isdigit()), 0)
            raise GroupSpecSyntaxError(text, offset + pos + bad, "expected an integer")
        numbers.append(int(chunk))
        pos += len(chunk) + 1

    if family in ("free", "abelian"):
        if len(numbers) != 1:
            raise GroupSpecSyntaxError(text, offset + m.end() + len(body.split(",")[0]),
                                       "rank takes a single integer")
        d = numbers[0]
        if d < 1:
            raise GroupSpecValidationError("rank", f"rank must be >= 1, got {d}")
        if d > len(_LETTERS):
            raise GroupSpecValidationError("rank", f"rank {d} exceeds {len(_LETTERS)}")
        return GroupSpec(family, (1,) * d, text=text)

    if len(numbers) < 2:
        raise GroupSpecValidationError("orders", "free product needs at least 2 factors")
    for n in numbers:
        if n < 2:
            raise GroupSpecValidationError("orders", f"cyclic order must be >= 2, got {n}")
    if len(numbers) > len(_LETTERS):
        raise GroupSpecValidationError("orders", f"more than {len(_LETTERS)} factors")
    return GroupSpec(family, tuple(numbers), text=text)


def identity(spec: GroupSpec) -> GroupElement:
    return GroupElement(())


def multiply(spec: GroupSpec, a: GroupElement, b: GroupElement) -> GroupElement:
    return GroupElement(spec.multiply_words(a.word, b.word))


def inverse(spec: GroupSpec, x: GroupElement) -> GroupElement:
    if spec.family == "abelian":
        return GroupElement(_abelian_word([-e for e in _abelian_vector(x.word, spec.rank)]))
    return GroupElement(tuple(spec.inverse_generator(g) for g in reversed(x.word)))


def word_length(spec: GroupSpec, x: GroupElement) -> int:
    """Cayley-graph distance to the identity (normal forms are geodesic)."""
    return len(x.word)


def neighbors(spec: GroupSpec, x: GroupElement) -> list[GroupElement]:
    """All ``x * s`` for generators ``s``, in generator order, deduplicated."""
    seen: dict[tuple[int, ...], None] = {}
    for g in range(spec.degree):
        seen.setdefault(spec.step(x.word, g), None)
    return [GroupElement(w) for w in seen]


def srw_step(spec: GroupSpec, x: GroupElement, rng: np.random.Generator) -> GroupElement:
    """One step of simple random walk: right-multiply by a uniform generator."""
    g = int(rng.integers(spec.degree))
    return GroupElement(spec.step(x.word, g))


def encode_element(spec: GroupSpec, x: GroupElement) -> str:
    """Dot-separated generator names; uppercase is inverse, ``e`` is identity.

    Free-product syllables of power ``k > 1`` are written ``a^k``.
    """
    if not x.word:
        return "e"
    parts = []
    for g in x.word:
        f, k = spec.generators[g]
        letter = _LETTERS[f]
        if spec.family == "zprod":
            parts.append(letter if k == 1 else f"{letter}^{k}")
        else:
            parts.append(letter if k == 1 else letter.upper())
    return ".".join(parts)


def decode_element(spec: GroupSpec, text: str) -> GroupElement:
    if text == "e":
        return GroupElement(())
    letters = []
    for part in text.split("."):
        if spec.family == "zprod":
            name, _, power = part.partition("^")
            f = _LETTERS.find(name)
            k = int(power) if power else 1
            if f < 0 or f >= spec.rank or not 0 < k < spec.orders[f]:
                raise GroupSpecValidationError("element", f"bad syllable {part!r}")
            letters.append(spec.generator_index(f, k))
        else:
            f = _LETTERS.find(part.lower())
            if len(part) != 1 or f < 0 or f >= spec.rank:
                raise GroupSpecValidationError("element", f"bad letter {part!r}")
            letters.append(2 * f + (0 if part.islower() else 1))
    return GroupElement(spec.reduce_word(letters))
