"""Finite probability spaces with exact rational weights.

Every space carries the power-set sigma-field, so sigma-fields are never
materialized: generated sigma-fields are represented by atom partitions.
Zero-weight outcomes are allowed and every comparison of morphisms is taken
up to null sets (``equal_ae``).

Product spaces are indexed row-major (last factor fastest). A nested
product such as (A x B) x C and the flat product A x B x C therefore share
the same outcome indices, so the canonical flattening bijection is the
identity on indices; morphisms between them are compared through
``same_indexing`` rather than by outcome labels.

Rational literals serialize as "p/q" (q > 0, gcd(p, q) = 1) or as integers.
"""
from __future__ import annotations

import itertools
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import MeasureError

Outcome = Hashable
Table = Tuple[int, ...]
RationalLike = Union[Fraction, int, str]

_RATIONAL_RE = re.compile(r"^\s*(-?\d+)\s*(?:/\s*(\d+)\s*)?$")


# ---------- Rational literals ----------

def parse_rational(value: RationalLike) -> Fraction:
    """Parse an exact rational literal.

    Args:
        value: A Fraction, an int, or a string "p/q" / "p" in lowest terms.

    Returns:
        The Fraction.

    Raises:
        MeasureError: For floats, malformed strings, zero denominators and
            fractions not in lowest terms.
    """
    if isinstance(value, bool):
        raise MeasureError(f"not a rational literal: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if not isinstance(value, str):
        raise MeasureError(f"rationals must be written as 'p/q' strings, got {value!r}")
    match = _RATIONAL_RE.match(value)
    if not match:
        raise MeasureError(f"malformed rational literal {value!r}")
    num = int(match.group(1))
    if match.group(2) is None:
        return Fraction(num)
    den = int(match.group(2))
    if den == 0:
        raise MeasureError(f"zero denominator in {value!r}")
    if math.gcd(num, den) != 1:
        raise MeasureError(f"rational literal {value!r} is not in lowest terms")
    return Fraction(num, den)


def format_rational(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


# ---------- Spaces ----------

@dataclass(frozen=True)
class FinProbSpace:
    """Finite sample space with exact weights.

    Attributes:
        outcomes: Distinct outcome labels; product spaces use tuples.
        weights: One non-negative Fraction per outcome, summing to 1.
        factors: Factor spaces when built by ``product``; empty otherwise.
            Not part of equality.
    """

    outcomes: Tuple[Outcome, ...]
    weights: Tuple[Fraction, ...]
    factors: Tuple["FinProbSpace", ...] = field(default=(), compare=False, repr=False)
    _index: Dict[Outcome, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        outcomes = tuple(self.outcomes)
        weights = tuple(parse_rational(w) for w in self.weights)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "weights", weights)
        if not outcomes:
            raise MeasureError("a probability space needs at least one outcome")
        if len(outcomes) != len(weights):
            raise MeasureError(f"{len(outcomes)} outcomes but {len(weights)} weights")
        if len(set(outcomes)) != len(outcomes):
            raise MeasureError("outcome labels must be distinct")
        negative = [o for o, w in zip(outcomes, weights) if w < 0]
        if negative:
            raise MeasureError(f"negative weight on {negative[0]!r}")
        total = sum(weights, Fraction(0))
        if total != 1:
            raise MeasureError(f"weights sum to {format_rational(total)}, expected 1")
        self._index.update({o: i for i, o in enumerate(outcomes)})

    @classmethod
    def uniform(cls, outcomes: Iterable[Outcome]) -> "FinProbSpace":
        outcomes = tuple(outcomes)
        return cls(outcomes, tuple(Fraction(1, len(outcomes)) for _ in outcomes))

    @classmethod
    def dirac(cls, outcomes: Iterable[Outcome], point: Outcome) -> "FinProbSpace":
        outcomes = tuple(outcomes)
        return cls(outcomes, tuple(Fraction(int(o == point)) for o in outcomes))

    @classmethod
    def point(cls, label: Outcome = "*") -> "FinProbSpace":
        return cls((label,), (Fraction(1),))

    @property
    def size(self) -> int:
        return len(self.outcomes)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Factor sizes for row-major indexing; ``(size,)`` for atomic spaces."""
        if self.factors:
            return tuple(f.size for f in self.factors)
        return (self.size,)

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(i for i, w in enumerate(self.weights) if w > 0)

    def index(self, outcome: Outcome) -> int:
        try:
            return self._index[outcome]
        except KeyError:
            raise MeasureError(f"unknown outcome {outcome!r}") from None

    def weight(self, outcome: Outcome) -> Fraction:
        return self.weights[self.index(outcome)]

    def law(self) -> Dict[Outcome, Fraction]:
        return dict(zip(self.outcomes, self.weights))

    def mass(self, indices: Iterable[int]) -> Fraction:
        return sum((self.weights[i] for i in set(indices)), Fraction(0))


def same_indexing(first: FinProbSpace, second: FinProbSpace) -> bool:
    """Same size and weights index by index; outcome labels are not compared.

    A nested product (A x B) x C and the flat A x B x C pass, as do two
    spaces whose labels differ outright.
    """
    return first.size == second.size and first.weights == second.weights


def product(spaces: Sequence[FinProbSpace]) -> FinProbSpace:
    """Product space, outcomes as tuples, component order preserved.

    Raises:
        MeasureError: On an empty sequence.
    """
    spaces = tuple(spaces)
    if not spaces:
        raise MeasureError("product of an empty sequence of spaces")
    outcomes = tuple(itertools.product(*(s.outcomes for s in spaces)))
    weights = tuple(math.prod(ws, start=Fraction(1)) for ws in itertools.product(*(s.weights for s in spaces)))
    return FinProbSpace(outcomes, weights, factors=spaces)


def pushforward(table: Sequence[int], mu: FinProbSpace, size: int) -> Tuple[Fraction, ...]:
    """Image weights: weight(y) = sum of weight(x) over x with T(x) = y."""
    out = [Fraction(0)] * size
    for x, y in enumerate(table):
        out[y] += mu.weights[x]
    return tuple(out)


def is_measure_preserving(table: Sequence[int], mu: FinProbSpace, nu: FinProbSpace) -> bool:
    return len(table) == mu.size and pushforward(table, mu, nu.size) == nu.weights


# ---------- Morphisms ----------

@dataclass(frozen=True)
class ProbMorphism:
    """Map between finite spaces, stored as an index table.

    Construction does not enforce measure preservation so that diagnostics
    can report broken maps; use ``is_measure_preserving`` or
    ``require_measure_preserving``.
    """

    domain: FinProbSpace
    codomain: FinProbSpace
    table: Table

    def __post_init__(self) -> None:
        table = tuple(int(y) for y in self.table)
        object.__setattr__(self, "table", table)
        if len(table) != self.domain.size:
            raise MeasureError(f"map table has {len(table)} entries for {self.domain.size} outcomes")
        if table and (min(table) < 0 or max(table) >= self.codomain.size):
            raise MeasureError("map table points outside the codomain")

    @classmethod
    def from_function(cls, domain: FinProbSpace, codomain: FinProbSpace, fn) -> "ProbMorphism":
        """Build from an outcome-level function."""
        return cls(domain, codomain, tuple(codomain.index(fn(o)) for o in domain.outcomes))

    def __call__(self, index: int) -> int:
        return self.table[index]

    def apply(self, outcome: Outcome) -> Outcome:
        return self.codomain.outcomes[self.table[self.domain.index(outcome)]]

    def pushforward(self) -> Tuple[Fraction, ...]:
        return pushforward(self.table, self.domain, self.codomain.size)

    @property
    def is_measure_preserving(self) -> bool:
        return self.pushforward() == self.codomain.weights

    def require_measure_preserving(self, what: str = "map") -> "ProbMorphism":
        witness = measure_preservation_witness(self)
        if witness is not None:
            raise MeasureError(
                f"{what} is not measure-preserving at {self.codomain.outcomes[witness.index]!r}: "
                f"image mass {format_rational(witness.actual)}, expected {format_rational(witness.expected)}"
            )
        return self

    def with_entry(self, index: int, value: int) -> "ProbMorphism":
        """Copy with one table entry replaced (used for mutation tests)."""
        table = list(self.table)
        table[index] = value
        return ProbMorphism(self.domain, self.codomain, tuple(table))


class MassWitness(NamedTuple):
    index: int
    expected: Fraction
    actual: Fraction


def measure_preservation_witness(morphism: ProbMorphism) -> Optional[MassWitness]:
    """First codomain outcome whose image mass is wrong, or None."""
    for y, (got, want) in enumerate(zip(morphism.pushforward(), morphism.codomain.weights)):
        if got != want:
            return MassWitness(y, want, got)
    return None


def first_disagreement(first: ProbMorphism, second: ProbMorphism) -> Optional[int]:
    """First positive-weight domain index where the maps differ, or None.

    Raises:
        MeasureError: If the maps do not share domain and codomain up to indexing.
    """
    if not same_indexing(first.domain, second.domain) or not same_indexing(first.codomain, second.codomain):
        raise MeasureError("equal_ae needs maps with the same domain and codomain")
    for x in first.domain.support:
        if first.table[x] != second.table[x]:
            return x
    return None


def equal_ae(first: ProbMorphism, second: ProbMorphism) -> bool:
    """Equality outside a set of measure zero."""
    return first_disagreement(first, second) is None


def identity(space: FinProbSpace) -> ProbMorphism:
    return ProbMorphism(space, space, tuple(range(space.size)))


def compose(outer: ProbMorphism, inner: ProbMorphism) -> ProbMorphism:
    """outer o inner (inner applied first)."""
    if not same_indexing(inner.codomain, outer.domain):
        raise MeasureError(
            f"cannot compose: codomain of size {inner.codomain.size} does not match domain of size {outer.domain.size}"
        )
    return ProbMorphism(inner.domain, outer.codomain, tuple(outer.table[y] for y in inner.table))


def compose_all(*maps: ProbMorphism) -> ProbMorphism:
    """maps[0] o maps[1] o ... o maps[-1]."""
    result = maps[-1]
    for outer in reversed(maps[:-1]):
        result = compose(outer, result)
    return result


def product_morphism(
    maps: Sequence[ProbMorphism],
    domain: Optional[FinProbSpace] = None,
    codomain: Optional[FinProbSpace] = None,
) -> ProbMorphism:
    """T_1 x ... x T_n acting componentwise on row-major product indices.

    Args:
        maps: Factor morphisms.
        domain: Space to use as domain; defaults to the product of the factor
            domains. Must be index-compatible with it.
        codomain: Likewise for the codomain.
    """
    maps = tuple(maps)
    if not maps:
        raise MeasureError("product of an empty sequence of maps")
    natural_domain = product([m.domain for m in maps]) if domain is None or codomain is None else None
    dom = domain if domain is not None else natural_domain
    cod = codomain if codomain is not None else product([m.codomain for m in maps])
    in_shape = tuple(m.domain.size for m in maps)
    out_shape = tuple(m.codomain.size for m in maps)
    if dom.size != math.prod(in_shape) or cod.size != math.prod(out_shape):
        raise MeasureError("product map does not fit the given domain/codomain")
    components = np.unravel_index(np.arange(dom.size), in_shape)
    images = [np.asarray(m.table, dtype=np.int64)[c] for m, c in zip(maps, components)]
    table = np.ravel_multi_index(images, out_shape)
    return ProbMorphism(dom, cod, tuple(int(y) for y in table))


def coordinate_projection(
    space: FinProbSpace,
    keep: Sequence[int],
    codomain: Optional[FinProbSpace] = None,
    shape: Optional[Sequence[int]] = None,
) -> ProbMorphism:
    """Projection of a product space onto the factors at positions ``keep``.

    Args:
        space: Product space (or any space when ``shape`` is given).
        keep: Factor positions, in the order they appear in the codomain.
        codomain: Target space; defaults to the kept factor (one position) or
            the product of the kept factors.
        shape: Factor sizes, when ``space`` does not record its factors.
    """
    shape = tuple(shape) if shape is not None else space.shape
    if math.prod(shape) != space.size:
        raise MeasureError(f"shape {shape} does not index a space of size {space.size}")
    keep = tuple(keep)
    if codomain is None:
        if not space.factors:
            raise MeasureError("codomain required for a space without recorded factors")
        kept = [space.factors[k] for k in keep]
        codomain = kept[0] if len(kept) == 1 else product(kept)
    components = np.unravel_index(np.arange(space.size), shape)
    table = np.ravel_multi_index([components[k] for k in keep], tuple(shape[k] for k in keep))
    return ProbMorphism(space, codomain, tuple(int(y) for y in table))


def is_isomorphism(morphism: ProbMorphism) -> bool:
    """Mod-0 isomorphism: measure-preserving and a bijection between supports."""
    if not morphism.is_measure_preserving:
        return False
    image = [morphism.table[x] for x in morphism.domain.support]
    return len(set(image)) == len(image) and set(image) == set(morphism.codomain.support)


def inverse_on_support(morphism: ProbMorphism) -> ProbMorphism:
    """Mod-0 inverse of an isomorphism.

    Zero-mass codomain outcomes go to their first preimage, or to outcome 0
    when they have none.

    Raises:
        MeasureError: If the morphism is not an isomorphism.
    """
    if not is_isomorphism(morphism):
        raise MeasureError("only isomorphisms have an inverse on supports")
    back: Dict[int, int] = {}
    for x in morphism.domain.support:
        back[morphism.table[x]] = x
    for x, y in enumerate(morphism.table):
        back.setdefault(y, x)
    table = tuple(back.get(y, 0) for y in range(morphism.codomain.size))
    return ProbMorphism(morphism.codomain, morphism.domain, table)


def is_surjective_on_support(morphism: ProbMorphism) -> bool:
    """Every positive-weight codomain outcome has a preimage."""
    image = set(morphism.table)
    return all(y in image for y in morphism.codomain.support)


# ---------- Independence and generated sigma-fields ----------

Mapish = Union[ProbMorphism, Sequence[int]]


def _table(m: Mapish) -> Sequence[int]:
    return m.table if isinstance(m, ProbMorphism) else m


class IndependenceWitness(NamedTuple):
    values: Tuple[int, ...]
    joint: Fraction
    product: Fraction


def independence_witness(maps: Sequence[Mapish], space: FinProbSpace) -> Optional[IndependenceWitness]:
    """First cell where the joint law differs from the product of marginals."""
    tables = [_table(m) for m in maps]
    if len(tables) < 2:
        return None
    joint: Dict[Tuple[int, ...], Fraction] = defaultdict(Fraction)
    marginals: List[Dict[int, Fraction]] = [defaultdict(Fraction) for _ in tables]
    for x, w in enumerate(space.weights):
        if w == 0:
            continue
        cell = tuple(t[x] for t in tables)
        joint[cell] += w
        for k, v in enumerate(cell):
            marginals[k][v] += w
    for cell in itertools.product(*(sorted(m) for m in marginals)):
        expected = math.prod((marginals[k][v] for k, v in enumerate(cell)), start=Fraction(1))
        got = joint.get(cell, Fraction(0))
        if got != expected:
            return IndependenceWitness(cell, got, expected)
    return None


def independent(maps: Sequence[Mapish], space: FinProbSpace) -> bool:
    """Exact independence of random variables defined on one space."""
    return independence_witness(maps, space) is None


@dataclass(frozen=True)
class AtomPartition:
    """Blocks of domain indices sharing the same joint values."""

    space: FinProbSpace
    blocks: Tuple[Tuple[int, ...], ...]

    def merged_support_block(self) -> Optional[Tuple[int, ...]]:
        """A block holding two or more positive-weight outcomes, if any."""
        for block in self.blocks:
            if sum(1 for x in block if self.space.weights[x] > 0) > 1:
                return block
        return None

    @property
    def separates_support(self) -> bool:
        """True iff the generated sigma-field is the power set of the support."""
        return self.merged_support_block() is None


def atoms(maps: Sequence[Mapish], space: FinProbSpace) -> AtomPartition:
    """Atoms of the sigma-field generated by ``maps`` (joint fibers)."""
    tables = [_table(m) for m in maps]
    groups: Dict[Tuple[int, ...], List[int]] = {}
    for x in range(space.size):
        groups.setdefault(tuple(t[x] for t in tables), []).append(x)
    return AtomPartition(space, tuple(tuple(block) for block in groups.values()))
