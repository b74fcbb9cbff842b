"""Finite linearly ordered time sets and partitions of their intervals.

A ``TimeSet`` is a sequence of opaque labels ordered by position. A
``Partition`` is a strictly increasing vector of positions into one time
set; the first and last points are its endpoints (s, t), which makes it a
member of the poset K_{s,t}. Without fixing endpoints, the same values
form the poset K of all finite subsets with at least two points.

The two refinement decompositions used everywhere else live here:

    decompose_blocks(I, J)   J = I_0 u I_1 u ... u I_m   (I, J in K_{s,t})
    decompose_lcr(I, J)      J = I_L u I~ u I_R          (I in K_{s,t}, J in K)

Consecutive blocks share exactly one point; ``merge_blocks`` undoes
``decompose_blocks`` using that convention.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from .errors import PartitionError

Label = str
Window = Tuple[int, int]


@dataclass(frozen=True)
class TimeSet:
    """Finite linearly ordered set of time labels.

    Attributes:
        labels: Distinct labels; the order is the declaration order, never
            the lexicographic order of the strings.
    """

    labels: Tuple[Label, ...]
    _positions: Dict[Label, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        labels = tuple(str(label) for label in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            dupes = sorted({label for label in labels if labels.count(label) > 1})
            raise PartitionError(f"time labels must be distinct, repeated: {dupes}")
        if len(labels) < 2:
            raise PartitionError("a time set needs at least 2 labels")
        self._positions.update({label: i for i, label in enumerate(labels)})

    @classmethod
    def of(cls, *labels: Union[str, int]) -> "TimeSet":
        """Build a time set from positional labels, e.g. ``TimeSet.of(0, 1, 2)``."""
        return cls(tuple(str(label) for label in labels))

    @classmethod
    def range(cls, n: int) -> "TimeSet":
        """Time set with labels ``"0" .. str(n-1)``."""
        return cls(tuple(str(i) for i in range(n)))

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: Union[Label, int]) -> int:
        """Position of a label.

        Raises:
            PartitionError: If the label is not part of this time set.
        """
        try:
            return self._positions[str(label)]
        except KeyError:
            raise PartitionError(f"unknown time label {label!r}") from None

    def label(self, index: int) -> Label:
        return self.labels[index]

    def partition(self, labels: Iterable[Union[Label, int]]) -> "Partition":
        """Partition through the given labels (any order, duplicates ignored)."""
        return Partition(self, tuple(sorted({self.index(label) for label in labels})))

    def grid(self, s: Optional[int] = None, t: Optional[int] = None) -> "Partition":
        """Full grid on [s, t] (positions); the whole set when both are None."""
        lo = 0 if s is None else s
        hi = len(self) - 1 if t is None else t
        return Partition(self, tuple(range(lo, hi + 1)))

    def pair(self, s: int, t: int) -> "Partition":
        """Trivial partition {s, t} (positions)."""
        return Partition(self, (s, t))

    def windows(self) -> List[Window]:
        """All position pairs (s, t) with s < t, in lexicographic order."""
        return list(itertools.combinations(range(len(self)), 2))

    def triples(self) -> List[Tuple[int, int, int]]:
        return list(itertools.combinations(range(len(self)), 3))

    def quadruples(self) -> List[Tuple[int, int, int, int]]:
        return list(itertools.combinations(range(len(self)), 4))

    def subset(self, labels: Iterable[Union[Label, int]]) -> "TimeSet":
        """Sub time set carrying the induced order."""
        keep = sorted({self.index(label) for label in labels})
        return TimeSet(tuple(self.labels[i] for i in keep))

    def describe(self, *positions: int) -> str:
        return "(" + ",".join(self.labels[p] for p in positions) + ")"


@dataclass(frozen=True)
class Partition:
    """Finite partition of an interval, stored as sorted positions.

    Attributes:
        times: Owning time set.
        points: Strictly increasing positions; ``points[0]`` and
            ``points[-1]`` are the endpoints (s, t).
    """

    times: TimeSet
    points: Tuple[int, ...]

    def __post_init__(self) -> None:
        points = tuple(int(p) for p in self.points)
        object.__setattr__(self, "points", points)
        if len(points) < 2:
            raise PartitionError(f"a partition needs at least 2 points, got {points}")
        if any(b <= a for a, b in zip(points, points[1:])):
            raise PartitionError(f"partition points must be strictly increasing, got {points}")
        if points[0] < 0 or points[-1] >= len(self.times):
            raise PartitionError(f"partition points {points} fall outside the time set")

    @property
    def start(self) -> int:
        return self.points[0]

    @property
    def end(self) -> int:
        return self.points[-1]

    @property
    def window(self) -> Window:
        return (self.points[0], self.points[-1])

    @property
    def labels(self) -> Tuple[Label, ...]:
        return tuple(self.times.labels[p] for p in self.points)

    @property
    def cells(self) -> Tuple[Window, ...]:
        """Adjacent pairs (iota_k, iota_{k+1}); the factors of Omega_I."""
        return tuple(zip(self.points, self.points[1:]))

    @property
    def is_trivial(self) -> bool:
        return len(self.points) == 2

    def issubset(self, other: "Partition") -> bool:
        _same_times(self, other)
        return set(self.points) <= set(other.points)

    def __contains__(self, position: int) -> bool:
        return position in self.points

    def __len__(self) -> int:
        return len(self.points)

    def __str__(self) -> str:
        return "{" + ",".join(self.labels) + "}"


@dataclass(frozen=True)
class PairWindow:
    """Ordered pair (s, t) with s <= t, ordered by nesting.

    Degenerate windows (s == t) are allowed as values.
    """

    times: TimeSet
    s: int
    t: int

    def __post_init__(self) -> None:
        if self.s > self.t:
            raise PartitionError(f"window needs s <= t, got ({self.s}, {self.t})")

    def within(self, other: "PairWindow") -> bool:
        """True iff (s, t) is nested in (u, v), i.e. u <= s <= t <= v."""
        return other.s <= self.s and self.t <= other.t

    def __str__(self) -> str:
        return self.times.describe(self.s, self.t)


class LcrDecomposition(NamedTuple):
    """J = I_L u I~ u I_R; left and right are position tuples, middle a partition."""

    left: Tuple[int, ...]
    middle: Partition
    right: Tuple[int, ...]


def _same_times(first: Partition, second: Partition) -> None:
    if first.times != second.times:
        raise PartitionError("partitions belong to different time sets")


def refines(small: Partition, big: Partition) -> bool:
    """Order of K_{s,t}: ``big`` refines ``small``.

    Args:
        small: Coarser partition I.
        big: Candidate refinement J.

    Returns:
        True iff I is a subset of J and both have the same endpoints.

    Raises:
        PartitionError: If the partitions belong to different time sets.
    """
    _same_times(small, big)
    return small.window == big.window and set(small.points) <= set(big.points)


def decompose_blocks(small: Partition, big: Partition) -> List[Partition]:
    """Split a refinement J of I into the blocks I_k = J n [iota_k, iota_{k+1}].

    Raises:
        PartitionError: If ``big`` does not refine ``small``.
    """
    if not refines(small, big):
        raise PartitionError(f"{big} is not a refinement of {small}")
    return [
        Partition(big.times, tuple(j for j in big.points if a <= j <= b))
        for a, b in small.cells
    ]


def merge_blocks(blocks: Sequence[Partition]) -> Partition:
    """Concatenate blocks that chain at shared endpoints."""
    if not blocks:
        raise PartitionError("nothing to merge")
    points: List[int] = list(blocks[0].points)
    for block in blocks[1:]:
        _same_times(blocks[0], block)
        if block.start != points[-1]:
            raise PartitionError(f"block {block} does not start where the previous one ends")
        points.extend(block.points[1:])
    return Partition(blocks[0].times, tuple(points))


def decompose_lcr(small: Partition, big: Partition) -> LcrDecomposition:
    """Write J in K as I_L u I~ u I_R relative to I in K_{s,t}.

    I_L = {j <= s}, I_R = {j >= t} and I~ = J n [s, t], which refines I.

    Raises:
        PartitionError: If I is not contained in J.
    """
    if not small.issubset(big):
        raise PartitionError(f"{small} is not contained in {big}")
    s, t = small.window
    return LcrDecomposition(
        left=tuple(j for j in big.points if j <= s),
        middle=Partition(big.times, tuple(j for j in big.points if s <= j <= t)),
        right=tuple(j for j in big.points if j >= t),
    )


def split_at(partition: Partition, position: int) -> Tuple[Partition, Partition]:
    """Order isomorphism K_{r,s,t} -> K_{r,s} x K_{s,t}: I -> (I_s, _sI)."""
    if position not in partition or position in partition.window:
        raise PartitionError(f"{partition.times.label(position)} is not an interior point of {partition}")
    return (
        Partition(partition.times, tuple(p for p in partition.points if p <= position)),
        Partition(partition.times, tuple(p for p in partition.points if p >= position)),
    )


@dataclass(frozen=True)
class PartitionPoset:
    """A finite poset of partitions ordered by inclusion, with its maximum."""

    members: Tuple[Partition, ...]
    maximum: Partition

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Partition]:
        return iter(self.members)

    def upper_sets(self) -> Dict[Partition, List[Partition]]:
        return {m: [b for b in self.members if m.issubset(b)] for m in self.members}

    def pairs(self) -> Iterator[Tuple[Partition, Partition]]:
        """All comparable pairs I <= J (reflexive pairs included)."""
        ups = self.upper_sets()
        for small in self.members:
            for big in ups[small]:
                yield small, big

    def chains(self) -> Iterator[Tuple[Partition, Partition, Partition]]:
        """All chains I <= J <= K."""
        ups = self.upper_sets()
        for first in self.members:
            for second in ups[first]:
                for third in ups[second]:
                    yield first, second, third


def _poset(members: Iterable[Partition], maximum: Partition) -> PartitionPoset:
    ordered = tuple(sorted(members, key=lambda p: (len(p.points), p.points)))
    return PartitionPoset(ordered, maximum)


def enumerate_K(times: TimeSet, window: Optional[Tuple[Union[Label, int], Union[Label, int]]] = None) -> PartitionPoset:
    """Materialize K_{s,t} (window given) or K (window None).

    Args:
        times: The time set.
        window: Endpoint labels (s, t) with s < t, or None for all of K.

    Returns:
        The poset, members sorted by size then positions, with the full grid
        as its maximum.
    """
    if window is None:
        members = [
            Partition(times, combo)
            for size in range(2, len(times) + 1)
            for combo in itertools.combinations(range(len(times)), size)
        ]
        return _poset(members, times.grid())
    s, t = times.index(window[0]), times.index(window[1])
    if s >= t:
        raise PartitionError(f"window needs s < t, got {times.describe(s, t)}")
    return partitions_through(times, s, t, ())


def partitions_through(times: TimeSet, s: int, t: int, through: Iterable[int]) -> PartitionPoset:
    """Members of K_{s,t} containing every position in ``through``.

    With one interior point this is K_{r,s,t}; with two it is K_{r,s,t,u}.
    Both are cofinal in K_{s,t}.
    """
    fixed = sorted(set(through))
    if any(not s < p < t for p in fixed):
        raise PartitionError(f"points {fixed} are not interior to {times.describe(s, t)}")
    free = [p for p in range(s + 1, t) if p not in fixed]
    members = [
        Partition(times, tuple(sorted((s, t, *fixed, *extra))))
        for size in range(len(free) + 1)
        for extra in itertools.combinations(free, size)
    ]
    return _poset(members, times.grid(s, t))
