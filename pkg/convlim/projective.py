"""Partition-indexed connecting maps and their finite projective limits.

Two families are built from a convolution system:

    T_{I,J}: Omega_J -> Omega_I   for I <= J in K_{s,t} (same endpoints)
    X_{I,J}: Omega_J -> Omega_I   for I <= J in K (all finite subsets)

T is built by the refinement recursion: the identity when I = J, the
right-peeling recursion when I is trivial, and the blockwise product over
``decompose_blocks`` otherwise. X projects Omega_J onto the cells of J
inside the window of I and then applies T.

Both posets have a maximum (the full grid), so a projective limit is
realized as the top space with projections morphism(I, top). The
set-level thread construction is kept as a cross-check for tiny
instances.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from .convsys import ConvolutionSystem, check_system
from .errors import PartitionError, SystemConstructionError
from .finprob import (
    FinProbSpace,
    ProbMorphism,
    compose,
    coordinate_projection,
    first_disagreement,
    format_rational,
    identity,
    is_surjective_on_support,
    measure_preservation_witness,
    product_morphism,
    same_indexing,
)
from .order_partition import (
    Partition,
    PartitionPoset,
    TimeSet,
    Window,
    decompose_blocks,
    decompose_lcr,
    enumerate_K,
    refines,
)
from .protocols import CheckResult, Witness

logger = logging.getLogger(__name__)

# ---------- Configuration Constants ----------

# Upper bound on |poset| * |Omega_top| for the set-level thread construction.
THREAD_CHECK_LIMIT = 4096

PairKey = Tuple[Tuple[int, ...], Tuple[int, ...]]


# ---------- Connecting maps ----------

class TBuilder:
    """Memoized construction of T_{I,J} over one system."""

    def __init__(self, sys: ConvolutionSystem):
        self.sys = sys
        self._cache: Dict[PairKey, ProbMorphism] = {}

    def T(self, small: Partition, big: Partition) -> ProbMorphism:
        if not refines(small, big):
            raise PartitionError(f"{big} does not refine {small}")
        key = (small.points, big.points)
        found = self._cache.get(key)
        if found is None:
            found = self._build(small, big)
            self._cache[key] = found
        return found

    def _build(self, small: Partition, big: Partition) -> ProbMorphism:
        sys = self.sys
        omega_big = sys.partition_space(big)
        omega_small = sys.partition_space(small)
        if small.points == big.points:
            return identity(omega_small)
        if small.is_trivial:
            points = big.points
            j0, jn, last = points[0], points[-2], points[-1]
            mult = sys.mult(j0, jn, last)
            if len(points) == 3:
                return ProbMorphism(omega_big, omega_small, mult.table)
            head = Partition(big.times, points[:-1])
            inner = self.T(big.times.pair(j0, jn), head)
            lifted = product_morphism(
                [inner, identity(sys.space(jn, last))],
                domain=omega_big,
                codomain=mult.domain,
            )
            return compose(ProbMorphism(mult.domain, omega_small, mult.table), lifted)
        blocks = decompose_blocks(small, big)
        maps = [self.T(big.times.pair(*cell), block) for cell, block in zip(small.cells, blocks)]
        return product_morphism(maps, domain=omega_big, codomain=omega_small)

    def X(self, small: Partition, big: Partition) -> ProbMorphism:
        """X_{I,J} = T_{I,I~} o pi_{I~,J}; equals T_{I,J} on a shared window."""
        if small.window == big.window:
            return self.T(small, big)
        middle = decompose_lcr(small, big).middle
        return compose(self.T(small, middle), window_projection(self.sys, big, *small.window))


def window_projection(sys: ConvolutionSystem, partition: Partition, s: int, t: int) -> ProbMorphism:
    """Coordinate projection Omega_J -> Omega_{J n [s, t]} (s, t in J)."""
    if s not in partition or t not in partition or s >= t:
        raise PartitionError(f"{partition.times.describe(s, t)} is not a window of {partition}")
    sub = Partition(partition.times, tuple(p for p in partition.points if s <= p <= t))
    keep = [k for k, (a, b) in enumerate(partition.cells) if s <= a and b <= t]
    shape = [sys.space(a, b).size for a, b in partition.cells]
    return coordinate_projection(sys.partition_space(partition), keep, codomain=sys.partition_space(sub), shape=shape)


def build_T(small: Partition, big: Partition, sys: ConvolutionSystem) -> ProbMorphism:
    """T_{I,J}: Omega_J -> Omega_I.

    Raises:
        PartitionError: If ``big`` does not refine ``small``.
    """
    return TBuilder(sys).T(small, big)


def build_X(small: Partition, big: Partition, sys: ConvolutionSystem) -> ProbMorphism:
    """X_{I,J}: Omega_J -> Omega_I for I contained in J.

    Raises:
        PartitionError: If ``small`` is not contained in ``big``.
    """
    return TBuilder(sys).X(small, big)


def fold_oracle(small: Partition, big: Partition, sys: ConvolutionSystem) -> ProbMorphism:
    """T_{I,J} evaluated by folding each block left to right."""
    if not refines(small, big):
        raise PartitionError(f"{big} does not refine {small}")
    omega_big = sys.partition_space(big)
    shape = [sys.space(a, b).size for a, b in big.cells]
    out_shape = [sys.space(a, b).size for a, b in small.cells]
    components = np.unravel_index(np.arange(omega_big.size), shape)
    columns = [c.tolist() for c in components]
    cells = big.cells
    table = []
    for x in range(omega_big.size):
        values = []
        k = 0
        for a, b in small.cells:
            start = cells[k][0]
            acc = columns[k][x]
            end = cells[k][1]
            k += 1
            while end < b:
                acc = sys.multiply(start, end, cells[k][1], acc, columns[k][x])
                end = cells[k][1]
                k += 1
            values.append(acc)
        table.append(int(np.ravel_multi_index(values, out_shape)) if len(values) > 1 else values[0])
    return ProbMorphism(omega_big, sys.partition_space(small), tuple(table))


# ---------- Families ----------

@dataclass
class ConnectingFamily:
    """All connecting maps of one poset, stored eagerly.

    Attributes:
        kind: "interval" (T over K_{s,t}) or "global" (X over K).
        system: Underlying convolution system.
        poset: Index poset with its maximum.
        morphisms: (I.points, J.points) -> map Omega_J -> Omega_I, I <= J.
        window: (s, t) for interval families.
    """

    kind: Literal["interval", "global"]
    system: ConvolutionSystem
    poset: PartitionPoset
    morphisms: Dict[PairKey, ProbMorphism]
    window: Optional[Window] = None

    @property
    def top(self) -> Partition:
        return self.poset.maximum

    def morphism(self, small: Partition, big: Partition) -> ProbMorphism:
        return self.morphisms[(small.points, big.points)]

    def space(self, partition: Partition) -> FinProbSpace:
        return self.system.partition_space(partition)

    def replace_morphism(self, small: Partition, big: Partition, morphism: ProbMorphism) -> "ConnectingFamily":
        morphisms = dict(self.morphisms)
        morphisms[(small.points, big.points)] = morphism
        return replace(self, morphisms=morphisms)

    @property
    def label(self) -> str:
        if self.window is None:
            return "global"
        return f"interval{self.system.times.describe(*self.window)}"


def interval_family(sys: ConvolutionSystem, s: int, t: int, poset: Optional[PartitionPoset] = None) -> ConnectingFamily:
    """{T_{I,J}} over K_{s,t} (or over a given cofinal subposet)."""
    poset = poset or enumerate_K(sys.times, (sys.times.label(s), sys.times.label(t)))
    builder = TBuilder(sys)
    morphisms = {(a.points, b.points): builder.T(a, b) for a, b in poset.pairs()}
    logger.debug("interval family %s: %d members, %d maps", sys.times.describe(s, t), len(poset), len(morphisms))
    return ConnectingFamily("interval", sys, poset, morphisms, window=(s, t))


def global_family(sys: ConvolutionSystem) -> ConnectingFamily:
    """{X_{I,J}} over K."""
    poset = enumerate_K(sys.times)
    builder = TBuilder(sys)
    morphisms = {(a.points, b.points): builder.X(a, b) for a, b in poset.pairs()}
    logger.debug("global family: %d members, %d maps", len(poset), len(morphisms))
    return ConnectingFamily("global", sys, poset, morphisms)


def _pair_location(small: Partition, big: Partition) -> str:
    return f"I={small} J={big}"


def compare_maps(
    name: str,
    checked: int,
    location: str,
    actual: ProbMorphism,
    expected: ProbMorphism,
) -> Optional[CheckResult]:
    """Failed CheckResult if the maps differ on a positive-weight point, else None."""
    x = first_disagreement(actual, expected)
    if x is None:
        return None
    return CheckResult.fail(
        name,
        checked,
        Witness(
            location=location,
            point=repr(actual.domain.outcomes[x]),
            expected=repr(expected.codomain.outcomes[expected.table[x]]),
            actual=repr(actual.codomain.outcomes[actual.table[x]]),
        ),
    )


def verify_projective(fam: ConnectingFamily) -> List[CheckResult]:
    """Check that ``fam`` is a projective system of probability spaces.

    Returns:
        Results for measure preservation, identities on the diagonal and
        compatibility over every strict chain I < J < K.
    """
    prefix = fam.label
    results: List[CheckResult] = []

    failure = None
    pairs = list(fam.poset.pairs())
    for k, (a, b) in enumerate(pairs, start=1):
        m = fam.morphism(a, b)
        witness = measure_preservation_witness(m)
        if witness is not None:
            failure = CheckResult.fail(
                f"{prefix}.measure_preserving",
                k,
                Witness(
                    location=_pair_location(a, b),
                    point=repr(m.codomain.outcomes[witness.index]),
                    expected=format_rational(witness.expected),
                    actual=format_rational(witness.actual),
                ),
            )
            break
    results.append(failure or CheckResult.ok(f"{prefix}.measure_preserving", len(pairs)))

    failure = None
    for k, member in enumerate(fam.poset, start=1):
        m = fam.morphism(member, member)
        x = first_disagreement(m, identity(fam.space(member)))
        if x is not None:
            failure = CheckResult.fail(
                f"{prefix}.identity",
                k,
                Witness(location=f"I={member}", point=repr(m.domain.outcomes[x]),
                        expected=repr(m.domain.outcomes[x]), actual=repr(m.codomain.outcomes[m.table[x]])),
            )
            break
    results.append(failure or CheckResult.ok(f"{prefix}.identity", len(fam.poset)))

    failure = None
    checked = 0
    for a, b, c in fam.poset.chains():
        if a.points == b.points or b.points == c.points:
            continue
        checked += 1
        direct = fam.morphism(a, c)
        routed = compose(fam.morphism(a, b), fam.morphism(b, c))
        x = first_disagreement(direct, routed)
        if x is not None:
            failure = CheckResult.fail(
                f"{prefix}.compatible",
                checked,
                Witness(
                    location=f"chain {a} <= {b} <= {c}",
                    point=repr(direct.domain.outcomes[x]),
                    expected=repr(routed.codomain.outcomes[routed.table[x]]),
                    actual=repr(direct.codomain.outcomes[direct.table[x]]),
                ),
            )
            break
    results.append(failure or CheckResult.ok(f"{prefix}.compatible", checked))
    return results


def verify_fold_oracle(sys: ConvolutionSystem, families: Optional[Dict[Window, ConnectingFamily]] = None) -> CheckResult:
    """build_T agrees a.e. with the left-fold oracle on every window and pair.

    Args:
        sys: The system.
        families: Interval families to test; built from ``sys`` when None.
    """
    families = families or {w: interval_family(sys, *w) for w in sys.times.windows()}
    checked = 0
    for w in sys.times.windows():
        fam = families[w]
        for a, b in fam.poset.pairs():
            checked += 1
            failure = compare_maps("oracle.fold", checked, _pair_location(a, b), fam.morphism(a, b), fold_oracle(a, b, sys))
            if failure:
                return failure
    return CheckResult.ok("oracle.fold", checked)


def verify_projection_commutation(sys: ConvolutionSystem) -> CheckResult:
    """pi_{I~,J} o T_{J,J~} = T_{I~,I~'} o pi_{I~',J~} for J <= J~ and windows (s, t) of J.

    I~ = J n [s, t] and I~' = J~ n [s, t].
    """
    builder = TBuilder(sys)
    times = sys.times
    checked = 0
    for u, v in times.windows():
        for small, big in enumerate_K(times, (times.label(u), times.label(v))).pairs():
            for s in small.points:
                for t in small.points:
                    if s >= t or (s, t) == small.window:
                        continue
                    checked += 1
                    inner = Partition(times, tuple(p for p in small.points if s <= p <= t))
                    inner_big = Partition(times, tuple(p for p in big.points if s <= p <= t))
                    left = compose(window_projection(sys, small, s, t), builder.T(small, big))
                    right = compose(builder.T(inner, inner_big), window_projection(sys, big, s, t))
                    x = first_disagreement(left, right)
                    if x is not None:
                        return CheckResult.fail(
                            "global.projection_commutes",
                            checked,
                            Witness(
                                location=f"J={small} J~={big} window {times.describe(s, t)}",
                                point=repr(left.domain.outcomes[x]),
                                expected=repr(right.codomain.outcomes[right.table[x]]),
                                actual=repr(left.codomain.outcomes[left.table[x]]),
                            ),
                        )
    return CheckResult.ok("global.projection_commutes", checked)


# ---------- Limits ----------

@dataclass
class FiniteProjectiveLimit:
    """Top-space realization of a projective limit."""

    family: ConnectingFamily
    limit_space: FinProbSpace
    projections: Dict[Tuple[int, ...], ProbMorphism]

    def projection(self, partition: Partition) -> ProbMorphism:
        return self.projections[partition.points]


def verify_limit(limit: FiniteProjectiveLimit) -> CheckResult:
    """proj(I) = morphism(I, J) o proj(J) for every I <= J."""
    fam = limit.family
    pairs = list(fam.poset.pairs())
    for k, (a, b) in enumerate(pairs, start=1):
        direct = limit.projection(a)
        routed = compose(fam.morphism(a, b), limit.projection(b))
        x = first_disagreement(direct, routed)
        if x is not None:
            return CheckResult.fail(
                f"{fam.label}.limit",
                k,
                Witness(location=_pair_location(a, b), point=repr(direct.domain.outcomes[x]),
                        expected=repr(routed.codomain.outcomes[routed.table[x]]),
                        actual=repr(direct.codomain.outcomes[direct.table[x]])),
            )
    return CheckResult.ok(f"{fam.label}.limit", len(pairs))


def finite_projective_limit(fam: ConnectingFamily) -> FiniteProjectiveLimit:
    """Realize the limit as Omega_top with projections morphism(I, top).

    Raises:
        SystemConstructionError: If the family is not projective.
    """
    for result in verify_projective(fam):
        if not result.passed:
            raise SystemConstructionError(f"{fam.label} family is not projective: {result.name} at {result.witness}")
    top = fam.top
    limit = FiniteProjectiveLimit(
        fam,
        fam.space(top),
        {m.points: fam.morphism(m, top) for m in fam.poset},
    )
    check = verify_limit(limit)
    if not check.passed:
        raise SystemConstructionError(f"limit projections are incompatible at {check.witness}")
    return limit


def check_simply_maximal(fam: ConnectingFamily) -> bool:
    """Every projection from the top is onto the support of its codomain."""
    top = fam.top
    return all(is_surjective_on_support(fam.morphism(m, top)) for m in fam.poset)


@dataclass
class ThreadLimit:
    """Set-level inverse limit: compatible families (x_I) over the poset."""

    members: Tuple[Partition, ...]
    threads: List[Tuple[int, ...]]


def thread_limit(fam: ConnectingFamily) -> ThreadLimit:
    """Enumerate all threads by backtracking over members, smallest first.

    Raises:
        SystemConstructionError: Above THREAD_CHECK_LIMIT.
    """
    members = tuple(fam.poset.members)
    budget = len(members) * fam.space(fam.top).size
    if budget > THREAD_CHECK_LIMIT:
        raise SystemConstructionError(f"thread enumeration too large ({budget} > {THREAD_CHECK_LIMIT})")
    below = [[i for i in range(k) if members[i].issubset(members[k])] for k in range(len(members))]
    threads: List[Tuple[int, ...]] = []
    chosen: List[int] = []

    def extend(k: int) -> None:
        if k == len(members):
            threads.append(tuple(chosen))
            return
        for x in range(fam.space(members[k]).size):
            if all(fam.morphism(members[i], members[k]).table[x] == chosen[i] for i in below[k]):
                chosen.append(x)
                extend(k + 1)
                chosen.pop()

    extend(0)
    return ThreadLimit(members, threads)


def verify_thread_limit(fam: ConnectingFamily) -> CheckResult:
    """Threads correspond one-to-one to top outcomes via the projections."""
    limit = thread_limit(fam)
    top = fam.top
    top_pos = [m.points for m in limit.members].index(top.points)
    name = f"{fam.label}.threads"
    top_space = fam.space(top)
    if len(limit.threads) != top_space.size:
        return CheckResult.fail(name, len(limit.threads),
                                Witness(location="thread count", expected=str(top_space.size), actual=str(len(limit.threads))))
    for k, thread in enumerate(limit.threads, start=1):
        x = thread[top_pos]
        expected = tuple(fam.morphism(m, top).table[x] for m in limit.members)
        if expected != thread:
            return CheckResult.fail(name, k, Witness(location="thread", point=repr(top_space.outcomes[x])))
    return CheckResult.ok(name, len(limit.threads))


def verify_cofinal_limit(fam: ConnectingFamily, sub: PartitionPoset) -> CheckResult:
    """The limit over a cofinal subposet has the same top and projections."""
    name = f"{fam.label}.cofinal"
    if sub.maximum.points != fam.top.points:
        return CheckResult.fail(name, 1, Witness(location="maximum", expected=str(fam.top), actual=str(sub.maximum)))
    for k, member in enumerate(fam.poset, start=1):
        if not any(member.issubset(b) for b in sub.members):
            return CheckResult.fail(name, k, Witness(location=f"I={member} not below the subposet"))
    full = finite_projective_limit(fam)
    part = finite_projective_limit(interval_family(fam.system, *fam.window, poset=sub)) if fam.window else None
    if part is None:
        return CheckResult.ok(name, len(fam.poset))
    for k, member in enumerate(sub.members, start=1):
        if first_disagreement(full.projection(member), part.projection(member)) is not None:
            return CheckResult.fail(name, k, Witness(location=f"I={member}"))
    return CheckResult.ok(name, len(sub.members))


# ---------- Cylinder towers ----------

@dataclass(frozen=True)
class CylinderEvent:
    """Event {X_{s,t} in values} named by time labels and outcome labels."""

    start: str
    end: str
    values: frozenset

    def __str__(self) -> str:
        return f"X({self.start},{self.end}) in {{{','.join(sorted(map(str, self.values)))}}}"


@dataclass
class CylinderTower:
    """Increasing chain of time sets with one system rule per level."""

    levels: Sequence[TimeSet]
    rule: Callable[[TimeSet], ConvolutionSystem]
    events: Sequence[CylinderEvent] = field(default_factory=tuple)


def _validate_tower(tower: CylinderTower) -> None:
    if not tower.levels:
        raise PartitionError("a tower needs at least one level")
    for lower, upper in zip(tower.levels, tower.levels[1:]):
        missing = [label for label in lower.labels if label not in upper.labels]
        if missing:
            raise PartitionError(f"level {list(upper.labels)} does not contain {missing}")
        if [label for label in upper.labels if label in lower.labels] != list(lower.labels):
            raise PartitionError(f"level {list(upper.labels)} reorders the labels of {list(lower.labels)}")
    for event in tower.events:
        for level in tower.levels:
            if level.index(event.start) >= level.index(event.end):
                raise PartitionError(f"event {event} needs start before end")


def _event_cells(sys: ConvolutionSystem, event: CylinderEvent) -> Tuple[FinProbSpace, frozenset]:
    space = sys.space(sys.times.index(event.start), sys.times.index(event.end))
    return space, frozenset(space.index(v) for v in event.values if v in space.outcomes)


def _cylinder_mass(hit: frozenset, proj: ProbMorphism) -> Fraction:
    return proj.domain.mass(x for x, y in enumerate(proj.table) if y in hit)


def tower_consistency(tower: CylinderTower) -> List[CheckResult]:
    """Compare cylinder masses across adjacent levels and with the exact law.

    For each event A on window (s, t) and each level, the limit mass
    P(X_{s,t} in A) must equal mu_{s,t}(A); for adjacent levels the mass of
    the pulled-back cylinder under the level embedding must agree.

    Raises:
        PartitionError: For a malformed tower.
    """
    _validate_tower(tower)
    systems = [tower.rule(level) for level in tower.levels]
    results: List[CheckResult] = []

    failure = None
    for k, sys in enumerate(systems, start=1):
        bad = next((r for r in check_system(sys) if not r.passed), None)
        if bad is not None:
            failure = CheckResult.fail("tower.levels", k, Witness(location=f"level {list(sys.times.labels)}: {bad.name}",
                                                                point=bad.witness.point if bad.witness else None))
            break
    results.append(failure or CheckResult.ok("tower.levels", len(systems)))
    if failure:
        return results

    builders = [TBuilder(sys) for sys in systems]
    for event in tower.events:
        name = f"tower.cylinder[{event}]"
        failure = None
        checked = 0
        masses = []
        for sys, builder in zip(systems, builders):
            times = sys.times
            space, hit = _event_cells(sys, event)
            mass = _cylinder_mass(hit, builder.X(times.partition([event.start, event.end]), times.grid()))
            exact = space.mass(hit)
            masses.append(mass)
            checked += 1
            if mass != exact:
                failure = CheckResult.fail(name, checked, Witness(location=f"level {list(times.labels)}",
                                                                  expected=format_rational(exact), actual=format_rational(mass)))
                break
        if failure is None:
            for k in range(len(systems) - 1):
                lower, upper = systems[k], systems[k + 1]
                checked += 1
                embedded = upper.times.partition(lower.times.labels)
                lower_top = lower.partition_space(lower.times.grid())
                connecting = builders[k + 1].X(embedded, upper.times.grid())
                if not same_indexing(connecting.codomain, lower_top):
                    failure = CheckResult.fail(name, checked, Witness(location=f"levels {k}->{k + 1}", point="grid spaces differ"))
                    break
                cylinder = builders[k].X(lower.times.partition([event.start, event.end]), lower.times.grid())
                pulled = compose(cylinder, ProbMorphism(connecting.domain, lower_top, connecting.table))
                mass = _cylinder_mass(_event_cells(lower, event)[1], pulled)
                if mass != masses[k]:
                    failure = CheckResult.fail(name, checked, Witness(location=f"levels {k}->{k + 1}",
                                                                      expected=format_rational(masses[k]), actual=format_rational(mass)))
                    break
        results.append(failure or CheckResult.ok(name, checked, detail=", ".join(format_rational(m) for m in masses)))
    return results
