"""Convolution systems, flow systems and their morphisms.

A convolution system over a finite time set assigns a finite probability
space to every window (s, t), s < t, and a measure-preserving
multiplication

    mult(r, s, t): space(r, s) x space(s, t) -> space(r, t)

to every triple r < s < t, associative on supports. Systems are stored
densely (every window and every triple is explicit) and keyed by time
positions.

Systems generated by a finite semigroup are the fuzzing source: every
space is the element set and every multiplication is the semigroup
operation.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import SystemConstructionError
from .finprob import (
    FinProbSpace,
    ProbMorphism,
    RationalLike,
    atoms,
    compose,
    first_disagreement,
    format_rational,
    identity,
    independence_witness,
    is_isomorphism,
    measure_preservation_witness,
    parse_rational,
    product,
    product_morphism,
    same_indexing,
)
from .order_partition import Partition, TimeSet, Window
from .protocols import CheckResult, Witness

logger = logging.getLogger(__name__)

Triple = Tuple[int, int, int]
Weights = Tuple[Fraction, ...]

# Brute-force automorphism search enumerates all permutations.
MAX_AUTOMORPHISM_ELEMENTS = 8


# ---------- Semigroups ----------

@dataclass(frozen=True)
class FiniteSemigroup:
    """Finite set with a total binary operation given by a table of indices.

    Attributes:
        elements: Element labels.
        table: ``table[a][b]`` is the index of ``a * b``.
    """

    elements: Tuple[str, ...]
    table: Tuple[Tuple[int, ...], ...]

    def __post_init__(self) -> None:
        elements = tuple(str(e) for e in self.elements)
        table = tuple(tuple(int(c) for c in row) for row in self.table)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "table", table)
        n = len(elements)
        if n == 0:
            raise SystemConstructionError("a semigroup needs at least one element")
        if len(set(elements)) != n:
            raise SystemConstructionError("semigroup elements must be distinct")
        if len(table) != n or any(len(row) != n for row in table):
            raise SystemConstructionError(f"operation table must be {n}x{n}")
        if any(not 0 <= c < n for row in table for c in row):
            raise SystemConstructionError("operation table refers to an unknown element")

    @classmethod
    def from_labels(cls, elements: Sequence[str], table: Sequence[Sequence[str]]) -> "FiniteSemigroup":
        """Build from a table written with element labels."""
        elements = tuple(str(e) for e in elements)
        index = {e: i for i, e in enumerate(elements)}
        try:
            rows = tuple(tuple(index[str(c)] for c in row) for row in table)
        except KeyError as exc:
            raise SystemConstructionError(f"operation table refers to unknown element {exc.args[0]!r}") from None
        return cls(elements, rows)

    @property
    def size(self) -> int:
        return len(self.elements)

    def index(self, label: str) -> int:
        try:
            return self.elements.index(str(label))
        except ValueError:
            raise SystemConstructionError(f"unknown semigroup element {label!r}") from None

    def op(self, a: int, b: int) -> int:
        return self.table[a][b]

    def associativity_violation(self) -> Optional[Tuple[int, int, int]]:
        """First triple (a, b, c) with (ab)c != a(bc), scanned exhaustively."""
        t = self.table
        for a, b, c in itertools.product(range(self.size), repeat=3):
            if t[t[a][b]][c] != t[a][t[b][c]]:
                return (a, b, c)
        return None

    def require_associative(self) -> "FiniteSemigroup":
        bad = self.associativity_violation()
        if bad is not None:
            a, b, c = (self.elements[i] for i in bad)
            raise SystemConstructionError(f"operation is not associative on ({a}, {b}, {c})")
        return self

    def measure(self, law: Mapping[str, RationalLike]) -> Weights:
        """Weight vector over the elements; unlisted elements get 0."""
        vec = [Fraction(0)] * self.size
        for label, w in law.items():
            vec[self.index(label)] = parse_rational(w)
        return tuple(vec)


def cyclic_group(m: int) -> FiniteSemigroup:
    """Z/mZ with labels "0" .. str(m-1)."""
    if m < 1:
        raise SystemConstructionError("cyclic group order must be positive")
    return FiniteSemigroup(
        tuple(str(i) for i in range(m)),
        tuple(tuple((a + b) % m for b in range(m)) for a in range(m)),
    )


def trivial_semigroup() -> FiniteSemigroup:
    return FiniteSemigroup(("e",), ((0,),))


def convolve(sg: FiniteSemigroup, mu: Sequence[Fraction], nu: Sequence[Fraction]) -> Weights:
    """Pushforward of mu x nu by the semigroup operation."""
    out = [Fraction(0)] * sg.size
    for a, wa in enumerate(mu):
        if wa == 0:
            continue
        for b, wb in enumerate(nu):
            if wb:
                out[sg.table[a][b]] += wa * wb
    return tuple(out)


def convolution_power(sg: FiniteSemigroup, nu: Sequence[Fraction], n: int) -> Weights:
    """nu^{*n} for n >= 1."""
    if n < 1:
        raise SystemConstructionError(f"convolution power needs n >= 1, got {n}")
    result = tuple(nu)
    for _ in range(n - 1):
        result = convolve(sg, result, nu)
    return result


# ---------- Convolution systems ----------

@dataclass
class ConvolutionSystem:
    """Dense convolution system keyed by time positions.

    Attributes:
        times: The time set.
        spaces: Space for every window (s, t), s < t.
        mults: Multiplication for every triple r < s < t.
        name: Free-form label used in reports.
        semigroup: Generating semigroup, when the system came from one.
    """

    times: TimeSet
    spaces: Dict[Window, FinProbSpace]
    mults: Dict[Triple, ProbMorphism]
    name: str = ""
    semigroup: Optional[FiniteSemigroup] = None
    _partition_cache: Dict[Tuple[int, ...], FinProbSpace] = field(default_factory=dict, init=False, repr=False)

    def space(self, s: int, t: int) -> FinProbSpace:
        try:
            return self.spaces[(s, t)]
        except KeyError:
            raise SystemConstructionError(f"no space for window {self.times.describe(s, t)}") from None

    def mult(self, r: int, s: int, t: int) -> ProbMorphism:
        try:
            return self.mults[(r, s, t)]
        except KeyError:
            raise SystemConstructionError(f"no multiplication for triple {self.times.describe(r, s, t)}") from None

    def multiply(self, r: int, s: int, t: int, a: int, b: int) -> int:
        """mult(r, s, t) on outcome indices a of (r, s) and b of (s, t)."""
        return self.mults[(r, s, t)].table[a * self.spaces[(s, t)].size + b]

    def partition_space(self, partition: Partition) -> FinProbSpace:
        """Omega_I: product over the cells of I; the window space when I is trivial."""
        key = partition.points
        cached = self._partition_cache.get(key)
        if cached is None:
            if partition.is_trivial:
                cached = self.space(*partition.window)
            else:
                cached = product([self.space(a, b) for a, b in partition.cells])
            self._partition_cache[key] = cached
        return cached

    def replace_mult(self, r: int, s: int, t: int, morphism: ProbMorphism) -> "ConvolutionSystem":
        mults = dict(self.mults)
        mults[(r, s, t)] = morphism
        return replace(self, mults=mults)

    @property
    def is_cpps(self) -> bool:
        """Every multiplication is an isomorphism of probability spaces."""
        return all(is_isomorphism(m) for m in self.mults.values())


def _outcomes(sys: ConvolutionSystem, window: Window, *indices: int) -> str:
    return ", ".join(repr(sys.space(*window).outcomes[i]) for i in indices)


def check_system(sys: ConvolutionSystem) -> List[CheckResult]:
    """Check the structural, measure-preservation and associativity laws.

    Returns:
        One CheckResult per law; failures carry the first witness found.
    """
    times = sys.times
    results: List[CheckResult] = []

    missing = [w for w in times.windows() if w not in sys.spaces]
    missing_t = [t for t in times.triples() if t not in sys.mults]
    misfit = [
        (r, s, t) for (r, s, t) in times.triples()
        if (r, s, t) not in missing_t and (r, s) not in missing and (s, t) not in missing and (r, t) not in missing
        and (
            not same_indexing(sys.mults[(r, s, t)].domain, product([sys.spaces[(r, s)], sys.spaces[(s, t)]]))
            or not same_indexing(sys.mults[(r, s, t)].codomain, sys.spaces[(r, t)])
        )
    ]
    if missing:
        witness = Witness(location=f"window {times.describe(*missing[0])}")
        results.append(CheckResult.fail("system.structure", len(times.windows()), witness, "missing space"))
        return results
    if missing_t or misfit:
        bad = (missing_t or misfit)[0]
        reason = "missing multiplication" if missing_t else "multiplication has the wrong domain or codomain"
        results.append(CheckResult.fail("system.structure", len(times.triples()), Witness(location=f"triple {times.describe(*bad)}"), reason))
        return results
    results.append(CheckResult.ok("system.structure", len(times.windows()) + len(times.triples())))

    checked = 0
    failure: Optional[CheckResult] = None
    for triple in times.triples():
        checked += 1
        witness = measure_preservation_witness(sys.mults[triple])
        if witness is not None:
            r, _, t = triple
            failure = CheckResult.fail(
                "system.measure_preserving",
                checked,
                Witness(
                    location=f"triple {times.describe(*triple)}",
                    point=repr(sys.space(r, t).outcomes[witness.index]),
                    expected=format_rational(witness.expected),
                    actual=format_rational(witness.actual),
                ),
            )
            break
    results.append(failure or CheckResult.ok("system.measure_preserving", checked))

    checked = 0
    failure = None
    for r, s, t, u in times.quadruples():
        for a in sys.space(r, s).support:
            for b in sys.space(s, t).support:
                for c in sys.space(t, u).support:
                    checked += 1
                    left = sys.multiply(r, t, u, sys.multiply(r, s, t, a, b), c)
                    right = sys.multiply(r, s, u, a, sys.multiply(s, t, u, b, c))
                    if left != right:
                        failure = CheckResult.fail(
                            "system.associative",
                            checked,
                            Witness(
                                location=f"quadruple {times.describe(r, s, t, u)}",
                                point=f"({_outcomes(sys, (r, s), a)}, {_outcomes(sys, (s, t), b)}, {_outcomes(sys, (t, u), c)})",
                                expected=repr(sys.space(r, u).outcomes[right]),
                                actual=repr(sys.space(r, u).outcomes[left]),
                            ),
                        )
                        break
                if failure:
                    break
            if failure:
                break
        if failure:
            break
    results.append(failure or CheckResult.ok("system.associative", checked))
    return results


def require_valid(sys: ConvolutionSystem, what: str = "system") -> ConvolutionSystem:
    """Raise SystemConstructionError unless check_system passes."""
    for result in check_system(sys):
        if not result.passed:
            label = f"{what} {sys.name}" if sys.name else what
            raise SystemConstructionError(f"{label} fails {result.name}: {result.witness}")
    return sys


def _semigroup_mult(sg: FiniteSemigroup, domain: FinProbSpace, codomain: FinProbSpace) -> ProbMorphism:
    n = sg.size
    return ProbMorphism(domain, codomain, tuple(sg.table[i // n][i % n] for i in range(n * n)))


def system_from_measures(
    sg: FiniteSemigroup,
    measures: Mapping[Window, Sequence[Fraction]],
    times: TimeSet,
    name: str = "",
) -> ConvolutionSystem:
    """System with spaces (S, measures[w]) and the semigroup operation as mult."""
    spaces = {w: FinProbSpace(sg.elements, tuple(measures[w])) for w in times.windows()}
    mults = {
        (r, s, t): _semigroup_mult(sg, product([spaces[(r, s)], spaces[(s, t)]]), spaces[(r, t)])
        for r, s, t in times.triples()
    }
    logger.debug("built semigroup system %s: %d windows, |S|=%d", name, len(spaces), sg.size)
    return ConvolutionSystem(times, spaces, mults, name=name, semigroup=sg)


def from_idempotent(sg: FiniteSemigroup, mu: Sequence[Fraction], times: TimeSet, name: str = "") -> ConvolutionSystem:
    """Trivial system: every space is (S, mu).

    Raises:
        SystemConstructionError: If the operation is not associative or
            mu * mu != mu; the message names the first failing element.
    """
    sg.require_associative()
    mu = tuple(parse_rational(w) for w in mu)
    square = convolve(sg, mu, mu)
    for i, (got, want) in enumerate(zip(square, mu)):
        if got != want:
            raise SystemConstructionError(
                f"measure is not idempotent: (mu*mu)({sg.elements[i]}) = {format_rational(got)}, "
                f"mu({sg.elements[i]}) = {format_rational(want)}"
            )
    return system_from_measures(sg, {w: mu for w in times.windows()}, times, name=name)


def from_semigroup_generator(
    sg: FiniteSemigroup,
    nu: Sequence[Fraction],
    times: TimeSet,
    positions: Optional[Mapping[str, int]] = None,
    name: str = "",
) -> ConvolutionSystem:
    """One-parameter system: space(s, t) = (S, nu^{*(pos(t) - pos(s))}).

    Args:
        sg: Associative semigroup.
        nu: Generator measure.
        times: Time set; labels are read as integers unless ``positions``
            is given.
        positions: Integer position per label, strictly increasing.
    """
    sg.require_associative()
    nu = tuple(parse_rational(w) for w in nu)
    if positions is None:
        try:
            pos = [int(label) for label in times.labels]
        except ValueError:
            raise SystemConstructionError("time labels are not integers; give explicit positions") from None
    else:
        try:
            pos = [int(positions[label]) for label in times.labels]
        except KeyError as exc:
            raise SystemConstructionError(f"no position for time label {exc.args[0]!r}") from None
    if any(b <= a for a, b in zip(pos, pos[1:])):
        raise SystemConstructionError(f"time positions must be strictly increasing, got {pos}")
    powers: Dict[int, Weights] = {}
    measures = {}
    for s, t in times.windows():
        gap = pos[t] - pos[s]
        if gap not in powers:
            powers[gap] = convolution_power(sg, nu, gap)
        measures[(s, t)] = powers[gap]
    return system_from_measures(sg, measures, times, name=name)


def restrict(sys: ConvolutionSystem, sub_times: TimeSet) -> ConvolutionSystem:
    """The system over a sub time set (labels must be a subset, order kept)."""
    pos = [sys.times.index(label) for label in sub_times.labels]
    if any(b <= a for a, b in zip(pos, pos[1:])):
        raise SystemConstructionError("sub time set does not carry the induced order")
    spaces = {(s, t): sys.space(pos[s], pos[t]) for s, t in sub_times.windows()}
    mults = {(r, s, t): sys.mult(pos[r], pos[s], pos[t]) for r, s, t in sub_times.triples()}
    return ConvolutionSystem(sub_times, spaces, mults, name=sys.name, semigroup=sys.semigroup)


# ---------- Morphisms of systems ----------

@dataclass
class SystemMorphism:
    """Family theta(s, t): source.space(s, t) -> target.space(s, t)."""

    source: ConvolutionSystem
    target: ConvolutionSystem
    theta: Dict[Window, ProbMorphism]

    def component(self, s: int, t: int) -> ProbMorphism:
        return self.theta[(s, t)]


def identity_morphism(sys: ConvolutionSystem) -> SystemMorphism:
    return SystemMorphism(sys, sys, {w: identity(sys.space(*w)) for w in sys.times.windows()})


def compose_morphisms(second: SystemMorphism, first: SystemMorphism) -> SystemMorphism:
    """second o first."""
    if first.target.times != second.source.times:
        raise SystemConstructionError("morphisms live over different time sets")
    return SystemMorphism(
        first.source,
        second.target,
        {w: compose(second.theta[w], first.theta[w]) for w in first.source.times.windows()},
    )


def semigroup_morphism(source: ConvolutionSystem, target: ConvolutionSystem, hom: Sequence[int]) -> SystemMorphism:
    """Apply one element map ``hom`` on every window of semigroup systems."""
    if source.times != target.times:
        raise SystemConstructionError("morphisms live over different time sets")
    theta = {
        w: ProbMorphism(source.space(*w), target.space(*w), tuple(hom))
        for w in source.times.windows()
    }
    return SystemMorphism(source, target, theta)


def check_system_morphism(morphism: SystemMorphism) -> List[CheckResult]:
    """Check that every component is measure-preserving and every square commutes a.e."""
    src, tgt = morphism.source, morphism.target
    if src.times != tgt.times:
        return [CheckResult.fail("morphism.times", 1, Witness(location="time sets differ"))]
    times = src.times
    results: List[CheckResult] = []

    failure = None
    for k, w in enumerate(times.windows(), start=1):
        witness = measure_preservation_witness(morphism.theta[w])
        if witness is not None:
            failure = CheckResult.fail(
                "morphism.measure_preserving",
                k,
                Witness(
                    location=f"window {times.describe(*w)}",
                    point=repr(tgt.space(*w).outcomes[witness.index]),
                    expected=format_rational(witness.expected),
                    actual=format_rational(witness.actual),
                ),
            )
            break
    results.append(failure or CheckResult.ok("morphism.measure_preserving", len(times.windows())))

    failure = None
    for k, (r, s, t) in enumerate(times.triples(), start=1):
        top = compose(morphism.theta[(r, t)], src.mult(r, s, t))
        pair = product_morphism(
            [morphism.theta[(r, s)], morphism.theta[(s, t)]],
            domain=src.mult(r, s, t).domain,
            codomain=tgt.mult(r, s, t).domain,
        )
        bottom = compose(tgt.mult(r, s, t), pair)
        x = first_disagreement(top, bottom)
        if x is not None:
            failure = CheckResult.fail(
                "morphism.square",
                k,
                Witness(
                    location=f"triple {times.describe(r, s, t)}",
                    point=repr(top.domain.outcomes[x]),
                    expected=repr(bottom.codomain.outcomes[bottom.table[x]]),
                    actual=repr(top.codomain.outcomes[top.table[x]]),
                ),
            )
            break
    results.append(failure or CheckResult.ok("morphism.square", len(times.triples())))
    return results


def semigroup_automorphisms(sg: FiniteSemigroup, measures: Sequence[Sequence[Fraction]] = ()) -> List[Tuple[int, ...]]:
    """All automorphisms of ``sg`` preserving every measure in ``measures``.

    Raises:
        SystemConstructionError: Above MAX_AUTOMORPHISM_ELEMENTS elements.
    """
    if sg.size > MAX_AUTOMORPHISM_ELEMENTS:
        raise SystemConstructionError(f"automorphism search is limited to {MAX_AUTOMORPHISM_ELEMENTS} elements")
    found = []
    for perm in itertools.permutations(range(sg.size)):
        if any(mu[perm[a]] != mu[a] for mu in measures for a in range(sg.size)):
            continue
        if all(perm[sg.table[a][b]] == sg.table[perm[a]][perm[b]] for a in range(sg.size) for b in range(sg.size)):
            found.append(perm)
    return found


# ---------- Flow systems ----------

@dataclass
class FlowSystem:
    """Single space with increments X(s, t): base -> system.space(s, t)."""

    base: FinProbSpace
    X: Dict[Window, ProbMorphism]
    system: ConvolutionSystem

    def replace_increment(self, s: int, t: int, morphism: ProbMorphism) -> "FlowSystem":
        X = dict(self.X)
        X[(s, t)] = morphism
        return replace(self, X=X)


def increment_chains(times: TimeSet) -> List[Tuple[int, ...]]:
    """Every increasing chain t_1 < ... < t_n with n >= 3."""
    n = len(times)
    return [c for size in range(3, n + 1) for c in itertools.combinations(range(n), size)]


def check_flow(flow: FlowSystem) -> List[CheckResult]:
    """Check the flow axioms plus the law of every increment.

    Condition 2 is checked on consecutive increments
    X(t_1, t_2), ..., X(t_{n-1}, t_n) of every chain.
    """
    times, base, sys = flow.system.times, flow.base, flow.system
    results: List[CheckResult] = []

    failure = None
    for k, w in enumerate(times.windows(), start=1):
        witness = measure_preservation_witness(flow.X[w])
        if witness is not None:
            failure = CheckResult.fail(
                "flow.laws",
                k,
                Witness(
                    location=f"X{times.describe(*w)}",
                    point=repr(sys.space(*w).outcomes[witness.index]),
                    expected=format_rational(witness.expected),
                    actual=format_rational(witness.actual),
                ),
            )
            break
    results.append(failure or CheckResult.ok("flow.laws", len(times.windows())))

    partition = atoms([flow.X[w] for w in times.windows()], base)
    block = partition.merged_support_block()
    if block is None:
        results.append(CheckResult.ok("flow.generating", len(partition.blocks)))
    else:
        pts = [repr(base.outcomes[x]) for x in block if base.weights[x] > 0][:2]
        results.append(CheckResult.fail(
            "flow.generating",
            len(partition.blocks),
            Witness(location="atom of the increments", point=" ~ ".join(pts)),
            "increments do not separate the support",
        ))

    failure = None
    chains = increment_chains(times)
    for k, chain in enumerate(chains, start=1):
        maps = [flow.X[(a, b)] for a, b in zip(chain, chain[1:])]
        witness = independence_witness(maps, base)
        if witness is not None:
            failure = CheckResult.fail(
                "flow.independent",
                k,
                Witness(
                    location=f"chain {times.describe(*chain)}",
                    point=repr(tuple(sys.space(a, b).outcomes[v] for (a, b), v in zip(zip(chain, chain[1:]), witness.values))),
                    expected=format_rational(witness.product),
                    actual=format_rational(witness.joint),
                ),
            )
            break
    results.append(failure or CheckResult.ok("flow.independent", len(chains)))

    failure = None
    checked = 0
    for r, s, t in times.triples():
        checked += 1
        xrs, xst, xrt = flow.X[(r, s)].table, flow.X[(s, t)].table, flow.X[(r, t)].table
        for x in base.support:
            composed = sys.multiply(r, s, t, xrs[x], xst[x])
            if composed != xrt[x]:
                failure = CheckResult.fail(
                    "flow.composition",
                    checked,
                    Witness(
                        location=f"triple {times.describe(r, s, t)}",
                        point=repr(base.outcomes[x]),
                        expected=repr(sys.space(r, t).outcomes[composed]),
                        actual=repr(sys.space(r, t).outcomes[xrt[x]]),
                    ),
                )
                break
        if failure:
            break
    results.append(failure or CheckResult.ok("flow.composition", checked))
    return results
