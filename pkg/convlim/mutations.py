"""Mutation catalogue for the verification suites.

Each mutant corrupts exactly one table entry (or one matrix entry) of an
object the target suite consumes, through SuiteContext.override or by
replacing the system itself. A mutant counts as detected when its target
suite reports at least one failed check.

Two corruptions are used throughout:

* bump: the first positive-weight point is sent to the next outcome of
  the codomain. This always breaks measure preservation.
* swap: the images of two positive-weight points with different images
  are exchanged. With equal weights the map stays measure-preserving, so
  only the compatibility laws can catch it.

A mutant may also carry an ``equivalent`` test. When it holds on the
mutated context the corruption is itself valid (a swapped multiplication on
a time set with a single triple, say) and the mutant is skipped instead of
counted as missed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, List, Optional

import numpy as np
import pandas as pd

from .convsys import ConvolutionSystem, check_system
from .finprob import ProbMorphism
from .order_partition import Partition
from .projective import ConnectingFamily, CylinderTower
from .protocols import MutationOutcome
from .suites import SuiteContext, run_suite

logger = logging.getLogger(__name__)


# ---------- Corruptions ----------

def bump(morphism: ProbMorphism) -> Optional[ProbMorphism]:
    """Move the first positive-weight point to the next codomain outcome."""
    if morphism.codomain.size < 2:
        return None
    for x in morphism.domain.support:
        return morphism.with_entry(x, (morphism.table[x] + 1) % morphism.codomain.size)
    return None


def swap(morphism: ProbMorphism) -> Optional[ProbMorphism]:
    """Exchange the images of two positive points, equal weights preferred."""
    table, weights = morphism.table, morphism.domain.weights
    support = morphism.domain.support
    pairs = [(a, b) for i, a in enumerate(support) for b in support[i + 1:] if table[a] != table[b]]
    if not pairs:
        return None
    a, b = next(((a, b) for a, b in pairs if weights[a] == weights[b]), pairs[0])
    return morphism.with_entry(a, table[b]).with_entry(b, table[a])


def bump_matrix(matrix: np.ndarray, weights) -> Optional[np.ndarray]:
    """Move the 1 of the first positive-weight row one column to the right."""
    if matrix.shape[1] < 2:
        return None
    for row, w in enumerate(weights):
        if w > 0:
            out = matrix.copy()
            col = int(np.argmax(out[row]))
            out[row, col] = 0
            out[row, (col + 1) % out.shape[1]] = 1
            return out
    return None


# ---------- Catalogue ----------

@dataclass(frozen=True)
class Mutant:
    """One corruption aimed at one suite.

    Attributes:
        name: Catalogue key, ``<suite>.<corruption>``.
        suite: Suite expected to detect it.
        description: What is corrupted.
        apply: Corrupts a fresh context; returns None when the system is too
            small for this mutant.
        equivalent: True on a mutated context whose corruption is itself a
            valid object, so that no check can detect it.
    """

    name: str
    suite: str
    description: str
    apply: Callable[[SuiteContext], Optional[SuiteContext]]
    equivalent: Optional[Callable[[SuiteContext], bool]] = None


def _with_system(ctx: SuiteContext, sys: ConvolutionSystem) -> SuiteContext:
    return SuiteContext(sys, description=ctx.description, tower_source=ctx.tower_source)


def _mutate_mult(corrupt: Callable[[ProbMorphism], Optional[ProbMorphism]]):
    def apply(ctx: SuiteContext) -> Optional[SuiteContext]:
        sys = ctx.system
        triples = sys.times.triples()
        if not triples:
            return None
        bad = corrupt(sys.mult(*triples[0]))
        return None if bad is None else _with_system(ctx, sys.replace_mult(*triples[0], bad))
    return apply


def _still_a_system(ctx: SuiteContext) -> bool:
    """The corrupted system still satisfies every system law."""
    return all(r.passed for r in check_system(ctx.system))


def _widest_pair(fam: ConnectingFamily) -> Optional[tuple]:
    """(trivial partition of the family window, top) when a chain runs between them."""
    top = fam.top
    if len(top) < 3:
        return None
    return Partition(top.times, (top.start, top.end)), top


def _mutate_interval(corrupt, diagonal: bool = False):
    def apply(ctx: SuiteContext) -> Optional[SuiteContext]:
        times = ctx.system.times
        w = (0, 1) if diagonal else (0, len(times) - 1)
        families = dict(ctx.interval_families)
        fam = families[w]
        if diagonal:
            small = big = fam.top
        else:
            pair = _widest_pair(fam)
            if pair is None:
                return None
            small, big = pair
        bad = corrupt(fam.morphism(small, big))
        if bad is None:
            return None
        families[w] = fam.replace_morphism(small, big, bad)
        ctx.override("interval_families", families)
        return ctx
    return apply


def _mutate_global(corrupt):
    def apply(ctx: SuiteContext) -> Optional[SuiteContext]:
        fam = ctx.global_family
        pair = _widest_pair(fam)
        if pair is None:
            return None
        bad = corrupt(fam.morphism(*pair))
        if bad is None:
            return None
        ctx.override("global_family", fam.replace_morphism(*pair, bad))
        return ctx
    return apply


def _mutate_global_cell(ctx: SuiteContext) -> Optional[SuiteContext]:
    fam = ctx.global_family
    times = ctx.system.times
    small, top = times.pair(0, 1), fam.top
    bad = bump(fam.morphism(small, top))
    if bad is None:
        return None
    ctx.override("global_family", fam.replace_morphism(small, top, bad))
    return ctx


def _mutate_flat(corrupt):
    def apply(ctx: SuiteContext) -> Optional[SuiteContext]:
        cpps = ctx.cpps
        triples = cpps.times.triples()
        if not triples:
            return None
        bad = corrupt(cpps.flat.mult(*triples[0]))
        if bad is None:
            return None
        ctx.override("cpps", cpps.replace_flat_mult(*triples[0], bad))
        return ctx
    return apply


def _mutate_epi(corrupt):
    def apply(ctx: SuiteContext) -> Optional[SuiteContext]:
        cpps = ctx.cpps
        if len(cpps.times) < 3:
            return None
        w = (0, len(cpps.times) - 1)
        bad = corrupt(cpps.epi(*w))
        if bad is None:
            return None
        ctx.override("cpps", cpps.replace_epi(*w, bad))
        return ctx
    return apply


def _mutate_lift(ctx: SuiteContext) -> Optional[SuiteContext]:
    lifts = list(ctx.lifts)
    first = lifts[0]
    bad = bump(first.theta[(0, 1)])
    if bad is None:
        return None
    theta = dict(first.theta)
    theta[(0, 1)] = bad
    lifts[0] = replace(first, theta=theta)
    ctx.override("lifts", lifts)
    return ctx


def _mutate_increment(corrupt):
    def apply(ctx: SuiteContext) -> Optional[SuiteContext]:
        flow = ctx.flow
        w = (0, 1)
        bad = corrupt(flow.X[w])
        if bad is None:
            return None
        ctx.override("flow", flow.replace_increment(*w, bad))
        return ctx
    return apply


def _shift_increment(ctx: SuiteContext) -> Optional[SuiteContext]:
    """X(0,2) replaced by X(0,1)."""
    if len(ctx.system.times) < 3:
        return None
    flow = ctx.flow
    ctx.override("flow", flow.replace_increment(0, 2, flow.X[(0, 1)]))
    return ctx


def _mutate_restriction(inner_at_end: bool):
    def apply(ctx: SuiteContext) -> Optional[SuiteContext]:
        restrictions = ctx.restrictions
        last = len(ctx.system.times) - 1
        inner = (last - 1, last) if inner_at_end else (0, 1)
        outer = (0, last)
        bad = bump(restrictions.get(inner, outer))
        if bad is None:
            return None
        ctx.override("restrictions", restrictions.replace_map(inner, outer, bad))
        return ctx
    return apply


def _mutate_l2(ctx: SuiteContext) -> Optional[SuiteContext]:
    base = ctx.l2_base
    triples = base.times.triples()
    if not triples:
        return None
    triple = triples[0]
    bad = bump_matrix(base.isometries[triple], base.tensor_space(*triple).weights)
    if bad is None:
        return None
    isometries = dict(base.isometries)
    isometries[triple] = bad
    ctx.override("l2_base", replace(base, isometries=isometries))
    return ctx


def _mutate_ps(ctx: SuiteContext) -> Optional[SuiteContext]:
    ph = ctx.product_system
    triples = ph.system.times.triples()
    if not triples:
        return None
    triple = triples[0]
    r, s, t = triple
    weights = ph.as_subproduct().tensor_space(r, s, t).weights
    bad = bump_matrix(ph.unitaries[triple], weights)
    if bad is None:
        return None
    unitaries = dict(ph.unitaries)
    unitaries[triple] = bad
    ctx.override("product_system", replace(ph, unitaries=unitaries))
    return ctx


def _mutate_tower(ctx: SuiteContext) -> Optional[SuiteContext]:
    tower = ctx.tower
    top = tower.levels[-1]
    if len(top) < 3:
        return None

    def rule(times):
        sys = tower.rule(times)
        if times != top:
            return sys
        bad = bump(sys.mult(0, 1, 2))
        return sys if bad is None else sys.replace_mult(0, 1, 2, bad)

    ctx.override("tower", CylinderTower(tower.levels, rule, tower.events))
    return ctx


CATALOGUE: List[Mutant] = [
    Mutant("axioms.bump", "axioms", "first multiplication, one entry moved", _mutate_mult(bump)),
    Mutant("axioms.swap", "axioms", "first multiplication, two entries exchanged", _mutate_mult(swap), _still_a_system),
    Mutant("partitions.bump", "partitions", "T from the full grid to the trivial partition", _mutate_interval(bump)),
    Mutant("partitions.swap", "partitions", "T from the full grid to the trivial partition, swapped", _mutate_interval(swap)),
    Mutant("partitions.identity", "partitions", "T on the diagonal of the first window", _mutate_interval(bump, diagonal=True)),
    Mutant("global.bump", "global", "X from the full grid to the outer pair", _mutate_global(bump)),
    Mutant("global.swap", "global", "X from the full grid to the outer pair, swapped", _mutate_global(swap)),
    Mutant("oracle.bump", "oracle", "interval-family map compared with the left fold", _mutate_interval(bump)),
    Mutant("cpps.bump", "cpps", "first flat multiplication, one entry moved", _mutate_flat(bump)),
    Mutant("cpps.swap", "cpps", "first flat multiplication, two entries exchanged", _mutate_flat(swap)),
    Mutant("tau.bump", "tau", "widest epimorphism component, one entry moved", _mutate_epi(bump)),
    Mutant("tau.swap", "tau", "widest epimorphism component, two entries exchanged", _mutate_epi(swap)),
    Mutant("lift.bump", "lift", "identity lift on the first cell", _mutate_lift),
    Mutant("flow.bump", "flow", "increment X(0,1), one entry moved", _mutate_increment(bump)),
    Mutant("flow.swap", "flow", "increment X(0,1), two entries exchanged", _mutate_increment(swap)),
    Mutant("flow.shift", "flow", "increment X(0,2) replaced by X(0,1)", _shift_increment),
    Mutant("ll1.bump", "ll1", "restriction of the outer window to its first cell", _mutate_restriction(False)),
    Mutant("projint.bump", "projint", "restriction of the outer window to its last cell", _mutate_restriction(True)),
    Mutant("kimp.bump", "kimp", "global projection onto the first cell", _mutate_global_cell),
    Mutant("kimpa.bump", "kimpa", "restriction of the outer window to its first cell", _mutate_restriction(False)),
    Mutant("l2.bump", "l2", "first Koopman isometry, one entry moved", _mutate_l2),
    Mutant("ps.bump", "ps", "first unitary of H, one entry moved", _mutate_ps),
    Mutant("tower.bump", "tower", "top tower level, first multiplication", _mutate_tower),
]


# ---------- Runner ----------

def run_mutant(mutant: Mutant, ctx: SuiteContext) -> MutationOutcome:
    """Apply one mutant to a fresh context and run its suite."""
    mutated = mutant.apply(ctx)
    if mutated is None:
        return MutationOutcome(mutant=mutant.name, suite=mutant.suite, description=mutant.description, skipped=True)
    if mutant.equivalent is not None and mutant.equivalent(mutated):
        return MutationOutcome(mutant=mutant.name, suite=mutant.suite, description=mutant.description,
                               skipped=True, equivalent=True)
    results = run_suite(mutant.suite, mutated)
    failed = next((r for r in results if not r.passed), None)
    return MutationOutcome(
        mutant=mutant.name,
        suite=mutant.suite,
        description=mutant.description,
        detected=failed is not None,
        failed_check=failed.name if failed else None,
        witness=str(failed.witness) if failed and failed.witness else None,
    )


def run_mutations(
    make_context: Callable[[], SuiteContext],
    catalogue: Optional[List[Mutant]] = None,
) -> List[MutationOutcome]:
    """Run every mutant of the catalogue against a fresh context.

    Args:
        make_context: Builds an unmutated context; called once per mutant.
        catalogue: Mutants to run; CATALOGUE when None.
    """
    outcomes = []
    for mutant in catalogue or CATALOGUE:
        outcome = run_mutant(mutant, make_context())
        if outcome.equivalent:
            verdict = "equivalent"
        elif outcome.skipped:
            verdict = "skipped"
        else:
            verdict = "detected" if outcome.detected else "missed"
        logger.info("mutant %s: %s", mutant.name, verdict)
        outcomes.append(outcome)
    return outcomes


def detection_table(outcomes: List[MutationOutcome]) -> pd.DataFrame:
    """One row per mutant, columns as in MutationOutcome."""
    return pd.DataFrame([o.model_dump() for o in outcomes])
