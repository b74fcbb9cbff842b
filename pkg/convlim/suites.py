"""Verification suites and the verify command.

Each suite is a function of a SuiteContext returning CheckResults. The
context builds the shared intermediate objects (families, projective
CPPS, restriction maps, flow, L2 systems, tower) lazily; any of them can
be replaced through ``override`` so that mutation runs exercise the same
suites on corrupted inputs.

Suites run concurrently; checks are sorted by (suite, name) before the
report is emitted, so reports are deterministic apart from timing.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional

from .convsys import (
    MAX_AUTOMORPHISM_ELEMENTS,
    ConvolutionSystem,
    FlowSystem,
    SystemMorphism,
    check_flow,
    check_system,
    identity_morphism,
    restrict,
    semigroup_automorphisms,
    semigroup_morphism,
)
from .cpps_flow import (
    ProjectiveCpps,
    RestrictionMaps,
    assemble_cpps,
    assemble_flow,
    blockwise_lift,
    build_restrictions,
    check_tau,
    verify_cpps,
    verify_kimp,
    verify_kimpa,
    verify_lift,
    verify_ll1,
    verify_projint,
    verify_restrictions,
)

from .l2 import (
    ProductSystemH,
    SubproductSystem,
    l2_of_system,
    product_system_H,
    verify_koopman_functoriality,
    verify_koopman_morphism,
    verify_l2,
    verify_theorem_ps,
)
from .order_partition import TimeSet, Window
from .projective import (
    ConnectingFamily,
    CylinderEvent,
    CylinderTower,
    global_family,
    interval_family,
    tower_consistency,
    verify_fold_oracle,
    verify_limit,
    verify_projection_commutation,
    verify_projective,
    verify_thread_limit,
    finite_projective_limit,
)
from .protocols import CheckResult, Report, SystemDescription, Witness

logger = logging.getLogger(__name__)

# ---------- Configuration Constants ----------
DEFAULT_WORKERS = 4
# Non-trivial automorphisms lifted by the lift suite.
MAX_LIFT_CASES = 3


@dataclass
class SuiteContext:
    """Shared inputs of the suites for one system."""

    system: ConvolutionSystem
    description: Optional[SystemDescription] = None
    tower_source: Optional[CylinderTower] = None

    def override(self, name: str, value: Any) -> None:
        """Replace a lazily built attribute (e.g. ``cpps``) with ``value``."""
        if name not in type(self).__dict__:
            raise AttributeError(f"unknown context attribute {name!r}")
        self.__dict__[name] = value

    @cached_property
    def interval_families(self) -> Dict[Window, ConnectingFamily]:
        return {w: interval_family(self.system, *w) for w in self.system.times.windows()}

    @cached_property
    def global_family(self) -> ConnectingFamily:
        return global_family(self.system)

    @cached_property
    def cpps(self) -> ProjectiveCpps:
        return assemble_cpps(self.system)

    @cached_property
    def restrictions(self) -> RestrictionMaps:
        return build_restrictions(self.cpps)

    @cached_property
    def flow(self) -> FlowSystem:
        return assemble_flow(self.global_family)

    @cached_property
    def lift_cases(self) -> List[SystemMorphism]:
        """Identity plus semigroup automorphisms preserving every window measure."""
        sys = self.system
        cases = [identity_morphism(sys)]
        sg = sys.semigroup
        if sg is not None and sg.size <= MAX_AUTOMORPHISM_ELEMENTS:
            measures = [space.weights for space in sys.spaces.values()]
            perms = [p for p in semigroup_automorphisms(sg, measures) if p != tuple(range(sg.size))]
            cases += [semigroup_morphism(sys, sys, p) for p in perms[:MAX_LIFT_CASES]]
        return cases

    @cached_property
    def lifts(self) -> List[SystemMorphism]:
        return [blockwise_lift(theta, self.cpps, self.cpps) for theta in self.lift_cases]

    @cached_property
    def l2_base(self) -> SubproductSystem:
        return l2_of_system(self.system)

    @cached_property
    def l2_flat(self) -> SubproductSystem:
        return l2_of_system(self.cpps.flat)

    @cached_property
    def product_system(self) -> ProductSystemH:
        return product_system_H(self.system)

    @cached_property
    def tower(self) -> CylinderTower:
        if self.tower_source is not None:
            return self.tower_source
        return default_tower(self.system)


def default_tower(sys: ConvolutionSystem) -> CylinderTower:
    """Endpoints, then the full time set; one event per supported outcome of the widest window."""
    times = sys.times
    first, last = times.labels[0], times.labels[-1]
    levels = [times] if len(times) == 2 else [TimeSet((first, last)), times]
    space = sys.space(0, len(times) - 1)
    events = [CylinderEvent(first, last, frozenset([space.outcomes[i]])) for i in space.support]
    return CylinderTower(levels, lambda ts: sys if ts == times else restrict(sys, ts), events)


# ---------- Suites ----------

def suite_axioms(ctx: SuiteContext) -> List[CheckResult]:
    return check_system(ctx.system)


def suite_partitions(ctx: SuiteContext) -> List[CheckResult]:
    results: List[CheckResult] = []
    for fam in ctx.interval_families.values():
        results += verify_projective(fam)
    return results


def suite_global(ctx: SuiteContext) -> List[CheckResult]:
    fam = ctx.global_family
    results = verify_projective(fam)
    results.append(verify_projection_commutation(ctx.system))
    if all(r.passed for r in results):
        results.append(verify_limit(finite_projective_limit(fam)))
        try:
            results.append(verify_thread_limit(fam))
        except ValueError as exc:
            results.append(CheckResult.ok(f"{fam.label}.threads", 0, detail=f"skipped: {exc}"))
    return results


def suite_oracle(ctx: SuiteContext) -> List[CheckResult]:
    return [verify_fold_oracle(ctx.system, ctx.interval_families)]


def suite_cpps(ctx: SuiteContext) -> List[CheckResult]:
    return verify_cpps(ctx.cpps)


def suite_tau(ctx: SuiteContext) -> List[CheckResult]:
    return check_tau(ctx.cpps)


def suite_lift(ctx: SuiteContext) -> List[CheckResult]:
    results: List[CheckResult] = []
    for k, (theta, lifted) in enumerate(zip(ctx.lift_cases, ctx.lifts)):
        tag = "identity" if k == 0 else f"automorphism{k}"
        for r in verify_lift(theta, lifted, ctx.cpps, ctx.cpps):
            results.append(r.model_copy(update={"name": f"{r.name}[{tag}]"}))
    return results


def suite_flow(ctx: SuiteContext) -> List[CheckResult]:
    return check_flow(ctx.flow)


def suite_ll1(ctx: SuiteContext) -> List[CheckResult]:
    return [verify_restrictions(ctx.restrictions), verify_ll1(ctx.cpps, ctx.restrictions)]


def suite_projint(ctx: SuiteContext) -> List[CheckResult]:
    return verify_projint(ctx.restrictions)


def suite_kimp(ctx: SuiteContext) -> List[CheckResult]:
    return [verify_kimp(ctx.system, ctx.global_family)]


def suite_kimpa(ctx: SuiteContext) -> List[CheckResult]:
    return verify_kimpa(ctx.system, ctx.cpps, ctx.restrictions)


def suite_l2(ctx: SuiteContext) -> List[CheckResult]:
    results = verify_l2(ctx.system, ctx.l2_base, ctx.l2_flat)
    results.append(verify_koopman_morphism(identity_morphism(ctx.system)))
    for fam in ctx.interval_families.values():
        results.append(verify_koopman_functoriality(fam))
    return results


def suite_ps(ctx: SuiteContext) -> List[CheckResult]:
    return verify_theorem_ps(ctx.system, ctx.cpps, ctx.product_system)


def suite_tower(ctx: SuiteContext) -> List[CheckResult]:
    return tower_consistency(ctx.tower)


SUITES: Dict[str, Callable[[SuiteContext], List[CheckResult]]] = {
    "axioms": suite_axioms,
    "partitions": suite_partitions,
    "global": suite_global,
    "oracle": suite_oracle,
    "cpps": suite_cpps,
    "tau": suite_tau,
    "lift": suite_lift,
    "flow": suite_flow,
    "ll1": suite_ll1,
    "projint": suite_projint,
    "kimp": suite_kimp,
    "kimpa": suite_kimpa,
    "l2": suite_l2,
    "ps": suite_ps,
    "tower": suite_tower,
}


def suite_names(selector: str) -> List[str]:
    """Expand a comma-separated selector; ``all`` means every suite.

    Raises:
        ValueError: For an unknown suite name.
    """
    names: List[str] = []
    for part in selector.split(","):
        part = part.strip()
        if part == "all":
            names.extend(SUITES)
        elif part in SUITES:
            names.append(part)
        else:
            raise ValueError(f"unknown suite {part!r}; choose from: all, {', '.join(SUITES)}")
    return list(dict.fromkeys(names))


def run_suite(name: str, ctx: SuiteContext) -> List[CheckResult]:
    """Run one suite; construction errors become a failed check."""
    start = time.perf_counter()
    try:
        results = SUITES[name](ctx)
    except ValueError as exc:
        logger.debug("suite %s raised %s", name, exc)
        results = [CheckResult.fail(f"{name}.construction", 0, Witness(location=str(exc)))]
    logger.info("suite %s: %d checks in %.3fs", name, len(results), time.perf_counter() - start)
    return [r.model_copy(update={"suite": name}) for r in results]


def cmd_verify(
    ctx: SuiteContext,
    suite: str = "all",
    workers: int = DEFAULT_WORKERS,
    source: str = "",
) -> Report:
    """Run the selected suites and assemble a Report.

    Args:
        ctx: Suite context of the parsed system.
        suite: Suite selector (name, comma list or ``all``).
        workers: Thread pool size.
        source: Description file name recorded in the report.

    Raises:
        ValueError: For an unknown suite name.
    """
    names = suite_names(suite)
    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        chunks = list(pool.map(lambda n: run_suite(n, ctx), names))
    checks = sorted((c for chunk in chunks for c in chunk), key=lambda c: (c.suite, c.name))
    sys = ctx.system
    return Report(
        suite=suite,
        source=source,
        checks=checks,
        elapsed=round(time.perf_counter() - start, 6),
        meta={
            "system": sys.name,
            "times": list(sys.times.labels),
            "suites": names,
            "cpps": sys.is_cpps,
        },
    )


def format_report(report: Report) -> str:
    """Human summary in [OK] / [FAIL] lines."""
    lines = []
    for check in report.checks:
        if check.passed:
            note = f" ({check.detail})" if check.detail else ""
            lines.append(f"[OK]   {check.suite}: {check.name} checked={check.checked}{note}")
        else:
            lines.append(f"[FAIL] {check.suite}: {check.name} checked={check.checked} witness: {check.witness}")
            if check.detail:
                lines.append(f"       {check.detail}")
    failed = len(report.failures)
    lines.append("-" * 70)
    lines.append(f"{len(report.checks) - failed} passed, {failed} failed in {report.elapsed:.2f}s")
    return "\n".join(lines)
