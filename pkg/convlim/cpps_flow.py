"""The projective CPPS, the flow system and restriction maps.

Omega_flat(s, t) is the limit of the interval family over K_{s,t},
realized as the product over the adjacent cells of the full grid on
[s, t]. With row-major indexing the flat multiplication
Omega_flat(r, s) x Omega_flat(s, t) -> Omega_flat(r, t) is tuple
concatenation, i.e. the identity table, and the canonical epimorphism
onto the base system is T_{{s,t}, grid}.

Restriction maps between nested windows are assembled literally from
inverses of flat multiplications and then compared against plain
coordinate-window projections.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

from .convsys import (
    ConvolutionSystem,
    FlowSystem,
    SystemMorphism,
    check_flow,
    check_system,
    check_system_morphism,
    require_valid,
)
from .errors import SystemConstructionError
from .finprob import (
    FinProbSpace,
    ProbMorphism,
    compose,
    compose_all,
    coordinate_projection,
    identity,
    inverse_on_support,
    is_isomorphism,
    is_surjective_on_support,
    measure_preservation_witness,
    format_rational,
    product,
    product_morphism,
)
from .order_partition import PairWindow, Partition, Window, enumerate_K, partitions_through, split_at
from .projective import (
    TBuilder,
    ConnectingFamily,
    check_simply_maximal,
    compare_maps,
    finite_projective_limit,
    global_family,
    interval_family,
    window_projection,
)
from .protocols import CheckResult, Witness

logger = logging.getLogger(__name__)

WindowPair = Tuple[Window, Window]


# ---------- Projective CPPS ----------

@dataclass
class ProjectiveCpps:
    """The flat system built from ``base`` and its epimorphism onto it.

    Attributes:
        base: The convolution system.
        flat: Flat system: full-grid spaces, concatenation multiplications.
        tau: Canonical epimorphism flat -> base (components T_flat(s, t)).
        builder: Memoized T maps of the base system.
    """

    base: ConvolutionSystem
    flat: ConvolutionSystem
    tau: SystemMorphism
    builder: TBuilder

    @property
    def times(self):
        return self.base.times

    def space(self, s: int, t: int) -> FinProbSpace:
        return self.flat.space(s, t)

    def epi(self, s: int, t: int) -> ProbMorphism:
        return self.tau.theta[(s, t)]

    def flat_projection(self, partition: Partition) -> ProbMorphism:
        """T_flat(I): Omega_flat(s, t) -> Omega_I for I in K_{s,t}."""
        return self.builder.T(partition, self.times.grid(*partition.window))

    def replace_epi(self, s: int, t: int, morphism: ProbMorphism) -> "ProjectiveCpps":
        theta = dict(self.tau.theta)
        theta[(s, t)] = morphism
        return replace(self, tau=replace(self.tau, theta=theta))

    def replace_flat_mult(self, r: int, s: int, t: int, morphism: ProbMorphism) -> "ProjectiveCpps":
        return replace(self, flat=self.flat.replace_mult(r, s, t, morphism))


def assemble_cpps(sys: ConvolutionSystem) -> ProjectiveCpps:
    times = sys.times
    builder = TBuilder(sys)
    spaces = {(s, t): sys.partition_space(times.grid(s, t)) for s, t in times.windows()}
    mults = {}
    for r, s, t in times.triples():
        domain = product([spaces[(r, s)], spaces[(s, t)]])
        mults[(r, s, t)] = ProbMorphism(domain, spaces[(r, t)], tuple(range(domain.size)))
    flat = ConvolutionSystem(times, spaces, mults, name=f"{sys.name}.flat" if sys.name else "flat")
    epis = {(s, t): builder.T(times.pair(s, t), times.grid(s, t)) for s, t in times.windows()}
    logger.debug("projective CPPS over %d windows", len(spaces))
    return ProjectiveCpps(sys, flat, SystemMorphism(flat, sys, epis), builder)


def build_cpps(sys: ConvolutionSystem) -> ProjectiveCpps:
    """Build the projective CPPS of ``sys`` and re-verify its laws.

    Raises:
        SystemConstructionError: If ``sys`` is invalid or a CPPS law fails.
    """
    require_valid(sys)
    cpps = assemble_cpps(sys)
    for result in verify_cpps(cpps):
        if not result.passed:
            raise SystemConstructionError(f"projective CPPS fails {result.name}: {result.witness}")
    return cpps


def verify_cpps(cpps: ProjectiveCpps) -> List[CheckResult]:
    """Isomorphic flat multiplications, the splitting identity, both
    associativity routes over K_{r,s,t,u}, and the flat system laws."""
    times = cpps.times
    results: List[CheckResult] = []

    failure = None
    for k, triple in enumerate(times.triples(), start=1):
        if not is_isomorphism(cpps.flat.mult(*triple)):
            failure = CheckResult.fail("cpps.isomorphic", k, Witness(location=f"triple {times.describe(*triple)}"))
            break
    results.append(failure or CheckResult.ok("cpps.isomorphic", len(times.triples())))

    failure = None
    checked = 0
    for r, s, t in times.triples():
        mult = cpps.flat.mult(r, s, t)
        for member in partitions_through(times, r, t, [s]):
            checked += 1
            left_part, right_part = split_at(member, s)
            lhs = compose(cpps.flat_projection(member), mult)
            rhs = product_morphism(
                [cpps.flat_projection(left_part), cpps.flat_projection(right_part)],
                domain=mult.domain,
                codomain=lhs.codomain,
            )
            failure = compare_maps("cpps.splitting", checked, f"triple {times.describe(r, s, t)} I={member}", lhs, rhs)
            if failure:
                break
        if failure:
            break
    results.append(failure or CheckResult.ok("cpps.splitting", checked))

    failure = None
    checked = 0
    for r, s, t, u in times.quadruples():
        rs, st, tu = cpps.space(r, s), cpps.space(s, t), cpps.space(t, u)
        triple_space = product([rs, st, tu])
        via_su = compose(
            cpps.flat.mult(r, s, u),
            product_morphism([identity(rs), cpps.flat.mult(s, t, u)], domain=triple_space, codomain=cpps.flat.mult(r, s, u).domain),
        )
        via_rt = compose(
            cpps.flat.mult(r, t, u),
            product_morphism([cpps.flat.mult(r, s, t), identity(tu)], domain=triple_space, codomain=cpps.flat.mult(r, t, u).domain),
        )
        for member in partitions_through(times, r, u, [s, t]):
            checked += 1
            head, rest = split_at(member, s)
            middle, tail = split_at(rest, t)
            pieces = product_morphism(
                [cpps.flat_projection(head), cpps.flat_projection(middle), cpps.flat_projection(tail)],
                domain=triple_space,
                codomain=cpps.base.partition_space(member),
            )
            where = f"quadruple {times.describe(r, s, t, u)} I={member}"
            proj = cpps.flat_projection(member)
            failure = (
                compare_maps("cpps.associative_routes", checked, f"{where} via (s,u)", compose(proj, via_su), pieces)
                or compare_maps("cpps.associative_routes", checked, f"{where} via (r,t)", compose(proj, via_rt), pieces)
            )
            if failure:
                break
        if failure:
            break
    results.append(failure or CheckResult.ok("cpps.associative_routes", checked))

    for result in check_system(cpps.flat):
        results.append(result.model_copy(update={"name": result.name.replace("system.", "cpps.flat_")}))
    return results


def check_tau(cpps: ProjectiveCpps) -> List[CheckResult]:
    """tau is a morphism of systems and every component is onto the support."""
    results = [
        r.model_copy(update={"name": r.name.replace("morphism.", "tau.")})
        for r in check_system_morphism(cpps.tau)
    ]
    failure = None
    windows = cpps.times.windows()
    for k, w in enumerate(windows, start=1):
        if not is_surjective_on_support(cpps.epi(*w)):
            failure = CheckResult.fail("tau.onto", k, Witness(location=f"window {cpps.times.describe(*w)}"))
            break
    results.append(failure or CheckResult.ok("tau.onto", len(windows)))
    return results


# ---------- Lifting isomorphisms ----------

def lift_isomorphism(
    theta: SystemMorphism,
    source: Optional[ProjectiveCpps] = None,
    target: Optional[ProjectiveCpps] = None,
) -> SystemMorphism:
    """Lift a componentwise isomorphism to the projective CPPSs.

    The lifted component on (s, t) applies theta on every adjacent cell of
    the full grid.

    Raises:
        SystemConstructionError: If a component is not an isomorphism or the
            lift fails its checks.
    """
    times = theta.source.times
    for w in times.windows():
        if not is_isomorphism(theta.theta[w]):
            raise SystemConstructionError(f"component {times.describe(*w)} is not an isomorphism")
    source = source or build_cpps(theta.source)
    target = target or build_cpps(theta.target)
    result = blockwise_lift(theta, source, target)
    for check in verify_lift(theta, result, source, target):
        if not check.passed:
            raise SystemConstructionError(f"lifted isomorphism fails {check.name}: {check.witness}")
    return result


def blockwise_lift(theta: SystemMorphism, source: ProjectiveCpps, target: ProjectiveCpps) -> SystemMorphism:
    """theta applied on every grid cell, without any checks."""
    times = source.times
    lifted = {
        (s, t): product_morphism(
            [theta.theta[cell] for cell in times.grid(s, t).cells],
            domain=source.space(s, t),
            codomain=target.space(s, t),
        )
        for s, t in times.windows()
    }
    return SystemMorphism(source.flat, target.flat, lifted)


def verify_lift(
    theta: SystemMorphism,
    lifted: SystemMorphism,
    source: ProjectiveCpps,
    target: ProjectiveCpps,
) -> List[CheckResult]:
    """theta o tau_1 = tau_2 o lifted, and the lift is a CPPS isomorphism."""
    times = source.times
    results: List[CheckResult] = []
    failure = None
    for k, w in enumerate(times.windows(), start=1):
        failure = compare_maps(
            "lift.square", k, f"window {times.describe(*w)}",
            compose(theta.theta[w], source.epi(*w)),
            compose(target.epi(*w), lifted.theta[w]),
        )
        if failure:
            break
    results.append(failure or CheckResult.ok("lift.square", len(times.windows())))
    results.extend(
        r.model_copy(update={"name": r.name.replace("morphism.", "lift.morphism_")})
        for r in check_system_morphism(lifted)
    )
    bad = next((w for w in times.windows() if not is_isomorphism(lifted.theta[w])), None)
    if bad is None:
        results.append(CheckResult.ok("lift.isomorphic", len(times.windows())))
    else:
        results.append(CheckResult.fail("lift.isomorphic", len(times.windows()), Witness(location=f"window {times.describe(*bad)}")))
    return results


# ---------- Flow system ----------

def assemble_flow(fam: ConnectingFamily) -> FlowSystem:
    """Increments X(s, t) = X_{{s,t}, top} on the limit of a global family."""
    limit = finite_projective_limit(fam)
    times = fam.system.times
    X = {(s, t): limit.projection(times.pair(s, t)) for s, t in times.windows()}
    return FlowSystem(limit.limit_space, X, fam.system)


def build_flow(sys: ConvolutionSystem) -> FlowSystem:
    """Flow system on the limit of the global family.

    Raises:
        SystemConstructionError: If ``sys`` is invalid or the flow axioms fail.
    """
    require_valid(sys)
    flow = assemble_flow(global_family(sys))
    for result in check_flow(flow):
        if not result.passed:
            raise SystemConstructionError(f"flow system fails {result.name}: {result.witness}")
    return flow


# ---------- Restriction maps ----------

@dataclass
class RestrictionMaps:
    """Maps Omega_flat(u, v) -> Omega_flat(s, t) for nested windows."""

    cpps: ProjectiveCpps
    maps: Dict[WindowPair, ProbMorphism]

    def get(self, inner: Window, outer: Window) -> ProbMorphism:
        return self.maps[(inner, outer)]

    def replace_map(self, inner: Window, outer: Window, morphism: ProbMorphism) -> "RestrictionMaps":
        maps = dict(self.maps)
        maps[(inner, outer)] = morphism
        return replace(self, maps=maps)


def nested_windows(cpps: ProjectiveCpps) -> List[WindowPair]:
    """All (inner, outer) with u <= s < t <= v, outer windows in order."""
    times = cpps.times
    windows = [PairWindow(times, s, t) for s, t in times.windows()]
    return [((w.s, w.t), (o.s, o.t)) for o in windows for w in windows if w.within(o)]


def _restriction(cpps: ProjectiveCpps, s: int, t: int, u: int, v: int) -> ProbMorphism:
    if (s, t) == (u, v):
        return identity(cpps.space(s, t))
    if u == s:
        split = inverse_on_support(cpps.flat.mult(s, t, v))
        return compose(coordinate_projection(split.codomain, [0], codomain=cpps.space(s, t)), split)
    if t == v:
        split = inverse_on_support(cpps.flat.mult(u, s, t))
        return compose(coordinate_projection(split.codomain, [1], codomain=cpps.space(s, t)), split)
    outer_split = inverse_on_support(cpps.flat.mult(u, s, v))
    inner_split = inverse_on_support(cpps.flat.mult(s, t, v))
    three = product([cpps.space(u, s), cpps.space(s, t), cpps.space(t, v)])
    spread = product_morphism([identity(cpps.space(u, s)), inner_split], domain=outer_split.codomain, codomain=three)
    return compose_all(coordinate_projection(three, [1]), spread, outer_split)


def build_restrictions(cpps: ProjectiveCpps) -> RestrictionMaps:
    """Restriction maps for every nested pair of windows (degenerate cases included)."""
    maps = {(inner, outer): _restriction(cpps, *inner, *outer) for inner, outer in nested_windows(cpps)}
    logger.debug("built %d restriction maps", len(maps))
    return RestrictionMaps(cpps, maps)


def verify_restrictions(restrictions: RestrictionMaps) -> CheckResult:
    """Each restriction agrees a.e. with the coordinate-window projection."""
    cpps = restrictions.cpps
    times = cpps.times
    pairs = list(restrictions.maps)
    for k, (inner, outer) in enumerate(pairs, start=1):
        direct = window_projection(cpps.base, times.grid(*outer), *inner)
        failure = compare_maps(
            "restrict.window", k, f"{times.describe(*inner)} in {times.describe(*outer)}",
            restrictions.get(inner, outer), direct,
        )
        if failure:
            return failure
    return CheckResult.ok("restrict.window", len(pairs))


def verify_ll1(cpps: ProjectiveCpps, restrictions: RestrictionMaps) -> CheckResult:
    """T_flat(I) o R_{(s,t),(u,v)} = X_{I,J} o T_flat(J) for I in K_{s,t}, J in K_{u,v}, I <= J."""
    times = cpps.times
    builder = cpps.builder
    checked = 0
    for inner, outer in nested_windows(cpps):
        restriction = restrictions.get(inner, outer)
        small_poset = enumerate_K(times, (times.label(inner[0]), times.label(inner[1])))
        big_poset = enumerate_K(times, (times.label(outer[0]), times.label(outer[1])))
        for big in big_poset:
            if inner[0] not in big or inner[1] not in big:
                continue
            for small in small_poset:
                if not small.issubset(big):
                    continue
                checked += 1
                lhs = compose(cpps.flat_projection(small), restriction)
                rhs = compose(builder.X(small, big), cpps.flat_projection(big))
                failure = compare_maps("ll1.restriction", checked, f"I={small} J={big}", lhs, rhs)
                if failure:
                    return failure
    return CheckResult.ok("ll1.restriction", checked)


def verify_projint(restrictions: RestrictionMaps) -> List[CheckResult]:
    """Restrictions compose over nested triples and push the flat measures forward."""
    cpps = restrictions.cpps
    times = cpps.times
    results: List[CheckResult] = []

    failure = None
    pairs = list(restrictions.maps)
    for k, (inner, outer) in enumerate(pairs, start=1):
        m = restrictions.get(inner, outer)
        witness = measure_preservation_witness(m)
        if witness is not None:
            failure = CheckResult.fail(
                "projint.marginal", k,
                Witness(location=f"{times.describe(*inner)} in {times.describe(*outer)}",
                        point=repr(m.codomain.outcomes[witness.index]),
                        expected=format_rational(witness.expected), actual=format_rational(witness.actual)),
            )
            break
        if not is_surjective_on_support(m):
            failure = CheckResult.fail("projint.marginal", k, Witness(location=f"{times.describe(*inner)} in {times.describe(*outer)} not onto"))
            break
    results.append(failure or CheckResult.ok("projint.marginal", len(pairs)))

    failure = None
    checked = 0
    for mid, outer in pairs:
        if mid == outer:
            continue
        for inner, around in pairs:
            if around != mid or inner == mid:
                continue
            checked += 1
            failure = compare_maps(
                "projint.compatible", checked,
                f"{times.describe(*inner)} in {times.describe(*mid)} in {times.describe(*outer)}",
                compose(restrictions.get(inner, mid), restrictions.get(mid, outer)),
                restrictions.get(inner, outer),
            )
            if failure:
                break
        if failure:
            break
    results.append(failure or CheckResult.ok("projint.compatible", checked))
    return results


# ---------- Upper bounds of the limits ----------

def verify_kimp(sys: ConvolutionSystem, fam: Optional[ConnectingFamily] = None) -> CheckResult:
    """T_flat(I) o pi_{s,t} = X_I on the global limit, for every window and I in K_{s,t}.

    Args:
        sys: The system.
        fam: Global family supplying X_I = X_{I, top}; built when None.
    """
    times = sys.times
    fam = fam or global_family(sys)
    builder = TBuilder(sys)
    grid = times.grid()
    checked = 0
    for s, t in times.windows():
        window = window_projection(sys, grid, s, t)
        for member in enumerate_K(times, (times.label(s), times.label(t))):
            checked += 1
            failure = compare_maps(
                "kimp.upper_bound", checked, f"I={member}",
                compose(builder.T(member, times.grid(s, t)), window),
                fam.morphism(member, grid),
            )
            if failure:
                return failure
    return CheckResult.ok("kimp.upper_bound", checked)


def verify_kimpa(sys: ConvolutionSystem, cpps: Optional[ProjectiveCpps] = None,
                 restrictions: Optional[RestrictionMaps] = None) -> List[CheckResult]:
    """Relate the global limit to the limit over nested windows.

    The global limit carries the window projections X_flat(s, t); the
    nested-window limit is Omega_flat(first, last) with the restrictions
    T'(s, t) onto each window. Both upper-bound relations are checked and
    the canonical bijection between the two limit spaces is exhibited.
    """
    cpps = cpps or build_cpps(sys)
    restrictions = restrictions or build_restrictions(cpps)
    times = sys.times
    builder = cpps.builder
    grid = times.grid()
    first, last = 0, len(times) - 1
    global_space = sys.partition_space(grid)
    x_flat = {w: window_projection(sys, grid, *w) for w in times.windows()}
    t_prime = {w: restrictions.get(w, (first, last)) for w in times.windows()}
    results: List[CheckResult] = []

    failure = None
    checked = 0
    for inner, outer in nested_windows(cpps):
        checked += 1
        failure = compare_maps(
            "kimpa.flat_upper_bound", checked, f"{times.describe(*inner)} in {times.describe(*outer)}",
            compose(restrictions.get(inner, outer), x_flat[outer]),
            x_flat[inner],
        )
        if failure:
            break
    results.append(failure or CheckResult.ok("kimpa.flat_upper_bound", checked))

    failure = None
    checked = 0
    for inner, outer in nested_windows(cpps):
        bigs = enumerate_K(times, (times.label(outer[0]), times.label(outer[1])))
        smalls = enumerate_K(times, (times.label(inner[0]), times.label(inner[1])))
        for big in bigs:
            for small in smalls:
                if not small.issubset(big):
                    continue
                checked += 1
                failure = compare_maps(
                    "kimpa.window_upper_bound", checked, f"I={small} J={big}",
                    compose(cpps.flat_projection(small), t_prime[inner]),
                    compose_all(builder.X(small, big), cpps.flat_projection(big), t_prime[outer]),
                )
                if failure:
                    break
            if failure:
                break
        if failure:
            break
    results.append(failure or CheckResult.ok("kimpa.window_upper_bound", checked))

    window_space = cpps.space(first, last)
    bijection = ProbMorphism(global_space, window_space, tuple(range(global_space.size)))
    failure = None
    if not is_isomorphism(bijection):
        failure = CheckResult.fail("kimpa.bijection", 1, Witness(location="global limit vs nested-window limit"))
    else:
        for k, w in enumerate(times.windows(), start=1):
            failure = compare_maps("kimpa.bijection", k, f"window {times.describe(*w)}",
                                   compose(t_prime[w], bijection), x_flat[w])
            if failure:
                break
    results.append(failure or CheckResult.ok("kimpa.bijection", len(times.windows())))

    families: List[ConnectingFamily] = [global_family(sys)] + [interval_family(sys, *w) for w in times.windows()]
    maximal = [fam.label for fam in families if not check_simply_maximal(fam)]
    if maximal:
        results.append(CheckResult.fail("kimpa.simply_maximal", len(families), Witness(location=maximal[0])))
    else:
        results.append(CheckResult.ok("kimpa.simply_maximal", len(families)))
    return results
