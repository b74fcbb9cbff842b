"""Unit tests for projective CPPSs, lifts, flows, restriction maps and the limit comparisons."""
import itertools
import sys
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from convlim.convsys import (
    FlowSystem,
    check_flow,
    cyclic_group,
    from_idempotent,
    from_semigroup_generator,
    semigroup_morphism,
)
from convlim.cpps_flow import (
    blockwise_lift,
    build_cpps,
    build_flow,
    build_restrictions,
    check_tau,
    lift_isomorphism,
    nested_windows,
    verify_cpps,
    verify_kimp,
    verify_kimpa,
    verify_lift,
    verify_ll1,
    verify_projint,
    verify_restrictions,
)
from convlim.errors import SystemConstructionError
from convlim.finprob import FinProbSpace, ProbMorphism, compose, coordinate_projection, product
from convlim.order_partition import TimeSet
from tests.conftest import NON_COMMUTATIVE, SEMIGROUPS, generated_systems

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


def by_name(results):
    return {r.name: r for r in results}


def all_passed(results):
    return all(r.passed for r in results)


@pytest.fixture
def cpps_a(system_a):
    return build_cpps(system_a)


@pytest.mark.unit
class TestProjectiveCpps:
    """Flat spaces, concatenation multiplications and the epimorphism tau."""

    def test_flat_system_shapes(self, cpps_a, system_a):
        assert cpps_a.space(0, 3).size == 8
        assert cpps_a.space(1, 2) == system_a.space(1, 2)
        assert cpps_a.flat.is_cpps
        assert not system_a.is_cpps

    def test_laws_hold(self, cpps_a):
        results = verify_cpps(cpps_a)
        assert {"cpps.isomorphic", "cpps.splitting", "cpps.associative_routes", "cpps.flat_associative"} <= set(by_name(results))
        assert all_passed(results)

    def test_tau(self, cpps_a):
        results = check_tau(cpps_a)
        assert [r.name for r in results] == ["tau.measure_preserving", "tau.square", "tau.onto"]
        assert all_passed(results)

    def test_epi_is_the_fold(self, cpps_a):
        assert cpps_a.epi(0, 3).table == tuple((a + b + c) % 2 for a, b, c in itertools.product(range(2), repeat=3))

    def test_invalid_base_is_rejected(self, system_a):
        mult = system_a.mult(1, 2, 3)
        broken = system_a.replace_mult(1, 2, 3, ProbMorphism(mult.domain, mult.codomain, (0, 0, 0, 0)))
        with pytest.raises(SystemConstructionError, match="system.measure_preserving"):
            build_cpps(broken)

    def test_reordered_concatenation_breaks_splitting(self, cpps_a):
        mult = cpps_a.flat.mult(0, 1, 2)
        reordered = cpps_a.replace_flat_mult(0, 1, 2, ProbMorphism(mult.domain, mult.codomain, (3, 2, 1, 0)))
        results = by_name(verify_cpps(reordered))
        assert results["cpps.isomorphic"].passed
        assert not results["cpps.splitting"].passed

    def test_constant_epi_fails_tau(self, cpps_a):
        epi = cpps_a.epi(0, 2)
        broken = cpps_a.replace_epi(0, 2, ProbMorphism(epi.domain, epi.codomain, (0,) * epi.domain.size))
        results = by_name(check_tau(broken))
        assert not results["tau.measure_preserving"].passed
        assert not results["tau.onto"].passed

    def test_trivial_semigroup_base(self):
        base = from_idempotent(cyclic_group(1), (1,), TimeSet.range(3))
        cpps = build_cpps(base)
        assert cpps.space(0, 2).size == 1


@pytest.mark.unit
class TestLifts:
    """Automorphisms lift blockwise to the flat systems."""

    def test_doubling_on_z5(self, system_z5):
        theta = semigroup_morphism(system_z5, system_z5, (0, 2, 4, 1, 3))
        lifted = lift_isomorphism(theta)
        assert lifted.component(0, 2).domain.size == 25
        cpps = build_cpps(system_z5)
        assert all_passed(verify_lift(theta, lifted, cpps, cpps))

    def test_non_isomorphism_is_rejected(self):
        times = TimeSet.range(3)
        z4 = from_idempotent(cyclic_group(4), (QUARTER,) * 4, times)
        z2 = from_idempotent(cyclic_group(2), (HALF, HALF), times)
        with pytest.raises(SystemConstructionError, match="not an isomorphism"):
            lift_isomorphism(semigroup_morphism(z4, z2, (0, 1, 0, 1)))

    def test_wrong_lift_breaks_square(self, system_z5):
        cpps = build_cpps(system_z5)
        theta = semigroup_morphism(system_z5, system_z5, (0, 2, 4, 1, 3))
        identity_theta = semigroup_morphism(system_z5, system_z5, tuple(range(5)))
        wrong = blockwise_lift(identity_theta, cpps, cpps)
        results = by_name(verify_lift(theta, wrong, cpps, cpps))
        assert not results["lift.square"].passed
        assert results["lift.isomorphic"].passed
        assert results["lift.morphism_square"].passed

    def test_check_names_are_unique(self, system_z5):
        cpps = build_cpps(system_z5)
        theta = semigroup_morphism(system_z5, system_z5, (0, 2, 4, 1, 3))
        identity_theta = semigroup_morphism(system_z5, system_z5, tuple(range(5)))
        for lifted in (lift_isomorphism(theta), blockwise_lift(identity_theta, cpps, cpps)):
            names = [r.name for r in verify_lift(theta, lifted, cpps, cpps)]
            assert len(names) == len(set(names))
            assert names == ["lift.square", "lift.morphism_measure_preserving", "lift.morphism_square", "lift.isomorphic"]


@pytest.mark.unit
class TestFlowSystems:
    """Flows built on the global limit."""

    def test_fixture_b_law(self, system_b):
        flow = build_flow(system_b)
        assert flow.base.size == 9
        assert flow.X[(0, 2)].pushforward() == (QUARTER, HALF, QUARTER)
        assert flow.X[(1, 2)].pushforward() == (HALF, HALF, 0)

    def test_fixture_a_flow_passes(self, system_a):
        results = check_flow(build_flow(system_a))
        assert [r.name for r in results] == ["flow.laws", "flow.generating", "flow.independent", "flow.composition"]
        assert all_passed(results)

    def test_constant_increment_breaks_laws(self, system_a):
        flow = build_flow(system_a)
        x = flow.X[(0, 1)]
        constant = ProbMorphism(flow.base, x.codomain, (0,) * flow.base.size)
        results = by_name(check_flow(flow.replace_increment(0, 1, constant)))
        assert not results["flow.laws"].passed

    def test_extra_coin_breaks_generating(self, system_a):
        flow = build_flow(system_a)
        extended = product([flow.base, FinProbSpace.uniform(["u", "v"])])
        forget = coordinate_projection(extended, [0])
        widened = FlowSystem(extended, {w: compose(x, forget) for w, x in flow.X.items()}, system_a)
        results = by_name(check_flow(widened))
        assert not results["flow.generating"].passed
        assert results["flow.generating"].witness.location == "atom of the increments"
        assert results["flow.laws"].passed
        assert results["flow.independent"].passed
        assert results["flow.composition"].passed


@pytest.mark.unit
class TestRestrictions:
    """Restriction maps between nested windows of the flat system."""

    def test_nested_pairs(self, cpps_a):
        pairs = nested_windows(cpps_a)
        assert len(pairs) == 15
        assert ((1, 2), (0, 3)) in pairs
        assert ((0, 3), (0, 3)) in pairs
        assert ((0, 2), (1, 3)) not in pairs

    def test_middle_restriction(self, cpps_a):
        restrictions = build_restrictions(cpps_a)
        middle = restrictions.get((1, 2), (0, 3))
        assert middle.table == tuple(b for _, b, _ in itertools.product(range(2), repeat=3))
        assert verify_restrictions(restrictions).passed

    def test_ll1_and_projint(self, cpps_a):
        restrictions = build_restrictions(cpps_a)
        assert verify_ll1(cpps_a, restrictions).passed
        results = verify_projint(restrictions)
        assert [r.name for r in results] == ["projint.marginal", "projint.compatible"]
        assert all_passed(results)

    def test_corrupted_restriction(self, cpps_a):
        restrictions = build_restrictions(cpps_a)
        m = restrictions.get((0, 1), (0, 3))
        broken = restrictions.replace_map((0, 1), (0, 3), ProbMorphism(m.domain, m.codomain, (0,) * m.domain.size))
        assert not by_name(verify_projint(broken))["projint.marginal"].passed
        assert not verify_ll1(cpps_a, broken).passed
        assert not verify_restrictions(broken).passed


@pytest.mark.unit
class TestLimitComparisons:
    """The global limit against the flat and nested-window limits."""

    def test_kimp(self, system_a, system_b):
        assert verify_kimp(system_a).passed
        assert verify_kimp(system_b).passed

    def test_kimpa(self, system_a):
        results = verify_kimpa(system_a)
        assert [r.name for r in results] == [
            "kimpa.flat_upper_bound",
            "kimpa.window_upper_bound",
            "kimpa.bijection",
            "kimpa.simply_maximal",
        ]
        assert all_passed(results)

    def test_kimpa_on_fixture_b(self, system_b):
        assert all_passed(verify_kimpa(system_b))


@pytest.mark.unit
class TestRandomizedCpps:
    """Generated systems, commutative or not, yield a valid projective CPPS and flow."""

    @settings(max_examples=15, deadline=None)
    @given(generated_systems(max_times=3, min_count=1))
    def test_generated_cpps(self, system):
        cpps = build_cpps(system)
        assert all_passed(check_tau(cpps))
        restrictions = build_restrictions(cpps)
        assert verify_ll1(cpps, restrictions).passed
        assert all_passed(verify_projint(restrictions))

    @settings(max_examples=15, deadline=None)
    @given(generated_systems(max_times=3, min_count=1))
    def test_generated_flow(self, system):
        assert all_passed(check_flow(build_flow(system)))

    @pytest.mark.parametrize("name", NON_COMMUTATIVE)
    def test_non_commutative_bases(self, name):
        sg = SEMIGROUPS[name]
        system = from_semigroup_generator(sg, (Fraction(1, sg.size),) * sg.size, TimeSet.range(3))
        assert all_passed(check_tau(build_cpps(system)))
        assert all_passed(check_flow(build_flow(system)))
