"""L2 spaces over finite probability spaces and Koopman operators.

L2(mu) is R^n with the weighted inner product <f, g> = sum mu(x) f(x) g(x).
A measure-preserving map T: (Omega, mu) -> (Omega', mu') induces the
composition operator U_T f = f o T, a 0/1 matrix of shape
(|Omega|, |Omega'|) with entry (x, T(x)) set. Operator matrices are
integer arrays (exact); inner products and Gram matrices use Fractions.

Tensor products follow the numpy ``kron`` convention, which matches the
row-major indexing of product spaces: indicator(i) (x) indicator(j) is
index i * |nu| + j of L2(mu x nu).

Outcomes of weight zero span the null kernel of the inner product; every
operator identity here is compared on positive-weight rows only.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .convsys import ConvolutionSystem, SystemMorphism
from .cpps_flow import ProjectiveCpps, build_cpps
from .errors import MeasureError
from .finprob import FinProbSpace, ProbMorphism, compose, is_isomorphism, product
from .order_partition import Partition, TimeSet, Window, enumerate_K, partitions_through, split_at
from .projective import ConnectingFamily, TBuilder
from .protocols import CheckResult, Witness

logger = logging.getLogger(__name__)

Triple = Tuple[int, int, int]


def _weights(space: FinProbSpace) -> np.ndarray:
    return np.array(space.weights, dtype=object)


def first_row_mismatch(first: np.ndarray, second: np.ndarray, weights: Sequence[Fraction]) -> Optional[int]:
    """First positive-weight row where two matrices differ, or None."""
    if first.shape != second.shape:
        return -1
    for row, w in enumerate(weights):
        if w > 0 and not np.array_equal(first[row], second[row]):
            return row
    return None


# ---------- Hilbert spaces ----------

@dataclass(frozen=True)
class HilbertRep:
    """L2 of a finite probability space in the indicator basis."""

    base: FinProbSpace

    @property
    def dimension(self) -> int:
        return self.base.size

    def gram(self) -> np.ndarray:
        """Gram matrix of the indicator basis: diag(weights)."""
        gram = np.full((self.dimension, self.dimension), Fraction(0), dtype=object)
        np.fill_diagonal(gram, _weights(self.base))
        return gram

    def inner(self, f: Sequence, g: Sequence) -> Fraction:
        return sum((w * Fraction(a) * Fraction(b) for w, a, b in zip(self.base.weights, f, g)), Fraction(0))


def pullback_gram(matrix: np.ndarray, target: FinProbSpace) -> np.ndarray:
    """M^T diag(w) M with exact rational arithmetic."""
    m = matrix.astype(object)
    return (m.T * _weights(target)[None, :]) @ m


def is_isometry(matrix: np.ndarray, source: FinProbSpace, target: FinProbSpace) -> bool:
    """<M f, M g>_target = <f, g>_source for all basis pairs."""
    return np.array_equal(pullback_gram(matrix, target), HilbertRep(source).gram())


def exact_rank(matrix: np.ndarray) -> int:
    """Rank by Gaussian elimination over Fraction."""
    rows = [[Fraction(v) for v in row] for row in np.asarray(matrix, dtype=object).tolist()]
    rank = 0
    width = len(rows[0]) if rows else 0
    for col in range(width):
        pivot = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        lead = rows[rank]
        for i in range(rank + 1, len(rows)):
            factor = rows[i][col] / lead[col]
            if factor:
                rows[i] = [a - factor * b for a, b in zip(rows[i], lead)]
        rank += 1
    return rank


def is_unitary(matrix: np.ndarray, source: FinProbSpace, target: FinProbSpace) -> bool:
    """Isometric and onto, modulo the null kernels of both spaces.

    ``matrix`` maps L2(source) into L2(target); rows index ``target``.
    """
    if not is_isometry(matrix, source, target):
        return False
    rows, cols = list(target.support), list(source.support)
    if not rows:
        return not cols
    return exact_rank(matrix[np.ix_(rows, cols)]) == len(rows)


@dataclass(frozen=True)
class KoopmanOperator:
    """U_T: L2(codomain) -> L2(domain), f -> f o T."""

    morphism: ProbMorphism
    matrix: np.ndarray = field(compare=False, repr=False)

    @property
    def source(self) -> FinProbSpace:
        return self.morphism.codomain

    @property
    def target(self) -> FinProbSpace:
        return self.morphism.domain

    def apply(self, f: Sequence) -> List:
        return [f[y] for y in self.morphism.table]


def koopman_matrix(morphism: ProbMorphism) -> np.ndarray:
    matrix = np.zeros((morphism.domain.size, morphism.codomain.size), dtype=np.int64)
    matrix[np.arange(morphism.domain.size), list(morphism.table)] = 1
    return matrix


def koopman(morphism: ProbMorphism) -> KoopmanOperator:
    """Koopman isometry of a measure-preserving map.

    Raises:
        MeasureError: If the map is not measure-preserving.
    """
    morphism.require_measure_preserving("Koopman source map")
    matrix = koopman_matrix(morphism)
    if not is_isometry(matrix, morphism.codomain, morphism.domain):
        raise MeasureError("composition operator is not an isometry")
    return KoopmanOperator(morphism, matrix)


@dataclass(frozen=True)
class TensorIdentification:
    """Index bijection L2(mu x nu) <-> L2(mu) (x) L2(nu)."""

    left: FinProbSpace
    right: FinProbSpace

    def to_pair(self, index: int) -> Tuple[int, int]:
        return divmod(index, self.right.size)

    def from_pair(self, i: int, j: int) -> int:
        return i * self.right.size + j

    def verify(self) -> bool:
        """Inner products correspond: Gram(mu x nu) = Gram(mu) (x) Gram(nu)."""
        joint = HilbertRep(product([self.left, self.right])).gram()
        return np.array_equal(joint, np.kron(HilbertRep(self.left).gram(), HilbertRep(self.right).gram()))


def tensor_identify(mu: FinProbSpace, nu: FinProbSpace) -> TensorIdentification:
    return TensorIdentification(mu, nu)


# ---------- Subproduct systems ----------

@dataclass
class SubproductSystem:
    """Spaces H(s, t) and isometries U(r, s, t): H(r, t) -> H(r, s) (x) H(s, t)."""

    times: TimeSet
    spaces: Dict[Window, FinProbSpace]
    isometries: Dict[Triple, np.ndarray]

    def tensor_space(self, r: int, s: int, t: int) -> FinProbSpace:
        return product([self.spaces[(r, s)], self.spaces[(s, t)]])


def l2_of_system(sys: ConvolutionSystem) -> SubproductSystem:
    """H(s, t) = L2(mu_{s,t}), U(r, s, t) = Koopman of mult(r, s, t) under the tensor identification."""
    isometries = {triple: koopman(sys.mult(*triple)).matrix for triple in sys.times.triples()}
    return SubproductSystem(sys.times, dict(sys.spaces), isometries)


def verify_subproduct(sp: SubproductSystem, unitary: Optional[Dict[Triple, bool]] = None,
                      prefix: str = "l2") -> List[CheckResult]:
    """Isometry and co-associativity; optionally unitarity against expectations.

    Args:
        sp: The system.
        unitary: Expected unitarity per triple (e.g. whether the underlying
            multiplication is an isomorphism).
        prefix: Check-name prefix.
    """
    times = sp.times
    results: List[CheckResult] = []

    failure = None
    for k, (r, s, t) in enumerate(times.triples(), start=1):
        if not is_isometry(sp.isometries[(r, s, t)], sp.spaces[(r, t)], sp.tensor_space(r, s, t)):
            failure = CheckResult.fail(f"{prefix}.isometry", k, Witness(location=f"triple {times.describe(r, s, t)}"))
            break
    results.append(failure or CheckResult.ok(f"{prefix}.isometry", len(times.triples())))

    failure = None
    checked = 0
    for r, s, t, u in times.quadruples():
        checked += 1
        left = np.kron(np.eye(sp.spaces[(r, s)].size, dtype=np.int64), sp.isometries[(s, t, u)]) @ sp.isometries[(r, s, u)]
        right = np.kron(sp.isometries[(r, s, t)], np.eye(sp.spaces[(t, u)].size, dtype=np.int64)) @ sp.isometries[(r, t, u)]
        weights = product([sp.spaces[(r, s)], sp.spaces[(s, t)], sp.spaces[(t, u)]]).weights
        row = first_row_mismatch(left, right, weights)
        if row is not None:
            failure = CheckResult.fail(f"{prefix}.coassociative", checked,
                                       Witness(location=f"quadruple {times.describe(r, s, t, u)}", point=f"row {row}"))
            break
    results.append(failure or CheckResult.ok(f"{prefix}.coassociative", checked))

    if unitary is not None:
        failure = None
        count = 0
        for k, triple in enumerate(times.triples(), start=1):
            r, s, t = triple
            got = is_unitary(sp.isometries[triple], sp.spaces[(r, t)], sp.tensor_space(r, s, t))
            count += got
            if got != unitary[triple]:
                failure = CheckResult.fail(f"{prefix}.unitary", k, Witness(location=f"triple {times.describe(*triple)}",
                                                                          expected=str(unitary[triple]), actual=str(got)))
                break
        results.append(failure or CheckResult.ok(f"{prefix}.unitary", len(times.triples()),
                                                  detail=f"{count} of {len(times.triples())} unitary"))
    return results


def verify_l2(sys: ConvolutionSystem, base: Optional[SubproductSystem] = None,
              flat: Optional[SubproductSystem] = None) -> List[CheckResult]:
    """L2 of the system and of its projective CPPS; unitary exactly on isomorphisms.

    Args:
        sys: The system.
        base: L2 of ``sys``; built when None.
        flat: L2 of the projective CPPS; built when None.
    """
    base = base or l2_of_system(sys)
    results = verify_subproduct(base, {t: is_isomorphism(sys.mult(*t)) for t in sys.times.triples()})
    flat = flat or l2_of_system(build_cpps(sys).flat)
    results += verify_subproduct(flat, {t: True for t in sys.times.triples()}, prefix="l2.flat")
    failure = None
    for k, triple in enumerate(sys.times.triples(), start=1):
        r, s, t = triple
        if not tensor_identify(sys.space(r, s), sys.space(s, t)).verify():
            failure = CheckResult.fail("l2.tensor", k, Witness(location=f"triple {sys.times.describe(*triple)}"))
            break
    results.append(failure or CheckResult.ok("l2.tensor", len(sys.times.triples())))
    return results


# ---------- Koopman functoriality ----------

def koopman_of_morphism_family(morphism: SystemMorphism) -> Dict[Window, KoopmanOperator]:
    """U_theta(s, t): L2 of the target system -> L2 of the source system."""
    return {w: koopman(m) for w, m in morphism.theta.items()}


def verify_koopman_morphism(morphism: SystemMorphism) -> CheckResult:
    """U_{T(r,s,t)} U_theta(r,t) = (U_theta(r,s) (x) U_theta(s,t)) U_{T'(r,s,t)}."""
    src, tgt = morphism.source, morphism.target
    ops = koopman_of_morphism_family(morphism)
    times = src.times
    for k, (r, s, t) in enumerate(times.triples(), start=1):
        left = koopman(src.mult(r, s, t)).matrix @ ops[(r, t)].matrix
        right = np.kron(ops[(r, s)].matrix, ops[(s, t)].matrix) @ koopman(tgt.mult(r, s, t)).matrix
        row = first_row_mismatch(left, right, src.mult(r, s, t).domain.weights)
        if row is not None:
            return CheckResult.fail("l2.morphism", k, Witness(location=f"triple {times.describe(r, s, t)}", point=f"row {row}"))
    return CheckResult.ok("l2.morphism", len(times.triples()))


def verify_koopman_functoriality(fam: ConnectingFamily) -> CheckResult:
    """U_{A o B} = U_B U_A over every composable pair of the family."""
    name = f"l2.functorial[{fam.label}]"
    checked = 0
    for a, b, c in fam.poset.chains():
        if a.points == b.points or b.points == c.points:
            continue
        checked += 1
        outer, inner = fam.morphism(a, b), fam.morphism(b, c)
        composed = koopman_matrix(compose(outer, inner))
        chained = koopman_matrix(inner) @ koopman_matrix(outer)
        row = first_row_mismatch(composed, chained, inner.domain.weights)
        if row is not None:
            return CheckResult.fail(name, checked, Witness(location=f"chain {a} <= {b} <= {c}", point=f"row {row}"))
    return CheckResult.ok(name, checked)


# ---------- Inductive limits and the product system H ----------

@dataclass
class InductiveLimitSpace:
    """H(s, t) realized as L2 of the full-grid space with embeddings V_I."""

    window: Window
    space: HilbertRep
    embeddings: Dict[Tuple[int, ...], np.ndarray]
    builder: TBuilder

    def V(self, partition: Partition) -> np.ndarray:
        return self.embeddings[partition.points]


def inductive_limit(sys: ConvolutionSystem, s: int, t: int, builder: Optional[TBuilder] = None) -> InductiveLimitSpace:
    """V_I = Koopman of T_{I, grid(s, t)} for every I in K_{s,t}."""
    builder = builder or TBuilder(sys)
    times = sys.times
    grid = times.grid(s, t)
    embeddings = {
        member.points: koopman(builder.T(member, grid)).matrix
        for member in enumerate_K(times, (times.label(s), times.label(t)))
    }
    return InductiveLimitSpace((s, t), HilbertRep(sys.partition_space(grid)), embeddings, builder)


def verify_inductive(limit: InductiveLimitSpace) -> CheckResult:
    """V_J U_{T_{I,J}} = V_I for every I <= J."""
    sys = limit.builder.sys
    times = sys.times
    s, t = limit.window
    poset = enumerate_K(times, (times.label(s), times.label(t)))
    weights = limit.space.base.weights
    pairs = list(poset.pairs())
    for k, (a, b) in enumerate(pairs, start=1):
        routed = limit.V(b) @ koopman_matrix(limit.builder.T(a, b))
        row = first_row_mismatch(routed, limit.V(a), weights)
        if row is not None:
            return CheckResult.fail("ps.inductive", k, Witness(location=f"I={a} J={b}", point=f"row {row}"))
    return CheckResult.ok("ps.inductive", len(pairs))


@dataclass
class ProductSystemH:
    """Inductive limits H(s, t) with unitaries U(r, s, t)."""

    system: ConvolutionSystem
    limits: Dict[Window, InductiveLimitSpace]
    unitaries: Dict[Triple, np.ndarray]

    def as_subproduct(self) -> SubproductSystem:
        spaces = {w: lim.space.base for w, lim in self.limits.items()}
        return SubproductSystem(self.system.times, spaces, dict(self.unitaries))


def product_system_H(sys: ConvolutionSystem) -> ProductSystemH:
    """U(r, s, t) determined by U V_I = V_{I_s} (x) V_{sI} at I = grid(r, t)."""
    times = sys.times
    builder = TBuilder(sys)
    limits = {w: inductive_limit(sys, *w, builder=builder) for w in times.windows()}
    unitaries = {}
    for r, s, t in times.triples():
        grid = times.grid(r, t)
        head, tail = split_at(grid, s)
        unitaries[(r, s, t)] = np.kron(limits[(r, s)].V(head), limits[(s, t)].V(tail)) @ limits[(r, t)].V(grid).T
    return ProductSystemH(sys, limits, unitaries)


def verify_product_system_H(ph: ProductSystemH) -> List[CheckResult]:
    """Defining identity for all I in K_{r,s,t}, plus unitarity and co-associativity."""
    sys = ph.system
    times = sys.times
    results = [verify_inductive(lim) for lim in ph.limits.values()]
    failure = None
    checked = 0
    for r, s, t in times.triples():
        u = ph.unitaries[(r, s, t)]
        weights = product([ph.limits[(r, s)].space.base, ph.limits[(s, t)].space.base]).weights
        for member in partitions_through(times, r, t, [s]):
            checked += 1
            head, tail = split_at(member, s)
            row = first_row_mismatch(
                u @ ph.limits[(r, t)].V(member),
                np.kron(ph.limits[(r, s)].V(head), ph.limits[(s, t)].V(tail)),
                weights,
            )
            if row is not None:
                failure = CheckResult.fail("ps.splitting", checked, Witness(location=f"triple {times.describe(r, s, t)} I={member}",
                                                                          point=f"row {row}"))
                break
        if failure:
            break
    results.append(failure or CheckResult.ok("ps.splitting", checked))
    sp = ph.as_subproduct()
    results += verify_subproduct(sp, {t: True for t in times.triples()}, prefix="ps.H")
    return results


def theta_matrices(ph: ProductSystemH, cpps: ProjectiveCpps) -> Dict[Window, np.ndarray]:
    """theta(s, t) = U_{T_flat(grid)} V_grid^T, the unitary with theta V_I = U_{T_flat(I)}."""
    times = ph.system.times
    return {
        (s, t): koopman(cpps.flat_projection(times.grid(s, t))).matrix @ ph.limits[(s, t)].V(times.grid(s, t)).T
        for s, t in times.windows()
    }


def verify_theorem_ps(sys: ConvolutionSystem, cpps: Optional[ProjectiveCpps] = None,
                      ph: Optional[ProductSystemH] = None) -> List[CheckResult]:
    """H is isomorphic to L2 of the projective CPPS through theta.

    theta(s, t) V_I = U_{T_flat(I)} for every I, and theta intertwines the
    unitaries of H with the Koopman unitaries of the flat multiplications.
    """
    cpps = cpps or build_cpps(sys)
    ph = ph or product_system_H(sys)
    thetas = theta_matrices(ph, cpps)
    times = sys.times
    results = verify_product_system_H(ph)

    failure = None
    checked = 0
    for s, t in times.windows():
        theta = thetas[(s, t)]
        flat_space = cpps.space(s, t)
        if not is_unitary(theta, ph.limits[(s, t)].space.base, flat_space):
            failure = CheckResult.fail("ps.theta", checked + 1, Witness(location=f"window {times.describe(s, t)} not unitary"))
            break
        for member in enumerate_K(times, (times.label(s), times.label(t))):
            checked += 1
            row = first_row_mismatch(theta @ ph.limits[(s, t)].V(member),
                                     koopman_matrix(cpps.flat_projection(member)), flat_space.weights)
            if row is not None:
                failure = CheckResult.fail("ps.theta", checked, Witness(location=f"I={member}", point=f"row {row}"))
                break
        if failure:
            break
    results.append(failure or CheckResult.ok("ps.theta", checked))

    failure = None
    for k, (r, s, t) in enumerate(times.triples(), start=1):
        left = np.kron(thetas[(r, s)], thetas[(s, t)]) @ ph.unitaries[(r, s, t)]
        right = koopman_matrix(cpps.flat.mult(r, s, t)) @ thetas[(r, t)]
        row = first_row_mismatch(left, right, cpps.flat.mult(r, s, t).domain.weights)
        if row is not None:
            failure = CheckResult.fail("ps.intertwines", k, Witness(location=f"triple {times.describe(r, s, t)}", point=f"row {row}"))
            break
    results.append(failure or CheckResult.ok("ps.intertwines", len(times.triples())))
    return results
