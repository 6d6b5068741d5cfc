"""Shared helpers: constraint builders, box enumeration, random instance
generator, and instrumentation probes used by the validity and
termination suites."""

import itertools
import random

import pytest

from intsat.model import Bound, Constraint, Monomial, Objective, Problem
from intsat.search import Solver, SolverConfig
from intsat.trail import termination_measure


def C(terms, rhs):
    """Raw constraint from (var, coeff) pairs; no normalisation."""
    return Constraint(tuple(Monomial(v, c) for v, c in sorted(terms)), rhs)


def lo(var, value):
    return Bound(var, True, value)


def up(var, value):
    return Bound(var, False, value)


def box_points(lbs, ubs):
    return itertools.product(*(range(l, u + 1) for l, u in zip(lbs, ubs)))


def feasible_points(problem):
    """All box points satisfying every constraint (exhaustive)."""
    return [
        pt for pt in box_points(problem.initial_lb, problem.initial_ub)
        if all(c.satisfied_by(pt) for c in problem.constraints)
    ]


def satisfies_bounds(pt, bounds):
    return all(b.satisfied_by(pt[b.var]) for b in bounds)


def entailed(problem, assumptions, bound):
    """True iff constraints + box + assumption bounds entail `bound`."""
    for pt in box_points(problem.initial_lb, problem.initial_ub):
        if not all(c.satisfied_by(pt) for c in problem.constraints):
            continue
        if not satisfies_bounds(pt, assumptions):
            continue
        if not bound.satisfied_by(pt[bound.var]):
            return False
    return True


def random_problem(rng, max_vars=5, dom_lo=-4, dom_hi=4, max_cons=8,
                   max_coeff=5, objective="maybe", max_points=20000):
    """Random bounded instance; the box volume is capped so the
    enumeration oracle stays fast.

    Right-hand sides are anchored at a random box point so instances are
    a healthy mix of feasible and infeasible rather than mostly refuted
    at the root; a share of instances is all-binary with unit
    coefficients to exercise the clause and binary-graph tiers.
    """
    from intsat.model import normalize

    n = rng.randint(1, max_vars)
    binary_heavy = rng.random() < 0.3
    while True:
        if binary_heavy:
            lbs = [0] * n
            ubs = [1] * n
        else:
            lbs = [rng.randint(dom_lo, dom_hi) for _ in range(n)]
            ubs = [min(dom_hi, lb + rng.randint(0, dom_hi - dom_lo)) for lb in lbs]
        size = 1
        for l, u in zip(lbs, ubs):
            size *= u - l + 1
        if size <= max_points:
            break
    anchor = [rng.randint(l, u) for l, u in zip(lbs, ubs)]
    if binary_heavy:
        coeffs = [-1, 1]
    else:
        coeffs = [c for c in range(-max_coeff, max_coeff + 1) if c != 0]
    constraints = []
    for _ in range(rng.randint(1, max_cons)):
        k = rng.randint(1, n)
        terms = [(v, rng.choice(coeffs)) for v in rng.sample(range(n), k)]
        at_anchor = sum(c * anchor[v] for v, c in terms)
        offset = rng.randint(0, 5) if rng.random() < 0.85 else rng.randint(-3, -1)
        c = normalize(terms, at_anchor + offset)
        if not c.is_tautology():
            constraints.append(c)
    obj = None
    want_obj = objective is True or (objective == "maybe" and rng.random() < 0.5)
    if want_obj:
        terms = {v: rng.randint(-max_coeff, max_coeff)
                 for v in rng.sample(range(n), rng.randint(1, n))}
        terms = {v: c for v, c in terms.items() if c != 0}
        obj = Objective(terms or {0: 1})
    return Problem(n, lbs, ubs, constraints, obj)


class MeasureProbe:
    """Asserts the lexicographic strict decrease of the termination
    measure at every push; restarts and cleanups reset the baseline."""

    def __init__(self):
        self.baseline = None
        self.violations = 0
        self.checks = 0

    def _measure(self, solver):
        return termination_measure(
            solver.trail, solver.problem.initial_lb, solver.problem.initial_ub)

    def after_push(self, solver):
        m = self._measure(solver)
        if self.baseline is not None:
            self.checks += 1
            if not m < self.baseline:
                self.violations += 1
        self.baseline = m

    def reset(self, solver):
        self.baseline = None


class ValidityProbe(MeasureProbe):
    """Collects conflict-analysis outputs and conflicting-set snapshots
    for the validity suite; inherits the measure bookkeeping.

    Every record carries the objective-strengthening constraint active at
    that moment: validity properties are stated over the solver's current
    constraint set, which includes it.
    """

    def __init__(self):
        super().__init__()
        self.analyses = []  # (pre_entries, result, strengthening or None)
        self.cs_snapshots = []  # (bounds_by_height, heights, strengthening)

    @staticmethod
    def _strengthening(solver):
        cid = solver.strengthening_cid
        return solver.store.constraints[cid] if cid is not None else None

    def on_cs(self, solver, cs):
        self.cs_snapshots.append((tuple(e.bound for e in solver.trail.entries),
                                  cs, self._strengthening(solver)))


class RecordingSolver(Solver):
    """Solver that snapshots the trail before every conflict analysis."""

    def _analyze(self, conflict):
        pre_entries = tuple(self.trail.entries)
        result = super()._analyze(conflict)
        if self.instr is not None and hasattr(self.instr, "analyses"):
            self.instr.analyses.append(
                (pre_entries, result, ValidityProbe._strengthening(self)))
        return result


def php_problem(pigeons, holes):
    from intsat.model import normalize
    n = pigeons * holes
    var = lambda p, h: p * holes + h
    cs = []
    for p in range(pigeons):
        cs.append(normalize([(var(p, h), -1) for h in range(holes)], -1))
    for h in range(holes):
        cs.append(normalize([(var(p, h), 1) for p in range(pigeons)], 1))
    return Problem(n, [0] * n, [1] * n, cs)


@pytest.fixture
def rng():
    return random.Random(20240817)
