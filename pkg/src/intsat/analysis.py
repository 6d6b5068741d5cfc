"""Conflict analysis, backjumping and learning.

Two interchangeable engines share the same skeleton: the falsifying set
of trail heights is rewritten by replacing its topmost bound with that
bound's reason set until exactly one bound of the set remains at the
highest decision level involved.  The resolution engine learns by
converting the negated set into a constraint when its shape allows; the
hybrid engine additionally carries a conflicting constraint, updated by
eliminating cuts against reason constraints, which is always learned
and can justify an early backjump to a lower level.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

from .model import Bound, Constraint, cut, normalize
from .propagation import Conflict, ConstraintStore, falsifying_heights
from .trail import Trail


class AnalysisInfeasible(Exception):
    """The conflict is entailed below all decisions: the problem has no solution."""


class AnalysisResult(NamedTuple):
    pop_to: int  # new trail length after backjumping
    bound: Bound  # pushed with the reason info below
    reason_set: tuple  # heights, all < pop_to
    attach_cc: Optional[Constraint]  # reason constraint for the pushed bound
    learned: tuple  # constraints to add to the store
    early: bool
    bumped_vars: frozenset
    touched_cids: tuple  # conflicting/reason constraints seen (activity counters)


class EarlyBackjump(NamedTuple):
    cutoff: int  # new trail length
    bound: Bound
    reason_set: tuple


def _stop_state(cs, trail):
    """(h_top, rest_top) when the rewriting must stop, else None.

    Stops when the topmost bound of the set is the only one within its
    own decision level (the classic condition when that level is the
    trail's top level; the generalisation covers conflicts discovered
    below the top, which can happen with freshly learned constraints).
    Raises AnalysisInfeasible when the whole set sits at level 0.
    """
    h_top = max(cs)
    level = trail.decision_level_of(h_top)
    if level == 0:
        raise AnalysisInfeasible
    start = trail.level_start(level)
    rest_top = max((h for h in cs if h != h_top), default=-1)
    if rest_top < start:
        return h_top, rest_top
    return None


def _backjump_height(rest_top: int, trail: Trail) -> int:
    """Pop to just below the (l+1)-th decision, l the deepest level in rest."""
    l = trail.decision_level_of(rest_top) if rest_top >= 0 else 0
    return trail.decision_heights[l]


def analyze_resolution(conflict: Conflict, trail: Trail, store: ConstraintStore,
                       problem, trace=None, probe=None) -> AnalysisResult:
    cs = set(conflict.cs)
    bumped = {trail.entries[h].bound.var for h in cs}
    touched = [conflict.cid]
    if probe is not None:
        probe(frozenset(cs))
    while True:
        stop = _stop_state(cs, trail)
        if stop is not None:
            h_top, rest_top = stop
            break
        h = max(cs)
        entry = trail.entries[h]
        assert not entry.info.is_decision
        if entry.info.reason_constraint is not None:
            touched.append(entry.info.reason_constraint)
        cs.discard(h)
        cs.update(entry.info.reason_set)
        for rh in entry.info.reason_set:
            bumped.add(trail.entries[rh].bound.var)
        if trace is not None:
            names = problem.var_names
            added = ", ".join(trail.entries[rh].bound.format(names)
                              for rh in entry.info.reason_set)
            trace.emit(f"analyze step: drop {entry.bound.format(names)} add {{{added}}}")
        if probe is not None:
            probe(frozenset(cs))
    b_top = trail.entries[h_top].bound
    rest = tuple(sorted(cs - {h_top}))
    pop_to = _backjump_height(rest_top, trail)
    lits = [trail.entries[h].bound.negated() for h in sorted(cs)]
    learned = clause_to_constraint(lits, problem)
    return AnalysisResult(
        pop_to=pop_to,
        bound=b_top.negated(),
        reason_set=rest,
        attach_cc=None,
        learned=(learned,) if learned is not None else (),
        early=False,
        bumped_vars=frozenset(bumped),
        touched_cids=tuple(touched),
    )


def analyze_hybrid(conflict: Conflict, trail: Trail, store: ConstraintStore,
                   problem, trace=None, probe=None) -> AnalysisResult:
    cs = set(conflict.cs)
    cc = store.constraints[conflict.cid]
    cc_label = str(conflict.cid)
    bumped = {trail.entries[h].bound.var for h in cs}
    touched = [conflict.cid]
    pending_scan = True  # scan once per distinct conflicting constraint
    if probe is not None:
        probe(frozenset(cs))
    while True:
        stop = _stop_state(cs, trail)
        if stop is not None:
            h_top, rest_top = stop
            break
        h = max(cs)
        entry = trail.entries[h]
        assert not entry.info.is_decision
        rc_cid = entry.info.reason_constraint
        cs.discard(h)
        cs.update(entry.info.reason_set)
        for rh in entry.info.reason_set:
            bumped.add(trail.entries[rh].bound.var)
        if trace is not None:
            names = problem.var_names
            added = ", ".join(trail.entries[rh].bound.format(names)
                              for rh in entry.info.reason_set)
            trace.emit(f"analyze step: drop {entry.bound.format(names)} add {{{added}}}")
        if probe is not None:
            probe(frozenset(cs))
        if rc_cid is not None:
            touched.append(rc_cid)
            rc = store.constraints[rc_cid]
            new_cc = cut(cc, rc, entry.bound.var)
            if new_cc is not None:
                if new_cc.is_contradiction():
                    raise AnalysisInfeasible
                if not new_cc.is_tautology():
                    skip = cut_skip_check(cc, rc, entry.bound.var)
                    if trace is not None:
                        trace.emit(
                            f"cut {cc_label}×{rc_cid} on "
                            f"{problem.name_of(entry.bound.var)} → "
                            f"{new_cc.format(problem.var_names)}"
                        )
                    cc = new_cc
                    cc_label = "cc"
                    pending_scan = not skip
        if pending_scan and cc.monomials:
            pending_scan = False
            hit = early_backjump_scan(cc, trail)
            if hit is not None:
                if trace is not None:
                    k = len(trail) - hit.cutoff
                    trace.emit(f"early-backjump k={k} push "
                               f"{hit.bound.format(problem.var_names)}")
                return AnalysisResult(
                    pop_to=hit.cutoff,
                    bound=hit.bound,
                    reason_set=hit.reason_set,
                    attach_cc=cc,
                    learned=(cc,),
                    early=True,
                    bumped_vars=frozenset(bumped),
                    touched_cids=tuple(touched),
                )
    b_top = trail.entries[h_top].bound
    rest = tuple(sorted(cs - {h_top}))
    pop_to = _backjump_height(rest_top, trail)
    return AnalysisResult(
        pop_to=pop_to,
        bound=b_top.negated(),
        reason_set=rest,
        attach_cc=cc,
        learned=(cc,),
        early=False,
        bumped_vars=frozenset(bumped),
        touched_cids=tuple(touched),
    )


def cut_skip_check(cc: Constraint, rc: Constraint, var: int) -> bool:
    """True when an eliminating cut cannot enable an early backjump.

    Holds when the premises share only the eliminated variable: both
    were already propagated exhaustively, and a cut of constraints with
    disjoint remaining support propagates nothing its premises did not.
    """
    common = set(cc.vars()) & set(rc.vars())
    return common == {var}


def early_backjump_scan(cc: Constraint, trail: Trail) -> Optional[EarlyBackjump]:
    """Deepest level-prefix of the trail where cc propagates a fresh bound.

    Candidate states are the trail prefixes ending just below each
    decision, scanned from level 0 upward; the first hit gives the
    maximal number of popped bounds.  Bound histories are walked through
    the pos chains, so nothing is actually popped.  Once cc is false in
    a prefix it stays false above it and can propagate nothing fresh, so
    the scan ends; falsity at level 0 means the problem is infeasible.
    """
    if not cc.monomials:
        return None
    for level in range(trail.num_decisions):
        cutoff = trail.decision_heights[level]
        bounds = {var: trail.bounds_at_height(var, cutoff) for var in cc.vars()}
        smin = 0
        for var, coeff in cc.monomials:
            lb, ub = bounds[var]
            smin += coeff * lb if coeff > 0 else coeff * ub
        if smin > cc.rhs:
            if level == 0:
                raise AnalysisInfeasible
            return None
        for var, coeff in cc.monomials:
            lb, ub = bounds[var]
            own_min = coeff * lb if coeff > 0 else coeff * ub
            e_num = cc.rhs - (smin - own_min)
            if coeff > 0:
                b = Bound(var, False, e_num // coeff)
                fresh = lb <= b.value < ub
            else:
                b = Bound(var, True, -((-e_num) // coeff))
                fresh = lb < b.value <= ub
            if fresh:
                reason = []
                for other, ocoeff in cc.monomials:
                    if other == var:
                        continue
                    h = trail.height_of_strongest_below(other, ocoeff > 0, cutoff)
                    assert h >= 0
                    reason.append(h)
                return EarlyBackjump(cutoff, b, tuple(sorted(reason)))
    return None


def clause_to_constraint(lits, problem) -> Optional[Constraint]:
    """Constraint equivalent (over the box) to a disjunction of bounds.

    Convertible shapes: bounds on binary variables of the literal forms
    "1 <= x" / "y <= 0", plus at most one bound on a further variable.
    All variables must be distinct.  Returns None when the shape does
    not match or a coefficient would exceed the cap.
    """
    from .model import COEFF_CAP

    if not lits:
        return None
    if len({l.var for l in lits}) != len(lits):
        return None
    binary_true = []
    binary_false = []
    general = []
    for l in lits:
        if problem.is_binary(l.var) and l.is_lower and l.value == 1:
            binary_true.append(l.var)
        elif problem.is_binary(l.var) and not l.is_lower and l.value == 0:
            binary_false.append(l.var)
        else:
            general.append(l)
    if len(general) > 1:
        return None
    n_false = len(binary_false)
    if not general:
        terms = [(v, -1) for v in binary_true] + [(v, 1) for v in binary_false]
        return normalize(terms, n_false - 1)
    g = general[0]
    lb0 = problem.initial_lb[g.var]
    ub0 = problem.initial_ub[g.var]
    if g.is_lower:
        k = g.value
        if not lb0 < k <= ub0:
            return None
        w = k - lb0
        terms = [(v, -w) for v in binary_true] + [(v, w) for v in binary_false]
        terms.append((g.var, -1))
        rhs = n_false * w - k
    else:
        k = g.value
        if not lb0 <= k < ub0:
            return None
        w = ub0 - k
        terms = [(v, -w) for v in binary_true] + [(v, w) for v in binary_false]
        terms.append((g.var, 1))
        rhs = n_false * w + k
    if any(abs(c) > COEFF_CAP for _, c in terms) or abs(rhs) > COEFF_CAP:
        return None
    return normalize(terms, rhs)
