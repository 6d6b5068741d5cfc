"""Bound propagation to fixpoint with conflict detection.

Constraints live in three tiers:

* general constraints, visited through per-variable occurs lists and a
  cheap per-constraint filter that certifies "cannot propagate" without
  touching the constraint;
* clauses (input set-covering style constraints over binary variables),
  propagated with two watched literals;
* binary clauses, kept as edges of a binary implication graph, plus
  optional implicit edges recomputed on demand from general constraints.

All three tiers share one extraction rule for conflict sets and reason
sets: the height of the current strongest bound of each variable on the
side its coefficient uses.
"""

from __future__ import annotations

from collections import deque
from typing import NamedTuple, Optional

from .model import Bound, Constraint, Monomial
from .trail import ReasonInfo, Trail


class Conflict(NamedTuple):
    cid: int  # constraint id in the store
    cs: tuple  # trail heights falsifying it


def min_contribution(coeff: int, lb, ub):
    """Minimum of coeff*x over [lb, ub]; None encodes minus infinity."""
    assert coeff != 0
    if coeff > 0:
        return coeff * lb if lb is not None else None
    return coeff * ub if ub is not None else None


def constraint_min(c: Constraint, trail: Trail) -> int:
    total = 0
    for var, coeff in c.monomials:
        if coeff > 0:
            total += coeff * trail.current_lb(var)
        else:
            total += coeff * trail.current_ub(var)
    return total


def falsifying_heights(c: Constraint, trail: Trail, skip_var=None) -> tuple:
    """Heights of the strongest bound of each variable on its min side."""
    heights = []
    for var, coeff in c.monomials:
        if var == skip_var:
            continue
        h = trail.pl[var] if coeff > 0 else trail.pu[var]
        assert h >= 0, "variable without a trail bound"
        heights.append(h)
    return tuple(heights)


def find_conflict(c: Constraint, trail: Trail, cid: int = -1) -> Optional[Conflict]:
    """The constraint is false iff the sum of minima exceeds the rhs."""
    if not c.monomials:
        return Conflict(cid, ()) if c.rhs < 0 else None
    if constraint_min(c, trail) > c.rhs:
        return Conflict(cid, falsifying_heights(c, trail))
    return None


def propagate_constraint(c: Constraint, trail: Trail):
    """All fresh bounds the constraint propagates under the current trail.

    For each variable, the bound obtained by moving every other variable
    to its minimum and rounding.  Returns (bound, reason heights) pairs;
    the caller must have ruled out a conflict first.
    """
    smin = constraint_min(c, trail)
    out = []
    for var, coeff in c.monomials:
        lb, ub = trail.current_bounds(var)
        own_min = coeff * lb if coeff > 0 else coeff * ub
        e_num = c.rhs - (smin - own_min)
        if coeff > 0:
            b = Bound(var, False, e_num // coeff)  # floor
        else:
            b = Bound(var, True, -((-e_num) // coeff))  # ceil
        if trail.is_fresh(b):
            out.append((b, falsifying_heights(c, trail, skip_var=var)))
    return out


def would_propagate(c: Constraint, trail: Trail) -> bool:
    """Exact predicate: does the constraint propagate some fresh bound?"""
    if not c.monomials:
        return False
    smin = 0
    widest = 0
    for var, coeff in c.monomials:
        lb, ub = trail.current_bounds(var)
        smin += coeff * lb if coeff > 0 else coeff * ub
        widest = max(widest, abs(coeff) * (ub - lb))
    return -c.rhs + widest + smin > 0


class ConstraintStore:
    """All constraints, by id, with tier and book-keeping metadata."""

    GENERAL, CLAUSE, BINARY = "general", "clause", "binary"

    def __init__(self, problem):
        self.problem = problem
        self.constraints = []
        self.kind = []
        self.initial = []
        self.alive = []
        self.activity = []  # cleanup counter, learned constraints only
        self.lits = []  # literal view for clause/binary tiers
        self.learned_since_cleanup = 0
        self.learned_bytes = 0

    def __len__(self):
        return len(self.constraints)

    def alive_cids(self):
        return [i for i, a in enumerate(self.alive) if a]

    def _as_clause(self, c: Constraint):
        """Literal view if the constraint is a clause over binary variables."""
        lits = []
        positives = 0
        for var, coeff in c.monomials:
            if not self.problem.is_binary(var) or abs(coeff) != 1:
                return None
            if coeff < 0:
                lits.append(Bound(var, True, 1))  # the literal "var is true"
            else:
                positives += 1
                lits.append(Bound(var, False, 0))  # "var is false"
        if c.rhs != positives - 1:
            return None
        return lits

    def add(self, c: Constraint, initial: bool) -> int:
        cid = len(self.constraints)
        lits = self._as_clause(c) if initial else None
        if lits is not None and len(lits) >= 3:
            kind = self.CLAUSE
        elif lits is not None and len(lits) == 2:
            kind = self.BINARY
        else:
            kind, lits = self.GENERAL, None
        self.constraints.append(c)
        self.kind.append(kind)
        self.initial.append(initial)
        self.alive.append(True)
        self.activity.append(0)
        self.lits.append(lits)
        if not initial:
            self.learned_since_cleanup += 1
            self.learned_bytes += 64 + 16 * len(c.monomials)
        return cid

    def bump_activity(self, cid: int):
        if not self.initial[cid]:
            self.activity[cid] += 1

    def remove(self, cid: int):
        assert not self.initial[cid]
        if self.alive[cid]:
            self.alive[cid] = False
            self.learned_bytes -= 64 + 16 * len(self.constraints[cid].monomials)


def detect_implicit_binaries(store: ConstraintStore, trail: Trail) -> dict:
    """Index of general constraints that imply binary clauses at the root.

    For each variable x the list holds the constraints that, together
    with the root bounds, imply some clause (not x or not y): fixing two
    unassigned binary variables with positive coefficients to 1 would
    falsify the constraint.
    """
    index = {}
    for cid in store.alive_cids():
        if store.kind[cid] != ConstraintStore.GENERAL:
            continue
        c = store.constraints[cid]
        if len(c.monomials) < 2:
            continue
        candidates = []
        for var, coeff in c.monomials:
            lb, ub = trail.current_bounds(var)
            if coeff > 0 and store.problem.is_binary(var) and lb == 0 and ub == 1:
                candidates.append((var, coeff))
        if len(candidates) < 2:
            continue
        slack = c.rhs - constraint_min(c, trail)
        best = sorted((a for _, a in candidates), reverse=True)
        for var, coeff in candidates:
            partner = best[1] if coeff == best[0] else best[0]
            if coeff + partner > slack:
                index.setdefault(var, []).append(cid)
    return index


REGISTERED = object()  # undo-log sentinel for mid-trail registrations


class Propagator:
    """Owns the trail and the constraint indexes; the single push/pop path.

    Everything that changes the trail goes through push_bound / pop_to so
    filters, cursors and phase saving stay consistent.
    """

    def __init__(self, problem, store: ConstraintStore, trail: Trail,
                 use_implicit_binaries=False, stats=None, trace=None):
        self.problem = problem
        self.store = store
        self.trail = trail
        self.use_implicit_binaries = use_implicit_binaries
        self.stats = stats
        self.trace = trace
        n = problem.num_vars
        self.occ_pos = [[] for _ in range(n)]
        self.occ_neg = [[] for _ in range(n)]
        self.filters = []
        self.in_queue = []
        # every filter mutation is journaled against the trail height it
        # happened under, so popping restores the exact earlier values;
        # REGISTERED entries mark constraints added mid-trail, whose
        # filter must be recomputed from scratch when unwinding past them
        self.filter_log = []
        self.filter_marks = []
        self.queue = deque()
        self.watch = {}  # (var, lit_is_lower) -> clause cids watching that literal
        self.watched = {}  # cid -> [lit index, lit index]
        self.bin_adj = {}  # (var, lit_is_lower) -> [(implied lit, cid)]
        self.implicit_index = {}
        self.binary_cursor = 0
        self.clause_cursor = 0
        self.num_defined = 0
        self.last_value = [None] * n  # phase saving: last defined value
        self.post_push = None  # optional hook, called after every push
        self.on_undefined = None  # optional hook, var became undefined by a pop
        self.implicit_ready = False

    # -- index construction -------------------------------------------------

    def register_constraint(self, cid: int):
        store = self.store
        while len(self.filters) < len(store):
            self.filters.append(0)
            self.in_queue.append(False)
        c = store.constraints[cid]
        kind = store.kind[cid]
        if kind == ConstraintStore.GENERAL:
            for var, coeff in c.monomials:
                (self.occ_pos if coeff > 0 else self.occ_neg)[var].append((cid, coeff))
            self.filters[cid] = self._exact_filter(c)
            if self.filter_marks:  # registered mid-trail: recompute on unwind
                self.filter_log.append((cid, REGISTERED))
            if self.filters[cid] > 0 and not self.in_queue[cid]:
                self.in_queue[cid] = True
                self.queue.append(cid)
        elif kind == ConstraintStore.CLAUSE:
            lits = store.lits[cid]
            self.watched[cid] = [0, 1]
            for i in (0, 1):
                lit = lits[i]
                self.watch.setdefault((lit.var, lit.is_lower), []).append(cid)
        else:  # binary clause: two implication edges
            l1, l2 = store.lits[cid]
            self.bin_adj.setdefault((l1.var, l1.is_lower), []).append((l2, cid))
            self.bin_adj.setdefault((l2.var, l2.is_lower), []).append((l1, cid))

    def rebuild_indexes(self):
        """Recompute occurs lists, watches and filters from alive constraints."""
        n = self.problem.num_vars
        self.occ_pos = [[] for _ in range(n)]
        self.occ_neg = [[] for _ in range(n)]
        self.watch = {}
        self.watched = {}
        self.bin_adj = {}
        self.queue.clear()
        self.filters = [0] * len(self.store)
        self.in_queue = [False] * len(self.store)
        # rebuilds happen at level 0; nothing below the current top is
        # ever popped again, so the journal can start over
        self.filter_log = []
        self.filter_marks = []
        for cid in self.store.alive_cids():
            self.register_constraint(cid)
        self.filter_marks = [0] * len(self.trail)
        if self.use_implicit_binaries and self.implicit_ready:
            self.implicit_index = detect_implicit_binaries(self.store, self.trail)

    def detect_implicit(self, at_root: bool):
        self.implicit_index = detect_implicit_binaries(self.store, self.trail)
        if at_root:
            self.implicit_ready = True

    def _exact_filter(self, c: Constraint) -> int:
        if not c.monomials:
            return 1 if c.rhs < 0 else 0  # degenerate conflicts must be visited
        smin = 0
        widest = 0
        for var, coeff in c.monomials:
            lb, ub = self.trail.current_bounds(var)
            smin += coeff * lb if coeff > 0 else coeff * ub
            widest = max(widest, abs(coeff) * (ub - lb))
        return -c.rhs + widest + smin

    # -- push / pop ----------------------------------------------------------

    def note_seed_push(self):
        """Keep the undo journal aligned with seed entries pushed directly."""
        self.filter_marks.append(len(self.filter_log))

    def push_bound(self, b: Bound, info: ReasonInfo, tier=None) -> int:
        trail = self.trail
        prev = trail.current_lb(b.var) if b.is_lower else trail.current_ub(b.var)
        height = trail.push(b, info)
        self.filter_marks.append(len(self.filter_log))
        occs = self.occ_pos[b.var] if b.is_lower else self.occ_neg[b.var]
        delta = b.value - prev
        for cid, coeff in occs:
            if not self.store.alive[cid]:
                continue
            self.filter_log.append((cid, self.filters[cid]))
            self.filters[cid] += abs(coeff * delta)
            if self.filters[cid] > 0 and not self.in_queue[cid]:
                self.in_queue[cid] = True
                self.queue.append(cid)
        if trail.is_defined(b.var):
            self.num_defined += 1
            self.last_value[b.var] = trail.current_lb(b.var)
        if self.stats is not None and tier is not None:
            self.stats.count_propagation(tier)
        if self.trace is not None and not info.is_decision:
            cid = info.reason_constraint
            self.trace.emit(
                f"propagate {b.format(self.problem.var_names)} "
                f"reason={cid if cid is not None else 'none'} "
                f"set={{{','.join(str(h) for h in info.reason_set)}}}"
            )
        if self.post_push is not None:
            self.post_push(height)
        return height

    def pop_one(self):
        trail = self.trail
        was_defined = trail.is_defined(trail.entries[-1].bound.var)
        entry = trail.pop()
        b = entry.bound
        if was_defined and not trail.is_defined(b.var):
            self.num_defined -= 1
            if self.on_undefined is not None:
                self.on_undefined(b.var)
        mark = self.filter_marks.pop()
        while len(self.filter_log) > mark:
            cid, old = self.filter_log.pop()
            if old is REGISTERED:
                old = self._exact_filter(self.store.constraints[cid])
            self.filters[cid] = old
            if old > 0 and self.store.alive[cid] and not self.in_queue[cid]:
                self.in_queue[cid] = True
                self.queue.append(cid)
        top = len(trail)
        if self.binary_cursor > top:
            self.binary_cursor = top
        if self.clause_cursor > top:
            self.clause_cursor = top
        return entry

    def pop_to(self, height: int):
        while len(self.trail) > height:
            self.pop_one()

    # -- clause / binary tier helpers ----------------------------------------

    @staticmethod
    def _falsify_key(b: Bound):
        """Literal-falsification event of a pushed bound, if any."""
        if b.is_lower and b.value >= 1:
            return (b.var, False)  # falsifies the literal "var is false"
        if not b.is_lower and b.value <= 0:
            return (b.var, True)  # falsifies the literal "var is true"
        return None

    def _lit_status(self, lit: Bound):
        """1 satisfied, 0 undefined, -1 falsified under current bounds."""
        lb, ub = self.trail.current_bounds(lit.var)
        if lit.is_lower:  # literal "1 <= var"
            if lb >= lit.value:
                return 1
            return -1 if ub < lit.value else 0
        if ub <= lit.value:
            return 1
        return -1 if lb > lit.value else 0

    def _push_from_clause(self, lit: Bound, cid: int, tier: str) -> bool:
        c = self.store.constraints[cid]
        reason = falsifying_heights(c, self.trail, skip_var=lit.var)
        self.push_bound(lit, ReasonInfo.propagated(reason, cid), tier=tier)
        return True

    def _clause_conflict(self, cid: int) -> Conflict:
        c = self.store.constraints[cid]
        return Conflict(cid, falsifying_heights(c, self.trail))

    def _process_binary_entry(self, height: int) -> Optional[Conflict]:
        key = self._falsify_key(self.trail.entries[height].bound)
        if key is None:
            return None
        for other, cid in self.bin_adj.get(key, ()):  # explicit edges
            status = self._lit_status(other)
            if status == 1:
                continue
            if status == -1:
                return self._clause_conflict(cid)
            self._push_from_clause(other, cid, ConstraintStore.BINARY)
        if self.use_implicit_binaries and key[1] is False:
            conflict = self._process_implicit(key[0])
            if conflict is not None:
                return conflict
        return None

    def _process_implicit(self, var: int) -> Optional[Conflict]:
        """Simulated binary edges: var just became true; imply partners false."""
        trail = self.trail
        for cid in self.implicit_index.get(var, ()):
            if not self.store.alive[cid]:
                continue
            c = self.store.constraints[cid]
            smin = constraint_min(c, trail)
            if smin > c.rhs:
                return Conflict(cid, falsifying_heights(c, trail))
            # pushing "other <= 0" never moves the constraint minimum (the
            # coefficient is positive, so the minimum sits at the lower bound)
            slack = c.rhs - smin
            for other, coeff in c.monomials:
                if other == var or coeff <= 0:
                    continue
                lb, ub = trail.current_bounds(other)
                if lb == 0 and ub == 1 and coeff > slack:
                    self._push_from_clause(Bound(other, False, 0), cid,
                                           ConstraintStore.BINARY)
        return None

    def _process_clause_entry(self, height: int) -> Optional[Conflict]:
        key = self._falsify_key(self.trail.entries[height].bound)
        if key is None:
            return None
        watchers = self.watch.get(key)
        if not watchers:
            return None
        keep = []
        conflict = None
        i = 0
        while i < len(watchers):
            cid = watchers[i]
            i += 1
            if not self.store.alive[cid]:
                continue
            lits = self.store.lits[cid]
            w = self.watched[cid]
            # which of the two watches is the falsified literal?
            if (lits[w[0]].var, lits[w[0]].is_lower) == key:
                this_slot, other_slot = 0, 1
            else:
                this_slot, other_slot = 1, 0
            other_lit = lits[w[other_slot]]
            if self._lit_status(other_lit) == 1:
                keep.append(cid)
                continue
            moved = False
            for j, lit in enumerate(lits):
                if j in w:
                    continue
                if self._lit_status(lit) != -1:
                    w[this_slot] = j
                    self.watch.setdefault((lit.var, lit.is_lower), []).append(cid)
                    moved = True
                    break
            if moved:
                continue
            keep.append(cid)
            status = self._lit_status(other_lit)
            if status == -1:
                conflict = self._clause_conflict(cid)
                keep.extend(watchers[i:])
                break
            if status == 0:
                self._push_from_clause(other_lit, cid, ConstraintStore.CLAUSE)
        self.watch[key] = keep
        return conflict

    # -- general tier ---------------------------------------------------------

    def _visit_general(self, cid: int) -> Optional[Conflict]:
        c = self.store.constraints[cid]
        conflict = find_conflict(c, self.trail, cid)
        if conflict is not None:
            return conflict
        for b, reason in propagate_constraint(c, self.trail):
            self.push_bound(b, ReasonInfo.propagated(reason, cid),
                            tier=ConstraintStore.GENERAL)
        if self.filter_marks:
            self.filter_log.append((cid, self.filters[cid]))
        self.filters[cid] = self._exact_filter(c)
        return None

    # -- the fixpoint loop ------------------------------------------------------

    def propagate_fixpoint(self) -> Optional[Conflict]:
        """Advance all tiers to the top of the trail; binary first, then
        clauses, then general constraints, restarting at the cheapest
        tier after every push."""
        trail = self.trail
        while True:
            if self.binary_cursor < len(trail):
                conflict = self._process_binary_entry(self.binary_cursor)
                self.binary_cursor += 1
                if conflict is not None:
                    return conflict
                continue
            if self.clause_cursor < len(trail):
                conflict = self._process_clause_entry(self.clause_cursor)
                self.clause_cursor += 1
                if conflict is not None:
                    return conflict
                continue
            if self.queue:
                cid = self.queue.popleft()
                self.in_queue[cid] = False
                if not self.store.alive[cid] or self.filters[cid] <= 0:
                    continue
                conflict = self._visit_general(cid)
                if conflict is not None:
                    return conflict
                continue
            return None
