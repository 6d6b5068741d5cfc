import random

import pytest

from intsat.analysis import (AnalysisInfeasible, analyze_hybrid,
                             analyze_resolution, clause_to_constraint,
                             cut_skip_check, early_backjump_scan)
from intsat.model import Bound, Problem, normalize
from intsat.search import Solver, SolverConfig
from intsat.trail import DECISION, ReasonInfo
from conftest import C, box_points, lo, up


def core_solver(**cfg):
    cs = [
        normalize([(0, -1), (1, -1), (2, -1)], -2),  # C0
        normalize([(0, 1), (1, 1)], 1),              # C1
        normalize([(0, 1), (2, 1)], 1),              # C2
        normalize([(1, 1), (2, 1)], 1),              # C3
        normalize([(0, 1)], 1),                      # C4
        normalize([(1, 1)], 1),                      # C5
        normalize([(2, 1)], 3),                      # C6
    ]
    return Solver(Problem(3, [-10] * 3, [10] * 3, cs, None, ["x", "y", "z"]),
                  SolverConfig(**cfg))


def core_conflict(s):
    """Drive the worked instance to its first conflict: decide 1 <= x."""
    assert s.propagator.propagate_fixpoint() is None
    s.propagator.push_bound(lo(0, 1), DECISION)
    conflict = s.propagator.propagate_fixpoint()
    assert conflict is not None
    return conflict


def rounding_solver(**cfg):
    cs = [normalize([(0, 1), (1, 1), (2, 2)], 2),
          normalize([(0, 1), (1, 1), (2, -2)], 0)]
    return Solver(Problem(3, [-2, -2, -1], [2, 1, 1], cs, None, ["x", "y", "z"]),
                  SolverConfig(**cfg))


def rounding_conflict(s):
    """Decisions 0 <= x then 1 <= y falsify x + y - 2z <= 0."""
    assert s.propagator.propagate_fixpoint() is None
    s.propagator.push_bound(lo(0, 0), DECISION)
    assert s.propagator.propagate_fixpoint() is None
    s.propagator.push_bound(lo(1, 1), DECISION)
    conflict = s.propagator.propagate_fixpoint()
    assert conflict is not None
    return conflict


class TestResolutionAnalysis:
    def test_core_example_rewrites_and_pushes(self):
        s = core_solver(mode="resolution")
        conflict = core_conflict(s)
        snapshots = []
        res = analyze_resolution(conflict, s.trail, s.store, s.problem,
                                 probe=lambda cs: snapshots.append(cs))
        as_bounds = [{s.trail.entries[h].bound for h in cs} for cs in snapshots]
        assert as_bounds[0] == {up(0, 1), up(1, 0), up(2, 0)}
        assert as_bounds[1] == {up(0, 1), up(1, 0), lo(0, 1)}
        assert as_bounds[2] == {up(0, 1), lo(0, 1)}
        assert res.bound == up(0, 0)  # not(1 <= x) is x <= 0
        assert [s.trail.entries[h].bound for h in res.reason_set] == [up(0, 1)]
        assert res.learned == ()  # 2 <= x or x <= 0 is not convertible
        assert len(s.trail) - res.pop_to == 3  # pops z<=0, y<=0, 1<=x
        assert s.trail.entries[res.pop_to].info.is_decision

    def test_rounding_example(self):
        s = rounding_solver(mode="resolution")
        conflict = rounding_conflict(s)
        res = analyze_resolution(conflict, s.trail, s.store, s.problem)
        assert res.bound == up(1, 0)
        assert [s.trail.entries[h].bound for h in res.reason_set] == [lo(0, 0)]
        assert res.learned == () and res.attach_cc is None

    def test_single_decision_pops_to_level_zero(self):
        # deciding 1 <= x0 propagates x1 <= 0, which falsifies x0 <= x1;
        # the rewritten set is the lone decision, negated with empty reason
        p = Problem(2, [0, 0], [1, 1],
                    [normalize([(0, 1), (1, 1)], 1),
                     normalize([(0, 1), (1, -1)], 0)])
        s = Solver(p, SolverConfig(mode="resolution"))
        assert s.propagator.propagate_fixpoint() is None
        s.propagator.push_bound(lo(0, 1), DECISION)
        conflict = s.propagator.propagate_fixpoint()
        assert conflict is not None
        res = analyze_resolution(conflict, s.trail, s.store, s.problem)
        assert res.pop_to == s.trail.decision_heights[0]
        assert res.bound == up(0, 0)
        assert res.reason_set == ()

    def test_bumps_every_cs_variable_once(self):
        s = core_solver(mode="resolution")
        conflict = core_conflict(s)
        res = analyze_resolution(conflict, s.trail, s.store, s.problem)
        assert res.bumped_vars == {0, 1, 2}


class TestHybridAnalysis:
    def test_rounding_example_learns_cut(self):
        s = rounding_solver(mode="cut")
        conflict = rounding_conflict(s)
        res = analyze_hybrid(conflict, s.trail, s.store, s.problem)
        assert res.bound == up(1, 0)
        assert [s.trail.entries[h].bound for h in res.reason_set] == [lo(0, 0)]
        assert res.learned == (C([(0, 1), (1, 1)], 1),)
        assert res.attach_cc == C([(0, 1), (1, 1)], 1)
        assert not res.early  # nothing fresh propagates at lower levels here

    def test_core_example_early_backjump(self):
        s = core_solver(mode="cut")
        conflict = core_conflict(s)
        res = analyze_hybrid(conflict, s.trail, s.store, s.problem)
        assert res.early
        assert res.learned == (C([(1, -1)], -1),)  # 1 <= y as a constraint
        assert res.bound == lo(1, 1)
        assert res.reason_set == ()
        assert res.pop_to == s.trail.decision_heights[0]  # all the way to level 0

    def test_over_cap_cut_leaves_cc_unchanged(self):
        # the second rewrite needs multipliers that blow the coefficient
        # cap (coprime huge coefficients, so normalisation cannot rescue
        # it); that cut is refused and the conflicting constraint kept
        big = 2 ** 30 - 1
        c_a = C([(1, big), (2, big - 1)], big)   # 1 <= x1 makes c_a false
        c_b = normalize([(0, -1), (2, -1)], -1)  # clause x0 or x2
        c_c = normalize([(0, 1), (1, 1)], 1)     # clause not-x0 or not-x1
        p = Problem(3, [0] * 3, [1] * 3, [c_a, c_b, c_c])
        s = Solver(p, SolverConfig(mode="cut"))
        assert s.propagator.propagate_fixpoint() is None
        s.propagator.push_bound(lo(1, 1), DECISION)
        conflict = s.propagator.propagate_fixpoint()
        assert conflict is not None
        assert s.store.constraints[conflict.cid] == c_a
        res = analyze_hybrid(conflict, s.trail, s.store, s.problem)
        # first cut succeeds (c_a x c_b on x2), the second one is refused,
        # so the learned constraint still mentions x0 with a huge weight
        assert res.learned == (C([(0, -(big - 1)), (1, big)], 1),)
        assert not res.early
        assert res.bound == up(1, 0)
        assert res.pop_to == s.trail.decision_heights[0]


class TestEarlyBackjumpScan:
    def test_unit_constraint_propagates_at_level_zero(self):
        s = core_solver(mode="cut")
        core_conflict(s)
        hit = early_backjump_scan(C([(1, -1)], -1), s.trail)  # 1 <= y
        assert hit is not None
        assert hit.cutoff == s.trail.decision_heights[0]
        assert hit.bound == lo(1, 1)
        assert hit.reason_set == ()

    def test_no_hit_when_nothing_fresh(self):
        s = rounding_solver(mode="cut")
        rounding_conflict(s)
        assert early_backjump_scan(C([(0, 1), (1, 1)], 1), s.trail) is None

    def test_false_at_level_zero_signals_infeasible(self):
        s = core_solver(mode="cut")
        core_conflict(s)
        with pytest.raises(AnalysisInfeasible):
            early_backjump_scan(C([(2, 1)], -5), s.trail)  # z <= -5 false at root

    def test_reason_heights_lie_below_the_cutoff(self):
        s = core_solver(mode="cut")
        core_conflict(s)
        hit = early_backjump_scan(C([(0, 1), (1, 1)], 0), s.trail)
        if hit is not None:
            assert all(h < hit.cutoff for h in hit.reason_set)


class TestCutSkipCheck:
    def test_single_shared_variable_skips(self):
        cc = C([(0, 1), (1, 2), (2, 3)], 0)
        rc = C([(0, -1), (3, 1)], 0)
        assert cut_skip_check(cc, rc, 0) is True

    def test_two_shared_variables_do_not_skip(self):
        cc = C([(0, 1), (1, 1)], 0)
        rc = C([(0, -1), (1, 1)], 0)
        assert cut_skip_check(cc, rc, 0) is False


class TestBackjumpTarget:
    def test_pops_through_decision_above_deepest_rest_level(self):
        # four decisions; the falsifying set sits at levels {4, 2}, so the
        # backjump pops through decision 3, keeping exactly two decisions
        p = Problem(4, [0] * 4, [5] * 4, [])
        s = Solver(p)
        assert s.propagator.propagate_fixpoint() is None
        for var in (0, 3, 1, 2):  # levels 1..4
            s.propagator.push_bound(lo(var, 2), DECISION)
        s.propagator.push_bound(  # level-4 propagation justified by level 2
            lo(0, 3), ReasonInfo.propagated((s.trail.pl[3],), None))
        cid = s.store.add(normalize([(0, 1), (3, 1)], 4), initial=True)
        s.propagator.register_constraint(cid)
        conflict = s.propagator.propagate_fixpoint()
        assert conflict is not None  # 3 + 2 > 4
        assert {s.trail.entries[h].bound for h in conflict.cs} == {lo(0, 3), lo(3, 2)}
        res = analyze_hybrid(conflict, s.trail, s.store, s.problem)
        assert res.bound == up(0, 2)
        new_decisions = [h for h in s.trail.decision_heights if h < res.pop_to]
        assert len(new_decisions) == 2


class TestClauseToConstraint:
    def problem(self):
        # x0, x1 binary; x2 general in [0, 10]
        return Problem(3, [0, 0, 0], [1, 1, 10])

    def test_single_general_lower_bound_is_itself(self):
        got = clause_to_constraint([lo(2, 5)], self.problem())
        assert got == C([(2, -1)], -5)

    def test_mixed_clause_matches_worked_formula(self):
        got = clause_to_constraint([lo(0, 1), up(1, 0), lo(2, 5)], self.problem())
        # 5 - 5(x0 + (1 - x1)) <= x2
        assert got == C([(0, -5), (1, 5), (2, -1)], 0)

    def test_two_bounds_on_one_general_variable_fail(self):
        p = Problem(1, [-2, ], [1])
        assert clause_to_constraint([lo(0, 2), up(0, 0)], p) is None

    def test_all_binary_clause(self):
        got = clause_to_constraint([lo(0, 1), up(1, 0)], self.problem())
        assert got == C([(0, -1), (1, 1)], 0)

    def test_upper_general_bound(self):
        got = clause_to_constraint([lo(0, 1), up(2, 3)], self.problem())
        # x2 <= 3 + 7*x0
        assert got == C([(0, -7), (2, 1)], 3)

    def test_equivalence_over_the_box(self):
        rng = random.Random(31)
        for _ in range(120):
            n_bin = rng.randint(0, 4)
            lbs = [0] * n_bin
            ubs = [1] * n_bin
            lits = []
            for v in range(n_bin):
                if rng.random() < 0.7:
                    lits.append(lo(v, 1) if rng.random() < 0.5 else up(v, 0))
            has_general = rng.random() < 0.8 or not lits
            if has_general:
                g_lb = rng.randint(-3, 3)
                g_ub = g_lb + rng.randint(1, 8)
                lbs.append(g_lb)
                ubs.append(g_ub)
                gv = n_bin
                if rng.random() < 0.5:
                    lits.append(lo(gv, rng.randint(g_lb + 1, g_ub)))
                else:
                    lits.append(up(gv, rng.randint(g_lb, g_ub - 1)))
            p = Problem(len(lbs), lbs, ubs)
            got = clause_to_constraint(lits, p)
            assert got is not None
            for pt in box_points(lbs, ubs):
                clause_true = any(l.satisfied_by(pt[l.var]) for l in lits)
                assert clause_true == got.satisfied_by(pt), (lits, got, pt)


class TestInfeasibleShortCircuit:
    def test_contradictory_cut_raises(self):
        # x >= 1 and x <= 0: conflict whose cut cancels all variables
        p = Problem(2, [0, 0], [1, 1],
                    [normalize([(0, -1), (1, 1)], 0),   # x1 <= x0
                     normalize([(0, 1), (1, -1)], -1)])  # x0 + 1 <= x1
        s = Solver(p, SolverConfig(mode="cut"))
        out = s.solve()
        assert out.status == "infeasible"
