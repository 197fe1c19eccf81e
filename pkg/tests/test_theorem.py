import collections
import dataclasses
import random
import pytest
from kstate_ring.protocol import Params
from kstate_ring.daemon import Daemon, RoundRobin, RandomDaemon, Scripted
from kstate_ring.theorem import (MilestoneAutomaton, EventKind, probe_three_share, probe_absent_value, probe_sweep,
                                 check_theorem_milestones, THREE_SHARE, ABSENT_VALUE, SWEEP, NO_PAIR, OPEN, ADOPTED)
from kstate_ring.utility import ParameterError, InvalidTraceError, StateSpaceTooLargeError


def run(n, k, initial, schedule):
    return Daemon(Params(n=n, k=k)).run(initial, Scripted(schedule), max_steps=len(schedule),
                                        stop_on_legitimate=False)


class TestAutomaton:

    def test_second_fire_before_adoption_violates_three_share(self):
        outcome = MilestoneAutomaton(Params(n=2, k=3)).advance(OPEN, False, (1, 0, 1), 0, (2, 0, 1))
        assert [v.milestone for v in outcome.violations] == [THREE_SHARE]

    def test_adoption_without_shared_neighbour(self):
        outcome = MilestoneAutomaton(Params(n=2, k=2)).advance(OPEN, False, (1, 0, 0), 2, (1, 0, 1))
        assert sorted(v.milestone for v in outcome.violations) == [ABSENT_VALUE, THREE_SHARE]
        assert outcome.pair == ADOPTED

    def test_armed_fire_from_mixed_configuration_violates_sweep(self):
        outcome = MilestoneAutomaton(Params(n=2, k=3)).advance(NO_PAIR, True, (1, 0, 1), 0, (2, 0, 1))
        assert [v.milestone for v in outcome.violations] == [SWEEP]

    def test_unique_value_arms_the_sweep(self):
        outcome = MilestoneAutomaton(Params(n=2, k=3)).advance(NO_PAIR, False, (0, 0, 0), 0, (1, 0, 0))
        assert outcome.armed
        assert outcome.pair == OPEN
        assert [e.kind for e in outcome.events] == [EventKind.NODE0_FIRST_FIRE, EventKind.UNIQUE_VALUE_AT_NODE0]


class TestThreeShare:

    def test_closed_pair(self):
        report = probe_three_share(run(2, 3, [0, 1, 0], [0, 2, 0]))
        assert report.holds
        assert [(e.kind, e.step_index, e.value) for e in report.events] == [
            (EventKind.NODE0_FIRST_FIRE, 0, 0),
            (EventKind.NODEN_ADOPTS, 1, 1),
            (EventKind.NODE0_SECOND_FIRE, 2, 1),
        ]

    def test_single_node0_firing_is_vacuous(self):
        report = probe_three_share(run(2, 3, [0, 1, 0], [0, 2]))
        assert report.holds
        assert report.events == []

    def test_tampered_trace_is_rejected(self):
        trace = run(2, 3, [0, 1, 0], [0, 2, 0])
        # node 2 holds b+1 without having copied it
        trace.steps[1] = dataclasses.replace(trace.steps[1], fired=1)
        with pytest.raises(InvalidTraceError) as e:
            probe_three_share(trace)
        assert e.value.verdict.step_index == 1


class TestAbsentValue:

    def test_absent_set_at_three_share_moment(self):
        report = probe_absent_value(run(2, 3, [0, 1, 0], [0, 2, 0]), Params(n=2, k=3))
        assert report.holds
        (event,) = report.events
        assert event.kind == EventKind.ABSENT_VALUE_OBSERVED
        assert event.value == 0
        assert event.witnesses == (0, 2)

    def test_no_claim_when_k_below_n(self):
        trace = Daemon(Params(n=3, k=2)).run([0, 1, 1, 0], RoundRobin(), max_steps=30, stop_on_legitimate=False)
        report = probe_absent_value(trace)
        assert not report.precondition_met
        assert report.events == []
        assert report.holds

    def test_params_must_match_trace(self):
        with pytest.raises(ParameterError):
            probe_absent_value(run(2, 3, [0, 1, 0], [0]), Params(n=2, k=4))


class TestSweep:

    def test_armed_probe_resolves_on_all_equal_configuration(self):
        trace = Daemon(Params(n=2, k=3)).run([0, 0, 0], RoundRobin(), max_steps=4, stop_on_legitimate=False)
        report = probe_sweep(trace)
        assert report.holds
        assert [(e.kind, e.step_index, e.value) for e in report.events] == [
            (EventKind.UNIQUE_VALUE_AT_NODE0, 0, 1),
            (EventKind.SWEEP_COMPLETE, 3, 1),
            (EventKind.UNIQUE_VALUE_AT_NODE0, 3, 2),
        ]

    def test_truncated_trace_is_inconclusive(self):
        trace = Daemon(Params(n=2, k=3)).run([0, 0, 0], RoundRobin(), max_steps=2, stop_on_legitimate=False)
        report = probe_sweep(trace, Params(n=2, k=3))
        assert report.holds
        assert report.inconclusive == 1


class TestMilestones:

    @pytest.mark.parametrize('n, k', [(2, 2), (3, 3), (4, 4), (2, 3)])
    def test_exhaustive_holds(self, n, k):
        report = check_theorem_milestones(Params(n=n, k=k))
        assert report.holds
        assert report.violations == []
        assert report.absent_value_checked
        assert report.event_counts[EventKind.NODEN_ADOPTS.value] > 0
        assert report.event_counts[EventKind.SWEEP_COMPLETE.value] > 0
        assert report.explored_states <= Params(n=n, k=k).state_space * 8

    def test_exhaustive_below_k_equal_n_skips_absent_value(self):
        report = check_theorem_milestones(Params(n=3, k=2))
        assert report.holds
        assert not report.absent_value_checked
        assert report.event_counts[EventKind.ABSENT_VALUE_OBSERVED.value] == 0

    def test_single_state_pairs_are_outside_the_pattern(self):
        report = check_theorem_milestones(Params(n=2, k=1))
        assert report.holds
        assert report.outside_pattern > 0

    def test_sampled_is_deterministic(self):
        params = Params(n=3, k=3)
        first = check_theorem_milestones(params, mode='sampled', seed=1, count=20, depth=200)
        second = check_theorem_milestones(params, mode='sampled', seed=1, count=20, depth=200)
        assert first == second
        assert first.holds
        assert first.runs == 20

    def test_sampled_runs_match_random_daemon_traces(self):
        params = Params(n=3, k=3)
        report = check_theorem_milestones(params, mode='sampled', seed=4, count=15, depth=60)
        events, outside, inconclusive = collections.Counter(), 0, 0
        master = random.Random(4)
        for _ in range(15):
            run_seed = master.getrandbits(64)
            rng = random.Random(run_seed)
            initial = [rng.randrange(3) for _ in range(4)]
            trace = Daemon(params).run(initial, RandomDaemon(run_seed), max_steps=60, stop_on_legitimate=False)
            for probe in (probe_three_share(trace), probe_absent_value(trace), probe_sweep(trace)):
                events.update(event.kind.value for event in probe.events)
                outside += probe.outside_pattern
                inconclusive += probe.inconclusive
        assert {kind: total for kind, total in report.event_counts.items() if total} == dict(events)
        assert (report.outside_pattern, report.inconclusive) == (outside, inconclusive)

    @pytest.mark.slow
    def test_sampled_four_by_four(self):
        report = check_theorem_milestones(Params(n=4, k=4), mode='sampled', seed=1, count=10000, depth=100)
        assert report.holds
        assert report.runs == 10000

    def test_needs_more_than_two_nodes(self):
        with pytest.raises(ParameterError):
            check_theorem_milestones(Params(n=1, k=2))

    def test_unknown_mode(self):
        with pytest.raises(ParameterError):
            check_theorem_milestones(Params(n=2, k=2), mode='random')

    def test_product_respects_state_limit(self):
        with pytest.raises(StateSpaceTooLargeError):
            check_theorem_milestones(Params(n=3, k=3), state_limit=100)
