import functools
import random
import pytest
from kstate_ring.protocol import Params, Ring
from kstate_ring.daemon import Daemon, Trace, RandomDaemon, TerminatedReason
from kstate_ring.checker import Checker, Converges, k_values, sweep, frontier
from kstate_ring.utility import StateSpaceTooLargeError, InvalidStateError, ParameterError


def longest_illegitimate_run(params):
    """
    Independent oracle: longest schedule until legitimacy, by memoized recursion over the public Ring API
    """
    ring = Ring(params)

    @functools.lru_cache(maxsize=None)
    def longest(cfg):
        if ring.is_legitimate(cfg) is not None:
            return 0
        return 1 + max(longest(ring.fire(cfg, node)) for node in ring.privileged_set(cfg))

    return max(longest(cfg) for cfg in ring.configurations())


class TestGraph:

    @pytest.mark.parametrize('n, k, size', [(2, 2, 8), (3, 3, 81)])
    def test_one_vertex_per_configuration(self, n, k, size):
        assert len(Checker(Params(n=n, k=k)).build_graph()) == size

    def test_out_degree_is_privilege_count(self):
        checker = Checker(Params(n=2, k=2))
        graph = checker.build_graph()
        assert graph.out_degree(checker.ring.encode([0, 1, 0])) == 3

    def test_state_limit(self):
        with pytest.raises(StateSpaceTooLargeError) as e:
            Checker(Params(n=5, k=5), state_limit=1000).build_graph()
        assert e.value.size == 5 ** 6
        assert e.value.limit == 1000

    def test_networkx_view_drops_node0_moves(self):
        checker = Checker(Params(n=2, k=2))
        moves = checker.build_graph().to_networkx(skip_node0=True)
        assert all(data['node'] != 0 for _, _, data in moves.edges(data=True))


class TestConvergence:

    @pytest.mark.parametrize('n, k', [(2, 2), (3, 3), (2, 3), (4, 4), (3, 4), (4, 5), (5, 5)])
    def test_converges_for_k_at_least_n(self, n, k):
        verdict = Checker(Params(n=n, k=k)).check_convergence()
        assert isinstance(verdict, Converges)

    def test_worst_case_two_by_two(self):
        assert Checker(Params(n=2, k=2)).worst_case_steps() == 1

    def test_worst_case_three_by_three(self):
        assert Checker(Params(n=3, k=3)).worst_case_steps() == 14

    @pytest.mark.parametrize('n, k', [(2, 2), (2, 3), (3, 3), (3, 4)])
    def test_random_runs_stay_within_the_worst_case(self, n, k):
        params = Params(n=n, k=k)
        checker, daemon = Checker(params), Daemon(params)
        table, bound = checker.convergence_table(), checker.worst_case_steps()
        for seed in range(200):
            rng = random.Random(seed)
            initial = [rng.randrange(k) for _ in range(n + 1)]
            trace = daemon.run(initial, RandomDaemon(seed), max_steps=bound + 1)
            assert trace.terminated_reason == TerminatedReason.REACHED_LEGITIMATE
            assert len(trace.steps) <= table[checker.ring.encode(initial)] <= bound

    @pytest.mark.parametrize('n, k', [(2, 1), (4, 1)])
    def test_single_state_needs_no_steps(self, n, k):
        assert Checker(Params(n=n, k=k)).worst_case_steps() == 0

    @pytest.mark.parametrize('n, k', [(2, 3), (3, 3), (3, 4)])
    def test_worst_case_matches_recursive_oracle(self, n, k):
        params = Params(n=n, k=k)
        assert Checker(params).worst_case_steps() == longest_illegitimate_run(params)

    def test_maximizing_configuration_needs_the_worst_case(self):
        checker = Checker(Params(n=2, k=2))
        assert checker.maximizing_configuration() == (0, 1, 0)
        table = checker.convergence_table()
        assert table[checker.ring.encode([1, 0, 1])] == 1
        assert table[checker.ring.encode([1, 1, 0])] == 0

    def test_exact_adversary_attains_the_worst_case(self):
        params = Params(n=3, k=3)
        checker = Checker(params)
        start = checker.maximizing_configuration()
        trace = Daemon(params).run(start, checker.adversary())
        assert len(trace.steps) == checker.worst_case_steps()

    def test_adversary_falls_back_to_heuristic(self):
        adversary = Checker(Params(n=5, k=5), state_limit=100).adversary()
        assert not adversary.exact

    def test_counterexample_absent_when_converging(self):
        assert Checker(Params(n=2, k=2)).find_counterexample() is None

    def test_small_k_verdict_is_replayable(self):
        params = Params(n=4, k=2)
        checker = Checker(params)
        verdict = checker.check_convergence()
        if verdict.converges:
            assert checker.find_counterexample() is None
            return
        lasso = checker.find_counterexample()
        assert lasso.cycle[-1].after == lasso.cycle[0].before
        assert all(checker.ring.is_legitimate(step.before) is None for step in lasso.steps())
        assert Daemon(params).replay(Trace(params=params, steps=lasso.steps())).valid
        with pytest.raises(InvalidStateError):
            checker.worst_case_steps()

    def test_two_states_on_four_nodes_diverge(self):
        # 0110 -> 0010 -> 1010 -> 1011 -> 1001 -> 1101 -> 0101 -> 0100 -> 0110, all illegitimate
        params = Params(n=3, k=2)
        verdict = Checker(params).check_convergence()
        assert not verdict.converges
        assert Checker(params).validate_lasso(verdict.lasso)


class TestLemmas:

    @pytest.mark.parametrize('n, k', [(2, 2), (4, 2), (3, 3)])
    def test_closure(self, n, k):
        assert Checker(Params(n=n, k=k)).check_closure().holds

    def test_closure_fails_on_tampered_moves(self):
        checker = Checker(Params(n=2, k=2))
        graph = checker.build_graph()
        # [0,0,0] now steps to the illegitimate [0,1,0]
        graph.successors[0] = ((0, 2),)
        report = checker.check_closure()
        assert not report.holds
        assert report.counterexample.configuration == (0, 0, 0)
        assert report.counterexample.node == 0
        assert report.counterexample.successor == (0, 1, 0)

    @pytest.mark.parametrize('n, k', [(2, 2), (3, 4), (1, 2)])
    def test_no_termination(self, n, k):
        assert Checker(Params(n=n, k=k)).check_no_termination().holds

    def test_no_termination_fails_on_tampered_moves(self):
        checker = Checker(Params(n=2, k=2))
        checker.build_graph().successors[3] = ()
        report = checker.check_no_termination()
        assert not report.holds
        assert report.counterexample.configuration == (0, 1, 1)

    @pytest.mark.parametrize('n, k', [(2, 2), (3, 3), (4, 2)])
    def test_node0_liveness(self, n, k):
        assert Checker(Params(n=n, k=k)).check_node0_liveness().holds

    @pytest.mark.parametrize('n, k', [
        pytest.param(n, k, marks=[pytest.mark.slow] if k ** (n + 1) > 5000 else [])
        for n in range(2, 6) for k in range(2, 7)])
    def test_lemmas_over_small_rings(self, n, k):
        checker = Checker(Params(n=n, k=k))
        assert checker.check_closure().holds
        assert checker.check_no_termination().holds
        assert checker.check_node0_liveness().holds

    def test_privileged_histogram(self):
        assert Checker(Params(n=2, k=2)).privileged_histogram() == {1: 6, 3: 2}


class TestSweep:

    def test_k_rules(self):
        assert k_values(3, 'n-1') == [2]
        assert k_values(3, 'n') == [3]
        assert k_values(3, 'n+1') == [4]
        assert k_values(3, [3, 1, 3]) == [1, 3]
        with pytest.raises(ParameterError):
            k_values(3, 'n+2')

    def test_k_equal_n(self):
        rows = sweep(range(2, 5), 'n')
        assert [(row.n, row.k, row.verdict) for row in rows] == [(2, 2, 'converges'), (3, 3, 'converges'),
                                                                 (4, 4, 'converges')]

    def test_k_above_n(self):
        assert all(row.verdict == 'converges' for row in sweep(range(2, 4), 'n+1'))

    def test_single_state(self):
        (row,) = sweep([2], [1])
        assert row.verdict == 'converges'
        assert row.worst_case_steps == 0

    def test_oversized_and_invalid_instances_are_skipped(self):
        rows = sweep([1, 6], 'n-1', state_limit=1000)
        assert [row.verdict for row in rows] == ['skipped', 'skipped']
        assert 'exceeds' in rows[1].note

    def test_frontier(self):
        report = frontier(2, k_max=3)
        assert [row.k for row in report.rows] == [1, 2, 3]
        assert report.stable_from == 1

    def test_frontier_after_a_diverging_k(self):
        report = frontier(3)
        assert [row.verdict for row in report.rows][1] == 'diverges'
        assert report.stable_from == 3
