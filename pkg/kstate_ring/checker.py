"""
Explicit-state model checking over the full configuration graph of one (n, k) instance.

Results are for finite instances only: a Converges verdict says every central daemon schedule from every
configuration of THAT instance reaches the legitimate set. Nothing here proves the statement for unbounded n.
"""
import logging
import time
from collections import Counter, deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Optional, Union
import networkx as nx
from kstate_ring.protocol import Params, Ring, Configuration
from kstate_ring.daemon import Daemon, Trace, TraceStep, Adversarial
from kstate_ring.utility import (RingCommon, ParameterError, StateSpaceTooLargeError, InvalidStateError,
                                 DEFAULT_STATE_LIMIT)

log = logging.getLogger(__name__)


###
# Results
#

@dataclass(frozen=True)
class Lasso:
    """
    stem leads from its first before-state into the cycle; cycle returns to its own first before-state
    """

    stem: tuple[TraceStep, ...]
    cycle: tuple[TraceStep, ...]

    @property
    def start(self) -> Configuration:
        return (self.stem or self.cycle)[0].before

    def steps(self) -> list[TraceStep]:
        return list(self.stem) + list(self.cycle)


@dataclass(frozen=True)
class Converges:
    worst_case_steps: int

    converges = True


@dataclass(frozen=True)
class Diverges:
    lasso: Lasso

    converges = False


Verdict = Union[Converges, Diverges]


@dataclass(frozen=True)
class Counterexample:
    configuration: Configuration
    node: Optional[int] = None
    successor: Optional[Configuration] = None
    note: str = ''


@dataclass(frozen=True)
class PropertyReport:
    name: str
    holds: bool
    counterexample: Optional[Counterexample] = None


@dataclass(frozen=True)
class SweepRow:
    n: int
    k: int
    verdict: str
    worst_case_steps: Optional[int] = None
    cycle_length: Optional[int] = None
    seconds: float = 0.0
    note: str = ''


@dataclass(frozen=True)
class FrontierReport:
    n: int
    rows: tuple[SweepRow, ...]
    stable_from: Optional[int]


class TransitionGraph:
    """
    Move relation over every encoded configuration: successors[code] lists (fired node, successor code) pairs in
    ascending node order, legitimate[code] is 1 for legitimate configurations
    """

    def __init__(self, params: Params, successors: list[tuple[tuple[int, int], ...]], legitimate: bytearray):
        self.params: Params = params
        self.successors: list[tuple[tuple[int, int], ...]] = successors
        self.legitimate: bytearray = legitimate

    def __len__(self) -> int:
        return len(self.successors)

    def out_degree(self, code: int) -> int:
        return len(self.successors[code])

    def to_networkx(self, illegitimate_only: bool = False, skip_node0: bool = False) -> nx.DiGraph:
        """
        Returns the move relation as a networkx DiGraph, edges carry the fired node as attribute 'node'.

        illegitimate_only: keep only illegitimate configurations and the moves between them
        skip_node0: drop the moves of node 0
        """
        graph = nx.DiGraph()
        codes = [code for code in range(len(self.successors))
                 if not (illegitimate_only and self.legitimate[code])]
        graph.add_nodes_from(codes)
        edges = []
        for code in codes:
            for node, successor in sorted(self.successors[code], key=lambda edge: edge[1]):
                if skip_node0 and node == 0:
                    continue
                if illegitimate_only and self.legitimate[successor]:
                    continue
                edges.append((code, successor, {'node': node}))
        graph.add_edges_from(edges)
        return graph


class Checker(RingCommon):
    """
    Builds the configuration graph of one instance and decides convergence, closure, non-termination and node 0
    liveness on it
    """

    def __init__(self, params: Params, state_limit: int = DEFAULT_STATE_LIMIT):
        """
        :param params: ring parameters
        :param state_limit: (int) largest number of configurations that will be enumerated
        """
        self.log: logging.Logger = logging.getLogger(__name__)
        self.params: Params = params
        self.ring: Ring = Ring(params)
        self.n: int = params.n
        self.k: int = params.k
        self.state_limit: int = state_limit
        self.graph: Optional[TransitionGraph] = None

        self._verdict: Optional[Verdict] = None
        self._table: Optional[list[int]] = None

    ###
    # Graph
    #

    def build_graph(self) -> TransitionGraph:
        size = self.params.state_space
        self.verify_state_limit(size, self.state_limit)
        self.log.info(f'Building transition graph for {self.params.describe()}: {size} configurations')

        ring = self.ring
        successors: list[tuple[tuple[int, int], ...]] = []
        legitimate = bytearray(size)
        for code, states in enumerate(ring.configurations()):
            edges = []
            for node in ring._privileged_nodes(states):
                new = (states[0] + 1) % self.k if node == 0 else states[node - 1]
                edges.append((node, code + (new - states[node]) * ring.weights[node]))
            successors.append(tuple(edges))
            if ring._witness(states) is not None:
                legitimate[code] = 1

        self.graph = TransitionGraph(self.params, successors, legitimate)
        self.log.info(f'Transition graph built: {size} configurations, {sum(legitimate)} legitimate')
        return self.graph

    def _graph(self) -> TransitionGraph:
        if self.graph is None:
            self.build_graph()
        return self.graph

    ###
    # Convergence
    #

    def check_convergence(self) -> Verdict:
        """
        Converges iff no cycle exists among illegitimate configurations. Legitimate configurations are closed under
        moves, so a schedule that never stabilizes must loop among illegitimate ones.
        """
        if self._verdict is not None:
            return self._verdict

        graph = self._graph()
        illegitimate = graph.to_networkx(illegitimate_only=True)

        if nx.is_directed_acyclic_graph(illegitimate):
            table = [0] * len(graph)
            for code in reversed(list(nx.topological_sort(illegitimate))):
                table[code] = 1 + max((0 if graph.legitimate[successor] else table[successor]
                                       for _, successor in graph.successors[code]), default=0)
            self._table = table
            self._verdict = Converges(worst_case_steps=max(table, default=0))
            self.log.info(f'{self.params.describe()}: converges, worst case {self._verdict.worst_case_steps} steps')
        else:
            lasso = self.__lasso(illegitimate)
            self._verdict = Diverges(lasso=lasso)
            self.log.info(f'{self.params.describe()}: diverges, lasso with stem {len(lasso.stem)} '
                          f'and cycle {len(lasso.cycle)}')
        return self._verdict

    def worst_case_steps(self) -> int:
        verdict = self.check_convergence()
        if not verdict.converges:
            self.log.error(f'{self.params.describe()} diverges, worst_case_steps is undefined')
            raise InvalidStateError(f'{self.params.describe()} diverges, worst_case_steps is undefined')
        return verdict.worst_case_steps

    def convergence_table(self) -> list[int]:
        """
        Longest number of daemon steps from each configuration (by encoding) until the first legitimate one
        """
        self.worst_case_steps()
        return self._table

    def maximizing_configuration(self) -> Configuration:
        table = self.convergence_table()
        worst = max(table, default=0)
        return self.ring._decode(table.index(worst))

    def find_counterexample(self) -> Optional[Lasso]:
        verdict = self.check_convergence()
        if verdict.converges:
            return None
        if not self.validate_lasso(verdict.lasso):
            self.log.error(f'Lasso for {self.params.describe()} failed validation')
            raise InvalidStateError(f'Lasso for {self.params.describe()} failed validation')
        return verdict.lasso

    def validate_lasso(self, lasso: Lasso) -> bool:
        """
        Replays stem and cycle, checks the cycle closes and holds no legitimate configuration
        """
        if not lasso.cycle:
            return False
        trace = Trace(params=self.params, steps=lasso.steps(), strategy='lasso')
        if not Daemon(self.params).replay(trace).valid:
            return False
        if lasso.cycle[-1].after != lasso.cycle[0].before:
            return False
        return all(self.ring._witness(step.before) is None for step in lasso.cycle)

    def adversary(self) -> Adversarial:
        """
        Exact adversary when this instance converges within the state limit, heuristic adversary otherwise
        """
        try:
            return Adversarial(self.convergence_table())
        except StateSpaceTooLargeError:
            self.log.warning(f'{self.params.describe()} exceeds the state limit, adversary falls back to heuristic')
        except InvalidStateError:
            self.log.warning(f'{self.params.describe()} diverges, adversary falls back to heuristic')
        return Adversarial()

    ###
    # Lemmas
    #

    def check_closure(self) -> PropertyReport:
        graph = self._graph()
        for code in range(len(graph)):
            if not graph.legitimate[code]:
                continue
            edges = graph.successors[code]
            if len(edges) != 1:
                return self.__failed('closure', code, note=f'{len(edges)} privileged nodes in a legitimate '
                                                           f'configuration')
            node, successor = edges[0]
            if not graph.legitimate[successor]:
                return self.__failed('closure', code, node, successor, note='move leaves the legitimate set')
        return PropertyReport(name='closure', holds=True)

    def check_no_termination(self) -> PropertyReport:
        graph = self._graph()
        for code in range(len(graph)):
            if not graph.successors[code]:
                return self.__failed('no-termination', code, note='no privileged node')
        return PropertyReport(name='no-termination', holds=True)

    def check_node0_liveness(self) -> PropertyReport:
        """
        Holds iff the moves of nodes 1..n alone cannot loop, i.e. no infinite schedule avoids node 0
        """
        moves = self._graph().to_networkx(skip_node0=True)
        try:
            cycle = nx.find_cycle(moves)
        except nx.NetworkXNoCycle:
            return PropertyReport(name='node0-liveness', holds=True)
        code, successor = cycle[0][0], cycle[0][1]
        return self.__failed('node0-liveness', code, moves.edges[code, successor]['node'], successor,
                             note=f'cycle of {len(cycle)} moves without node 0')

    def privileged_histogram(self) -> dict[int, int]:
        """
        Number of configurations per privilege count
        """
        counts = Counter(len(edges) for edges in self._graph().successors)
        return dict(sorted(counts.items()))

    ###
    # Utility
    #

    def __failed(self, name: str, code: int, node: Optional[int] = None, successor: Optional[int] = None,
                 note: str = '') -> PropertyReport:
        counterexample = Counterexample(configuration=self.ring._decode(code), node=node,
                                        successor=None if successor is None else self.ring._decode(successor),
                                        note=note)
        self.log.warning(f'{name} fails for {self.params.describe()}: {counterexample}')
        return PropertyReport(name=name, holds=False, counterexample=counterexample)

    def __lasso(self, illegitimate: nx.DiGraph) -> Lasso:
        """
        Shortest stem from the smallest configuration that can reach a cycle, then a shortest cycle through the
        configuration the stem enters. Ties go to the smaller encoding.
        """
        component_of: dict[int, int] = {}
        components = [component for component in nx.strongly_connected_components(illegitimate)
                      if len(component) > 1 or any(illegitimate.has_edge(c, c) for c in component)]
        for index, component in enumerate(components):
            for code in component:
                component_of[code] = index

        basin = set(component_of)
        queue = deque(sorted(basin))
        while queue:
            code = queue.popleft()
            for predecessor in illegitimate.predecessors(code):
                if predecessor not in basin:
                    basin.add(predecessor)
                    queue.append(predecessor)
        start = min(basin)

        # stem
        parent: dict[int, Optional[int]] = {start: None}
        entry = start if start in component_of else None
        queue = deque([start])
        while entry is None and queue:
            code = queue.popleft()
            for successor in sorted(illegitimate.successors(code)):
                if successor in parent:
                    continue
                parent[successor] = code
                if successor in component_of:
                    entry = successor
                    break
                queue.append(successor)
        stem_codes = [entry]
        while parent[stem_codes[-1]] is not None:
            stem_codes.append(parent[stem_codes[-1]])
        stem_codes.reverse()

        # cycle through entry, inside its component
        component = components[component_of[entry]]
        back: dict[int, int] = {}
        closing = None
        queue = deque([entry])
        while closing is None and queue:
            code = queue.popleft()
            for successor in sorted(illegitimate.successors(code)):
                if successor not in component:
                    continue
                if successor == entry:
                    closing = code
                    break
                if successor not in back:
                    back[successor] = code
                    queue.append(successor)
        cycle_codes = [closing]
        while cycle_codes[-1] != entry:
            cycle_codes.append(back[cycle_codes[-1]])
        cycle_codes.reverse()
        cycle_codes.append(entry)

        stem = self.__steps(illegitimate, stem_codes, 0)
        cycle = self.__steps(illegitimate, cycle_codes, len(stem))
        return Lasso(stem=tuple(stem), cycle=tuple(cycle))

    def __steps(self, graph: nx.DiGraph, codes: Sequence[int], first_index: int) -> list[TraceStep]:
        return [TraceStep(step_index=first_index + position, fired=graph.edges[u, v]['node'],
                          before=self.ring._decode(u), after=self.ring._decode(v))
                for position, (u, v) in enumerate(zip(codes, codes[1:]))]


###
# Sweeps
#

def k_values(n: int, k_rule: Union[str, Sequence[int]]) -> list[int]:
    if isinstance(k_rule, str):
        offsets = {'n-1': -1, 'n': 0, 'n+1': 1}
        if k_rule not in offsets:
            log.error(f'Unknown k rule: {k_rule}, use n-1, n, n+1 or a list of values')
            raise ParameterError(f'Unknown k rule: {k_rule}, use n-1, n, n+1 or a list of values')
        return [n + offsets[k_rule]]
    return sorted(set(k_rule))


def sweep(n_values: Iterable[int], k_rule: Union[str, Sequence[int]],
          state_limit: int = DEFAULT_STATE_LIMIT) -> list[SweepRow]:
    """
    One convergence row per (n, k), ordered by (n, k). Invalid or oversized instances become 'skipped' rows.

    Parameters
    ----------
    n_values: highest node indices to check
    k_rule: 'n-1', 'n', 'n+1' or an explicit list of k values applied to every n
    state_limit: per-instance limit handed to the checker
    """
    rows = []
    for n in n_values:
        for k in k_values(n, k_rule):
            started = time.perf_counter()
            try:
                verdict = Checker(Params(n=n, k=k), state_limit=state_limit).check_convergence()
            except (ParameterError, StateSpaceTooLargeError) as e:
                log.warning(f'Skipping n={n}, k={k}: {e}')
                rows.append(SweepRow(n=n, k=k, verdict='skipped', seconds=time.perf_counter() - started,
                                     note=str(e)))
                continue
            seconds = time.perf_counter() - started
            if verdict.converges:
                rows.append(SweepRow(n=n, k=k, verdict='converges', worst_case_steps=verdict.worst_case_steps,
                                     seconds=seconds))
            else:
                rows.append(SweepRow(n=n, k=k, verdict='diverges', cycle_length=len(verdict.lasso.cycle),
                                     seconds=seconds))
    rows.sort(key=lambda row: (row.n, row.k))
    return rows


def frontier(n: int, k_max: Optional[int] = None, state_limit: int = DEFAULT_STATE_LIMIT) -> FrontierReport:
    """
    Verdicts for k = 1..k_max (default n+1) and the smallest k from which every checked k converges
    """
    if k_max is None:
        k_max = n + 1
    rows = sweep([n], list(range(1, k_max + 1)), state_limit=state_limit)

    stable_from = None
    for row in reversed(rows):
        if row.verdict != 'converges':
            break
        stable_from = row.k
    log.info(f'Frontier for n={n}: converges for every k from {stable_from} up to {k_max}')
    return FrontierReport(n=n, rows=tuple(rows), stable_from=stable_from)
