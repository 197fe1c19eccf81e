"""
Central daemon: one privileged node fires per step.
"""
import logging
import random
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
from kstate_ring.protocol import Params, Ring, Configuration
from kstate_ring.utility import (RingCommon, ParameterError, IllegalScheduleError, DaemonStopped,
                                 DEFAULT_MAX_STEPS_FACTOR)

log = logging.getLogger(__name__)


class TerminatedReason(str, Enum):
    REACHED_LEGITIMATE = 'reached-legitimate'
    MAX_STEPS = 'max-steps'
    USER_STOP = 'user-stop'


@dataclass(frozen=True)
class TraceStep:
    step_index: int
    fired: int
    before: Configuration
    after: Configuration


@dataclass
class Trace:
    params: Params
    steps: list[TraceStep] = field(default_factory=list)
    terminated_reason: Optional[TerminatedReason] = None
    strategy: str = 'unknown'
    seed: Optional[int] = None
    initial: Optional[Configuration] = None

    @property
    def final(self) -> Optional[Configuration]:
        return self.steps[-1].after if self.steps else self.initial


@dataclass(frozen=True)
class ReplayVerdict:
    valid: bool
    step_index: Optional[int] = None
    reason: str = ''


@dataclass(frozen=True)
class TraceStatistics:
    fires_per_node: tuple[int, ...]
    first_legitimate_step: Optional[int]


###
# Strategies
#

class DaemonStrategy:
    """
    Base for the daemon policies. select() may return any node; Daemon.select() checks the choice is privileged.
    """

    name: str = 'strategy'
    seed: Optional[int] = None

    def reset(self) -> None:
        pass

    def select(self, ring: Ring, cfg: Configuration, history: Trace) -> int:
        raise NotImplementedError


class RoundRobin(DaemonStrategy):
    name = 'round-robin'

    def select(self, ring: Ring, cfg: Configuration, history: Trace) -> int:
        start = (history.steps[-1].fired + 1) % (ring.n + 1) if history.steps else 0
        for offset in range(ring.n + 1):
            node = (start + offset) % (ring.n + 1)
            if ring._is_privileged(cfg, node):
                return node
        raise IllegalScheduleError(f'No privileged node in {list(cfg)}', step_index=len(history.steps))


class RandomDaemon(DaemonStrategy):
    """
    Uniform choice over the privileged set (ascending node order) using random.Random (Mersenne Twister), which
    gives the same sequence on every platform for the same seed
    """

    name = 'random'

    def __init__(self, seed: int = 0):
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            log.error(f'Seed must be an unsigned 64-bit integer, got: {seed!r}')
            raise ParameterError(f'Seed must be an unsigned 64-bit integer, got: {seed!r}')
        self.seed: int = seed
        self.rng: random.Random = random.Random(seed)

    def reset(self) -> None:
        self.rng = random.Random(self.seed)

    def select(self, ring: Ring, cfg: Configuration, history: Trace) -> int:
        nodes = ring._privileged_nodes(cfg)
        return nodes[self.rng.randrange(len(nodes))]


class Adversarial(DaemonStrategy):
    """
    Picks the privileged node leading to the configuration farthest from the legitimate set.

    With a steps-to-legitimacy table (indexed by configuration encoding, see Checker.convergence_table) the choice is
    exact. Without one, the node whose firing leaves the most privileged nodes is chosen. Ties go to the smallest id.
    """

    name = 'adversarial'

    def __init__(self, table: Optional[Sequence[int]] = None):
        self.table: Optional[Sequence[int]] = table

    @property
    def exact(self) -> bool:
        return self.table is not None

    def select(self, ring: Ring, cfg: Configuration, history: Trace) -> int:
        best_node, best_score = -1, -1
        for node in ring._privileged_nodes(cfg):
            successor = ring._fire(cfg, node)
            if self.table is not None:
                score = self.table[ring._encode(successor)]
            else:
                score = len(ring._privileged_nodes(successor))
            if score > best_score:
                best_node, best_score = node, score
        return best_node


class Scripted(DaemonStrategy):
    name = 'scripted'

    def __init__(self, nodes: Sequence[int]):
        self.nodes: tuple[int, ...] = tuple(nodes)

    def select(self, ring: Ring, cfg: Configuration, history: Trace) -> int:
        position = len(history.steps)
        if position >= len(self.nodes):
            raise IllegalScheduleError(f'Schedule exhausted after {len(self.nodes)} steps', step_index=position)
        return self.nodes[position]


class Interactive(DaemonStrategy):
    """
    Delegates every choice to `choose(cfg, privileged, history)`. Returning None ends the run (user-stop).
    """

    name = 'interactive'

    def __init__(self, choose: Callable[[Configuration, frozenset[int], Trace], Optional[int]]):
        self.choose = choose

    def select(self, ring: Ring, cfg: Configuration, history: Trace) -> int:
        node = self.choose(cfg, frozenset(ring._privileged_nodes(cfg)), history)
        if node is None:
            raise DaemonStopped('Interactive daemon stopped by user')
        return node


###
# Engine
#

class Daemon(RingCommon):
    """
    Runs, and replays, central daemon schedules for one (n, k) instance
    """

    def __init__(self, params: Params):
        self.log: logging.Logger = logging.getLogger(__name__)
        self.params: Params = params
        self.ring: Ring = Ring(params)
        self.n: int = params.n
        self.k: int = params.k

    def select(self, strategy: DaemonStrategy, cfg: Configuration, history: Trace) -> int:
        node = strategy.select(self.ring, cfg, history)
        if isinstance(node, bool) or not isinstance(node, int) or not 0 <= node <= self.n \
                or not self.ring._is_privileged(cfg, node):
            self.log.error(f'{strategy.name} daemon chose node {node!r}, not privileged in {list(cfg)} '
                           f'at step {len(history.steps)}')
            raise IllegalScheduleError(f'{strategy.name} daemon chose node {node!r}, not privileged in {list(cfg)} '
                                       f'at step {len(history.steps)}', step_index=len(history.steps))
        return node

    def run(self, initial: Sequence[int], strategy: DaemonStrategy, max_steps: Optional[int] = None,
            stop_on_legitimate: bool = True) -> Trace:
        """
        Iterates select + fire from `initial`

        Parameters
        ----------
        initial: starting configuration
        strategy: daemon policy, reset before the run so equal inputs give equal traces
        max_steps: step budget, DEFAULT_MAX_STEPS_FACTOR * k**(n+1) when None
        stop_on_legitimate: stop before the first step taken from a legitimate configuration

        Returns
        -------
        Trace with its terminated_reason set
        """
        states = self.verify_configuration(initial)
        if max_steps is None:
            max_steps = DEFAULT_MAX_STEPS_FACTOR * self.params.state_space
        if max_steps < 0:
            self.log.error(f'max_steps must not be negative, got: {max_steps}')
            raise ParameterError(f'max_steps must not be negative, got: {max_steps}')

        strategy.reset()
        trace = Trace(params=self.params, strategy=strategy.name, seed=strategy.seed, initial=states)
        self.log.info(f'Run started: {self.params.describe()}, {strategy.name} daemon, initial {list(states)}, '
                      f'max_steps={max_steps}')

        while True:
            if stop_on_legitimate and self.ring._witness(states) is not None:
                trace.terminated_reason = TerminatedReason.REACHED_LEGITIMATE
                break
            if len(trace.steps) >= max_steps:
                trace.terminated_reason = TerminatedReason.MAX_STEPS
                break
            try:
                node = self.select(strategy, states, trace)
            except DaemonStopped:
                trace.terminated_reason = TerminatedReason.USER_STOP
                break
            after = self.ring._fire(states, node)
            trace.steps.append(TraceStep(step_index=len(trace.steps), fired=node, before=states, after=after))
            states = after

        self.log.info(f'Run stopped after {len(trace.steps)} steps: {trace.terminated_reason.value}, '
                      f'final {list(states)}')
        return trace

    def replay(self, trace: Trace) -> ReplayVerdict:
        """
        Re-executes every step. The verdict names the position of the first step that does not check out.
        """
        previous = trace.initial
        for position, step in enumerate(trace.steps):
            try:
                before = self.verify_configuration(step.before)
                after = self.verify_configuration(step.after)
                self.verify_node(step.fired)
            except ParameterError as e:
                return self.__diverged(position, f'malformed step: {e}')
            if previous is not None and before != tuple(previous):
                return self.__diverged(position, f'before-state {list(before)} does not continue from '
                                                 f'{list(previous)}')
            if not self.ring._is_privileged(before, step.fired):
                return self.__diverged(position, f'node {step.fired} is not privileged in {list(before)}')
            expected = self.ring._fire(before, step.fired)
            if after != expected:
                return self.__diverged(position, f'after-state {list(after)} differs from expected {list(expected)}')
            previous = after
        return ReplayVerdict(valid=True)

    def statistics(self, trace: Trace) -> TraceStatistics:
        fires = [0] * (self.n + 1)
        for step in trace.steps:
            fires[step.fired] += 1

        first_legitimate = None
        configurations = ([trace.initial] if trace.initial is not None else []) + [s.after for s in trace.steps]
        offset = 0 if trace.initial is not None else 1
        for position, states in enumerate(configurations):
            if self.ring._witness(tuple(states)) is not None:
                first_legitimate = position + offset
                break
        return TraceStatistics(fires_per_node=tuple(fires), first_legitimate_step=first_legitimate)

    def __diverged(self, position: int, reason: str) -> ReplayVerdict:
        self.log.warning(f'Replay diverged at step {position}: {reason}')
        return ReplayVerdict(valid=False, step_index=position, reason=reason)


def trace_statistics(trace: Trace) -> TraceStatistics:
    return Daemon(trace.params).statistics(trace)
