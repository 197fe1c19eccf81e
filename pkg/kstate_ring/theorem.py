"""
Milestone probes for the K = N stabilization argument.

A pair is two consecutive firings of node 0. The first fires from x[0] = x[n] = b and leaves x[0] = b+1; before the
second, node n must adopt b+1 by copying node n-1, and at that moment nodes n-1, n and 0 all hold b+1. When k >= n some
value a is then missing from the ring. Independently, once a step leaves x[0] = a with a held by no other node, the
next firing of node 0 must happen from the all-a configuration.

The same automaton drives the per-trace probes and the exhaustive search over (configuration, probe phase) pairs.
"""
import logging
import random
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
from kstate_ring.protocol import Params, Ring, Configuration
from kstate_ring.daemon import Daemon, Trace, RandomDaemon
from kstate_ring.utility import (RingCommon, ParameterError, InvalidTraceError, DEFAULT_STATE_LIMIT,
                                 DEFAULT_MAX_STEPS_FACTOR, PRODUCT_PHASES)

log = logging.getLogger(__name__)

THREE_SHARE = 'three-share'
ABSENT_VALUE = 'absent-value'
SWEEP = 'sweep'
MILESTONES = (THREE_SHARE, ABSENT_VALUE, SWEEP)

# pair phases
NO_PAIR, OPEN, ADOPTED, PREHELD = 0, 1, 2, 3

# violation examples kept in an aggregate report, counts are always complete
MAX_REPORTED_VIOLATIONS = 20


class EventKind(str, Enum):
    NODE0_FIRST_FIRE = 'node0-first-fire'
    NODEN_ADOPTS = 'nodeN-adopts'
    NODE0_SECOND_FIRE = 'node0-second-fire'
    ABSENT_VALUE_OBSERVED = 'absent-value-observed'
    UNIQUE_VALUE_AT_NODE0 = 'unique-value-at-node0'
    SWEEP_COMPLETE = 'sweep-complete'


MILESTONE_OF: dict[EventKind, str] = {
    EventKind.NODE0_FIRST_FIRE: THREE_SHARE,
    EventKind.NODEN_ADOPTS: THREE_SHARE,
    EventKind.NODE0_SECOND_FIRE: THREE_SHARE,
    EventKind.ABSENT_VALUE_OBSERVED: ABSENT_VALUE,
    EventKind.UNIQUE_VALUE_AT_NODE0: SWEEP,
    EventKind.SWEEP_COMPLETE: SWEEP,
}


@dataclass(frozen=True)
class ProbeEvent:
    """
    value is b for node0-first-fire, b+1 for nodeN-adopts / node0-second-fire, a for the others.
    witnesses lists the whole absent set for absent-value-observed.
    """

    kind: EventKind
    step_index: Optional[int]
    value: int
    witnesses: tuple[int, ...] = ()


@dataclass(frozen=True)
class Violation:
    milestone: str
    step_index: Optional[int]
    configuration: Configuration
    node: int
    detail: str


@dataclass
class ProbeReport:
    probe: str
    trace: Optional[Trace] = None
    events: list[ProbeEvent] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    precondition_met: bool = True
    inconclusive: int = 0
    outside_pattern: int = 0

    @property
    def holds(self) -> bool:
        return not self.violations


@dataclass
class MilestoneReport:
    n: int
    k: int
    mode: str
    runs: int = 0
    explored_states: int = 0
    seed: Optional[int] = None
    depth: Optional[int] = None
    event_counts: dict[str, int] = field(default_factory=lambda: {kind.value: 0 for kind in EventKind})
    violation_counts: dict[str, int] = field(default_factory=lambda: {milestone: 0 for milestone in MILESTONES})
    violations: list[Violation] = field(default_factory=list)
    outside_pattern: int = 0
    inconclusive: int = 0
    absent_value_checked: bool = True

    @property
    def holds(self) -> bool:
        return not any(self.violation_counts.values())

    def add_event(self, event: ProbeEvent) -> None:
        self.event_counts[event.kind.value] += 1

    def add_violation(self, violation: Violation) -> None:
        self.violation_counts[violation.milestone] += 1
        if len(self.violations) < MAX_REPORTED_VIOLATIONS:
            self.violations.append(violation)


@dataclass(frozen=True)
class Outcome:
    pair: int
    armed: bool
    events: tuple[ProbeEvent, ...]
    violations: tuple[Violation, ...]
    outside_pattern: bool = False


class MilestoneAutomaton(RingCommon):
    """
    Phase of the probes: `pair` (NO_PAIR, OPEN, ADOPTED, PREHELD) and `armed` (a unique value sits at node 0).
    b+1 and a are always the current x[0], so the phase needs no values of its own.
    """

    def __init__(self, params: Params):
        self.log: logging.Logger = logging.getLogger(__name__)
        self.params: Params = params
        self.n: int = params.n
        self.k: int = params.k
        # three distinct nodes need n > 1, the pigeonhole step needs k >= n
        self.pairs_enabled: bool = params.n > 1
        self.absent_enabled: bool = self.pairs_enabled and params.k >= params.n

    def advance(self, pair: int, armed: bool, before: Configuration, node: int, after: Configuration,
                step_index: Optional[int] = None) -> Outcome:
        n = self.n
        events: list[ProbeEvent] = []
        violations: list[Violation] = []
        outside = False

        if node == 0:
            if armed:
                a = before[0]
                if all(value == a for value in before):
                    events.append(ProbeEvent(EventKind.SWEEP_COMPLETE, step_index, a))
                else:
                    violations.append(Violation(SWEEP, step_index, before, node,
                                                f'node 0 fired from {list(before)} while a={a} had not swept the '
                                                f'ring'))
                armed = False

            if self.pairs_enabled:
                if pair == ADOPTED:
                    events.append(ProbeEvent(EventKind.NODE0_SECOND_FIRE, step_index, before[0]))
                elif pair == OPEN:
                    violations.append(Violation(THREE_SHARE, step_index, before, node,
                                                f'node 0 fired again before node {n} adopted {before[0]}'))
                elif pair == PREHELD:
                    outside = True
                events.append(ProbeEvent(EventKind.NODE0_FIRST_FIRE, step_index, before[0]))
                pair = PREHELD if after[n] == after[0] else OPEN

        elif node == n and pair in (OPEN, PREHELD) and after[n] == after[0]:
            shared = after[0]
            events.append(ProbeEvent(EventKind.NODEN_ADOPTS, step_index, shared))
            if not after[n - 1] == after[n] == after[0]:
                violations.append(Violation(THREE_SHARE, step_index, after, node,
                                            f'nodes {n - 1}, {n}, 0 do not all hold {shared} in {list(after)}'))
            if self.absent_enabled:
                absent = sorted(frozenset(range(self.k)) - frozenset(after))
                if not absent or shared in absent:
                    violations.append(Violation(ABSENT_VALUE, step_index, after, node,
                                                f'absent values {absent} in {list(after)}'))
                else:
                    events.append(ProbeEvent(EventKind.ABSENT_VALUE_OBSERVED, step_index, absent[0],
                                             witnesses=tuple(absent)))
            pair = ADOPTED

        if not armed and after[0] not in after[1:]:
            armed = True
            events.append(ProbeEvent(EventKind.UNIQUE_VALUE_AT_NODE0, step_index, after[0]))

        return Outcome(pair=pair, armed=armed, events=tuple(events), violations=tuple(violations),
                       outside_pattern=outside)


###
# Per-trace probes
#

def _walk(trace: Trace, validate: bool = True) -> dict[str, ProbeReport]:
    """
    Runs the automaton along a trace. Three-share and absent-value findings are kept only for pairs that close
    (node 0 fires a second time); sweep findings are kept as they happen.
    """
    params = trace.params
    if validate:
        verdict = Daemon(params).replay(trace)
        if not verdict.valid:
            log.error(f'Trace fails replay at step {verdict.step_index}: {verdict.reason}')
            raise InvalidTraceError(f'Trace fails replay at step {verdict.step_index}: {verdict.reason}',
                                    verdict=verdict)

    steps = ((step.step_index, tuple(step.before), step.fired, tuple(step.after)) for step in trace.steps)
    return _follow(MilestoneAutomaton(params), steps, trace)


def _follow(automaton: MilestoneAutomaton, steps: Iterable[tuple[Optional[int], Configuration, int, Configuration]],
            trace: Optional[Trace] = None) -> dict[str, ProbeReport]:
    """
    steps yields (step_index, before, node, after) in schedule order
    """
    reports = {milestone: ProbeReport(probe=milestone, trace=trace) for milestone in MILESTONES}
    reports[THREE_SHARE].precondition_met = automaton.pairs_enabled
    reports[ABSENT_VALUE].precondition_met = automaton.absent_enabled

    pair, armed = NO_PAIR, False
    pending_events: list[ProbeEvent] = []
    pending_violations: list[Violation] = []

    for step_index, before, node, after in steps:
        outcome = automaton.advance(pair, armed, before, node, after, step_index)

        if node == 0 and pair != NO_PAIR:
            if outcome.outside_pattern:
                reports[THREE_SHARE].outside_pattern += 1
            else:
                for event in pending_events:
                    reports[MILESTONE_OF[event.kind]].events.append(event)
                for violation in pending_violations:
                    reports[violation.milestone].violations.append(violation)
            pending_events, pending_violations = [], []

        for event in outcome.events:
            milestone = MILESTONE_OF[event.kind]
            if milestone == SWEEP or event.kind == EventKind.NODE0_SECOND_FIRE:
                reports[milestone].events.append(event)
            else:
                pending_events.append(event)
        for violation in outcome.violations:
            if violation.milestone == SWEEP or node == 0:
                reports[violation.milestone].violations.append(violation)
            else:
                pending_violations.append(violation)

        pair, armed = outcome.pair, outcome.armed

    if armed:
        reports[SWEEP].inconclusive = 1
    return reports


def probe_three_share(trace: Trace) -> ProbeReport:
    """
    For every pair of consecutive node 0 firings, the moment node n adopts b+1 and the check that nodes n-1, n and 0
    then all hold b+1. Pairs where node n already held b+1 when the pair opened are counted in outside_pattern.
    """
    return _walk(trace)[THREE_SHARE]


def probe_absent_value(trace: Trace, params: Optional[Params] = None) -> ProbeReport:
    """
    At every three-share moment, checks that some value is missing from the ring and that b+1 is not among the
    missing ones. Only applies when k >= n; otherwise the report has precondition_met False and makes no claim.
    """
    if params is not None and params != trace.params:
        log.error(f'Trace was recorded for {trace.params.describe()}, not {params.describe()}')
        raise ParameterError(f'Trace was recorded for {trace.params.describe()}, not {params.describe()}')
    return _walk(trace)[ABSENT_VALUE]


def probe_sweep(trace: Trace, params: Optional[Params] = None) -> ProbeReport:
    if params is not None and params != trace.params:
        log.error(f'Trace was recorded for {trace.params.describe()}, not {params.describe()}')
        raise ParameterError(f'Trace was recorded for {trace.params.describe()}, not {params.describe()}')
    return _walk(trace)[SWEEP]


###
# Aggregate checks
#

def check_theorem_milestones(params: Params, mode: str = 'exhaustive', seed: int = 1, count: int = 10000,
                             depth: Optional[int] = None, state_limit: int = DEFAULT_STATE_LIMIT) -> MilestoneReport:
    """
    Checks every milestone over all schedules (exhaustive) or over seeded random-daemon runs (sampled)

    Parameters
    ----------
    params: ring parameters, n > 1
    mode: 'exhaustive' or 'sampled'
    seed: master seed for sampled mode
    count: number of sampled runs
    depth: steps per sampled run, DEFAULT_MAX_STEPS_FACTOR * k**(n+1) when None
    state_limit: limit on configurations x probe phases in exhaustive mode

    Returns
    -------
    MilestoneReport with event and violation counts per milestone
    """
    if params.n <= 1:
        log.error(f'Milestone checks need n > 1, got {params.describe()}')
        raise ParameterError(f'Milestone checks need n > 1, got {params.describe()}')
    if mode == 'exhaustive':
        return _ProductExplorer(params, state_limit).explore()
    if mode == 'sampled':
        return _sample(params, seed, count, depth)
    log.error(f'Unknown milestone mode: {mode}, use exhaustive or sampled')
    raise ParameterError(f'Unknown milestone mode: {mode}, use exhaustive or sampled')


class _ProductExplorer(RingCommon):
    """
    Depth-first search over (configuration, pair phase, armed) from every configuration with fresh probes.
    Each product state is expanded once, so counts are per product edge.
    """

    def __init__(self, params: Params, state_limit: int):
        self.log: logging.Logger = logging.getLogger(__name__)
        self.params: Params = params
        self.n: int = params.n
        self.k: int = params.k
        self.ring: Ring = Ring(params)
        self.automaton: MilestoneAutomaton = MilestoneAutomaton(params)
        self.state_limit: int = state_limit

    def explore(self) -> MilestoneReport:
        space = self.params.state_space
        self.verify_state_limit(space * PRODUCT_PHASES, self.state_limit)
        self.log.info(f'Exploring milestone product for {self.params.describe()}: '
                      f'{space * PRODUCT_PHASES} product states')

        report = MilestoneReport(n=self.n, k=self.k, mode='exhaustive',
                                 absent_value_checked=self.automaton.absent_enabled)
        ring = self.ring
        visited = bytearray(space * PRODUCT_PHASES)
        stack = []
        for code in range(space):
            visited[code * PRODUCT_PHASES] = 1
            stack.append(code * PRODUCT_PHASES)

        while stack:
            code, phase = divmod(stack.pop(), PRODUCT_PHASES)
            pair, armed = divmod(phase, 2)
            before = ring._decode(code)
            for node in ring._privileged_nodes(before):
                after = ring._fire(before, node)
                outcome = self.automaton.advance(pair, bool(armed), before, node, after)
                for event in outcome.events:
                    report.add_event(event)
                for violation in outcome.violations:
                    report.add_violation(violation)
                if outcome.outside_pattern:
                    report.outside_pattern += 1
                target = ring._encode(after) * PRODUCT_PHASES + outcome.pair * 2 + int(outcome.armed)
                if not visited[target]:
                    visited[target] = 1
                    stack.append(target)

        report.explored_states = sum(visited)
        self.log.info(f'Milestone product explored: {report.explored_states} states, '
                      f'violations {report.violation_counts}')
        return report


def _sample(params: Params, seed: int, count: int, depth: Optional[int]) -> MilestoneReport:
    """
    Each run draws its own 64 bit seed from the master generator, takes the initial configuration from the first
    n+1 draws of random.Random(run seed) and schedules with RandomDaemon(run seed), so any run can be rebuilt with
    Daemon.run. Steps go straight to the automaton without building a Trace.
    """
    if depth is None:
        depth = DEFAULT_MAX_STEPS_FACTOR * params.state_space
    if count < 0 or depth < 0:
        log.error(f'count and depth must not be negative, got count={count}, depth={depth}')
        raise ParameterError(f'count and depth must not be negative, got count={count}, depth={depth}')

    log.info(f'Sampling milestones for {params.describe()}: seed={seed}, count={count}, depth={depth}')
    report = MilestoneReport(n=params.n, k=params.k, mode='sampled', seed=seed, depth=depth,
                             absent_value_checked=params.k >= params.n)
    ring = Ring(params)
    automaton = MilestoneAutomaton(params)
    master = random.Random(seed)
    for _ in range(count):
        run_seed = master.getrandbits(64)
        rng = random.Random(run_seed)
        initial = tuple(rng.randrange(params.k) for _ in range(params.n + 1))
        _merge(report, _follow(automaton, _random_steps(ring, initial, RandomDaemon(run_seed).rng, depth)).values())
        report.runs += 1

    log.info(f'Milestone sampling done: {report.runs} runs, violations {report.violation_counts}')
    return report


def _random_steps(ring: Ring, states: Configuration, rng: random.Random,
                  depth: int) -> Iterator[tuple[int, Configuration, int, Configuration]]:
    # same choice as RandomDaemon.select
    for step_index in range(depth):
        nodes = ring._privileged_nodes(states)
        node = nodes[rng.randrange(len(nodes))]
        after = ring._fire(states, node)
        yield step_index, states, node, after
        states = after


def _merge(report: MilestoneReport, probes: Iterable[ProbeReport]) -> None:
    for probe in probes:
        for event in probe.events:
            report.add_event(event)
        for violation in probe.violations:
            report.add_violation(violation)
        report.outside_pattern += probe.outside_pattern
        report.inconclusive += probe.inconclusive

