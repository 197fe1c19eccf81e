"""
Command-line front end: simulate, check, sweep, prove, replay and frontier.

Exit codes are shared by every subcommand: 0 when the run completed and every requested property holds, 1 when a
property is violated or a schedule is illegal, 2 on usage, capacity or input format errors.
"""
import argparse
import contextlib
import csv
import logging
import random
import sys
from collections.abc import Iterator, Sequence
from typing import Optional, TextIO
from kstate_ring import __version__
from kstate_ring.protocol import Params, Ring, Configuration
from kstate_ring.daemon import (Daemon, DaemonStrategy, Trace, RoundRobin, RandomDaemon, Scripted, Interactive)
from kstate_ring.checker import Checker, SweepRow, k_values, sweep, frontier
from kstate_ring.theorem import check_theorem_milestones, MILESTONES
from kstate_ring.records import (dump_trace, load_trace, dump_report, verdict_record, property_record,
                                 sweep_row_record, frontier_record, milestone_record)
from kstate_ring.utility import (ParameterError, IllegalScheduleError, StateSpaceTooLargeError, TraceFormatError,
                                 DEFAULT_STATE_LIMIT)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

PROPERTIES = ('convergence', 'closure', 'no-termination', 'node0-liveness')
SWEEP_COLUMNS = ('n', 'k', 'verdict', 'worst_case_steps', 'cycle_length', 'note')


###
# Argument helpers
#

def _boolean(text: str) -> bool:
    value = text.strip().lower()
    if value in ('true', 'yes', '1'):
        return True
    if value in ('false', 'no', '0'):
        return False
    raise argparse.ArgumentTypeError(f'expected true or false, got: {text}')


def _u64(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected an unsigned 64-bit integer, got: {text}')
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f'expected an unsigned 64-bit integer, got: {text}')
    return value


def _int_list(text: str, what: str) -> list[int]:
    try:
        return [int(item) for item in text.split(',') if item.strip()]
    except ValueError:
        log.error(f'{what} must be a comma separated list of integers, got: {text}')
        raise ParameterError(f'{what} must be a comma separated list of integers, got: {text}')


def _params(args: argparse.Namespace) -> Params:
    """
    --n is the highest node index, --nodes the ring size. Both interpretations are echoed to stderr.
    """
    n = args.n if args.n is not None else args.nodes - 1
    params = Params(n=n, k=args.k)
    print(f'n={params.n} (highest node index), nodes={params.ring_size} (ring size), k={params.k}', file=sys.stderr)
    return params


def _initial(text: str, params: Params, seed: int) -> Configuration:
    ring = Ring(params)
    if text == 'random':
        rng = random.Random(seed)
        return tuple(rng.randrange(params.k) for _ in range(params.ring_size))
    if text.startswith('all-equal:'):
        value = _int_list(text[len('all-equal:'):], '--init all-equal')
        if len(value) != 1:
            raise ParameterError(f'--init all-equal takes one value, got: {text}')
        return ring.verify_configuration(value * params.ring_size)
    return ring.verify_configuration(_int_list(text, '--init'))


def _strategy(text: str, params: Params, seed: int, state_limit: int) -> DaemonStrategy:
    if text == 'round-robin':
        return RoundRobin()
    if text == 'random':
        return RandomDaemon(seed)
    if text == 'adversarial':
        return Checker(params, state_limit=state_limit).adversary()
    if text == 'interactive':
        return Interactive(_prompt)
    if text.startswith('scripted:'):
        return Scripted(_int_list(text[len('scripted:'):], '--daemon scripted'))
    log.error(f'Unknown daemon: {text}')
    raise ParameterError(f'Unknown daemon: {text}, use round-robin, random, adversarial, scripted:<n1,n2,...> '
                         f'or interactive')


def _prompt(cfg: Configuration, privileged: frozenset[int], history: Trace) -> Optional[int]:
    """
    Reads one node id per step from stdin. EOF stops the run
    """
    while True:
        print(f'step {len(history.steps)}: configuration {list(cfg)}, privileged {sorted(privileged)}',
              file=sys.stderr)
        print('node> ', end='', file=sys.stderr, flush=True)
        line = sys.stdin.readline()
        if not line:
            return None
        try:
            node = int(line.strip())
        except ValueError:
            print(f'not a node id: {line.strip()}', file=sys.stderr)
            continue
        if node not in privileged:
            print(f'node {node} is not privileged', file=sys.stderr)
            continue
        return node


@contextlib.contextmanager
def _output(path: str) -> Iterator[TextIO]:
    if path == '-':
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, 'w', encoding='utf-8', newline='') as stream:
            yield stream


###
# Subcommands
#

def cmd_simulate(args: argparse.Namespace) -> int:
    params = _params(args)
    initial = _initial(args.init, params, args.seed)
    strategy = _strategy(args.daemon, params, args.seed, args.state_limit)
    daemon = Daemon(params)
    try:
        trace = daemon.run(initial, strategy, max_steps=args.max_steps, stop_on_legitimate=args.stop_on_legit)
    except IllegalScheduleError as e:
        print(f'illegal schedule at step {e.step_index}: {e}', file=sys.stderr)
        return EXIT_FAILED
    if trace.seed is None:
        trace.seed = args.seed

    with _output(args.trace_out) as stream:
        dump_trace(trace, stream)

    statistics = daemon.statistics(trace)
    print(f'final configuration: {list(trace.final)}', file=sys.stderr)
    print(f'steps: {len(trace.steps)}, reason: {trace.terminated_reason.value}', file=sys.stderr)
    print(f'fires per node: {list(statistics.fires_per_node)}, first legitimate step: '
          f'{statistics.first_legitimate_step}', file=sys.stderr)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    params = _params(args)
    checker = Checker(params, state_limit=args.state_limit)
    names = PROPERTIES if args.property == 'all' else (args.property,)

    properties = {}
    for name in names:
        if name == 'convergence':
            verdict = checker.check_convergence()
            if not verdict.converges:
                checker.find_counterexample()
            properties[name] = verdict_record(verdict)
        elif name == 'closure':
            properties[name] = property_record(checker.check_closure())
        elif name == 'no-termination':
            properties[name] = property_record(checker.check_no_termination())
        else:
            properties[name] = property_record(checker.check_node0_liveness())

    holds = all(record['holds'] for record in properties.values())
    report = {
        'version': __version__,
        'n': params.n,
        'k': params.k,
        'nodes': params.ring_size,
        'state_limit': args.state_limit,
        'properties': properties,
        'privileged_histogram': {str(count): total for count, total in checker.privileged_histogram().items()},
        'holds': holds,
    }
    with _output(args.report_out) as stream:
        if args.format == 'json':
            dump_report(report, stream)
        else:
            _check_text(report, stream)
    return EXIT_OK if holds else EXIT_FAILED


def _check_text(report: dict, stream: TextIO) -> None:
    stream.write(f'n={report["n"]} (ring of {report["nodes"]} nodes), k={report["k"]}\n')
    for name, record in report['properties'].items():
        if name == 'convergence':
            if record['holds']:
                stream.write(f'{name}: holds, worst case {record["worst_case_steps"]} steps\n')
            else:
                lasso = record['lasso']
                stream.write(f'{name}: FAILS, lasso with stem of {len(lasso["stem"])} steps and cycle of '
                             f'{record["cycle_length"]} steps\n')
                for step in lasso['stem'] + lasso['cycle']:
                    stream.write(f'  step {step["step"]}: node {step["node"]} {step["before"]} -> {step["after"]}\n')
        elif record['holds']:
            stream.write(f'{name}: holds\n')
        else:
            counterexample = record['counterexample']
            stream.write(f'{name}: FAILS at {counterexample["configuration"]} ({counterexample["note"]})\n')
    histogram = ', '.join(f'{count} privileged: {total}' for count, total in report['privileged_histogram'].items())
    stream.write(f'configurations by privilege count: {histogram}\n')


def _k_rule(text: str):
    if text.startswith('list:'):
        return _int_list(text[len('list:'):], '--k-rule list')
    k_values(1, text)
    return text


def _rows_out(rows: Sequence[SweepRow], fmt: str, stream: TextIO, timings: bool = False) -> None:
    records = [sweep_row_record(row, timings) for row in rows]
    if fmt == 'json':
        dump_report({'version': __version__, 'rows': records}, stream)
    elif fmt == 'csv':
        columns = SWEEP_COLUMNS + (('seconds',) if timings else ())
        writer = csv.DictWriter(stream, fieldnames=columns, lineterminator='\n')
        writer.writeheader()
        writer.writerows(records)
    else:
        for record in records:
            if record['verdict'] == 'converges':
                detail = f'worst case {record["worst_case_steps"]} steps'
            elif record['verdict'] == 'diverges':
                detail = f'cycle of {record["cycle_length"]} steps'
            else:
                detail = record['note']
            if timings:
                detail += f' ({record["seconds"]}s)'
            stream.write(f'n={record["n"]:<3} k={record["k"]:<3} {record["verdict"]:<10} {detail}\n')


def cmd_sweep(args: argparse.Namespace) -> int:
    rows = sweep(range(args.n_from, args.n_to + 1), _k_rule(args.k_rule), state_limit=args.state_limit)
    with _output(args.report_out) as stream:
        _rows_out(rows, args.format, stream, args.timings)
    failures = [row for row in rows if row.verdict == 'diverges' and row.k >= row.n]
    for row in failures:
        print(f'convergence fails for n={row.n}, k={row.k}', file=sys.stderr)
    return EXIT_FAILED if failures else EXIT_OK


def cmd_frontier(args: argparse.Namespace) -> int:
    reports = [frontier(n, args.k_max, state_limit=args.state_limit) for n in range(args.n_from, args.n_to + 1)]
    with _output(args.report_out) as stream:
        if args.format == 'json':
            frontiers = [frontier_record(report, args.timings) for report in reports]
            dump_report({'version': __version__, 'frontiers': frontiers}, stream)
        else:
            for report in reports:
                stream.write(f'n={report.n}: converges for every checked k from {report.stable_from}\n')
                _rows_out(report.rows, 'text', stream, args.timings)
    return EXIT_OK


def cmd_prove(args: argparse.Namespace) -> int:
    params = _params(args)
    report = check_theorem_milestones(params, mode=args.mode, seed=args.seed, count=args.count, depth=args.depth,
                                      state_limit=args.state_limit)
    record = milestone_record(report)
    with _output(args.report_out) as stream:
        if args.format == 'json':
            dump_report(record, stream)
        else:
            stream.write(f'n={report.n}, k={report.k}, {report.mode} mode\n')
            for milestone in MILESTONES:
                stream.write(f'{milestone}: {report.violation_counts[milestone]} violations\n')
            for kind, total in report.event_counts.items():
                stream.write(f'  {kind}: {total}\n')
            stream.write(f'outside pattern: {report.outside_pattern}, inconclusive: {report.inconclusive}\n')
    return EXIT_OK if report.holds else EXIT_FAILED


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        if args.trace_in == '-':
            trace = load_trace(getattr(sys.stdin, 'buffer', sys.stdin))
        else:
            with open(args.trace_in, 'rb') as stream:
                trace = load_trace(stream)
    except OSError as e:
        print(f'error: cannot read {args.trace_in}: {e}', file=sys.stderr)
        return EXIT_USAGE

    verdict = Daemon(trace.params).replay(trace)
    if verdict.valid:
        print(f'valid: {len(trace.steps)} steps for {trace.params.describe()}', file=sys.stderr)
        return EXIT_OK
    print(f'diverges at step {verdict.step_index}: {verdict.reason}', file=sys.stderr)
    return EXIT_FAILED


###
# Parser
#

def _ring_arguments(parser: argparse.ArgumentParser) -> None:
    size = parser.add_mutually_exclusive_group(required=True)
    size.add_argument('--n', type=int, help='highest node index; the ring has n+1 nodes')
    size.add_argument('--nodes', type=int, help='ring size, same as --n <nodes-1>')
    parser.add_argument('--k', type=int, required=True, help='number of states per node')
    parser.add_argument('--state-limit', type=int, default=DEFAULT_STATE_LIMIT,
                        help='largest state space that will be enumerated')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='kstate-ring', description='K-state token ring simulator and checker')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)

    simulate = commands.add_parser('simulate', help='run one daemon schedule and write its trace')
    _ring_arguments(simulate)
    simulate.add_argument('--init', default='random',
                          help='comma separated states, "random" or "all-equal:<v>"')
    simulate.add_argument('--daemon', default='round-robin',
                          help='round-robin, random, adversarial, scripted:<n1,n2,...> or interactive')
    simulate.add_argument('--seed', type=_u64, default=0)
    simulate.add_argument('--max-steps', type=int, default=None)
    simulate.add_argument('--stop-on-legit', type=_boolean, default=True)
    simulate.add_argument('--trace-out', default='-')
    simulate.set_defaults(handler=cmd_simulate)

    check = commands.add_parser('check', help='model check one instance')
    _ring_arguments(check)
    check.add_argument('--property', choices=('all',) + PROPERTIES, default='all')
    check.add_argument('--format', choices=('json', 'text'), default='json')
    check.add_argument('--report-out', default='-')
    check.set_defaults(handler=cmd_check)

    for name, handler, help_text in (('sweep', cmd_sweep, 'convergence verdicts over a range of n'),
                                     ('frontier', cmd_frontier, 'convergence verdicts for k = 1..k-max')):
        command = commands.add_parser(name, help=help_text)
        command.add_argument('--n-from', type=int, required=True)
        command.add_argument('--n-to', type=int, required=True)
        command.add_argument('--state-limit', type=int, default=DEFAULT_STATE_LIMIT)
        command.add_argument('--report-out', default='-')
        command.add_argument('--timings', action='store_true', help='include the wall time of each row')
        command.set_defaults(handler=handler)
    sweep_command, frontier_command = commands.choices['sweep'], commands.choices['frontier']
    sweep_command.add_argument('--k-rule', default='n', help='n-1, n, n+1 or list:<k1,k2,...>')
    sweep_command.add_argument('--format', choices=('json', 'csv', 'text'), default='text')
    frontier_command.add_argument('--k-max', type=int, default=None, help='largest k checked, n+1 by default')
    frontier_command.add_argument('--format', choices=('json', 'text'), default='text')

    prove = commands.add_parser('prove', help='check the stabilization milestones')
    _ring_arguments(prove)
    prove.add_argument('--mode', choices=('exhaustive', 'sampled'), default='exhaustive')
    prove.add_argument('--seed', type=_u64, default=1)
    prove.add_argument('--count', type=int, default=10000)
    prove.add_argument('--depth', type=int, default=None)
    prove.add_argument('--format', choices=('json', 'text'), default='json')
    prove.add_argument('--report-out', default='-')
    prove.set_defaults(handler=cmd_prove)

    replay = commands.add_parser('replay', help='validate a trace file')
    replay.add_argument('--trace-in', required=True, help='JSONL trace, "-" for stdin')
    replay.set_defaults(handler=cmd_replay)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    log.info(f'kstate-ring {args.command}: {vars(args)}')
    try:
        return args.handler(args)
    except StateSpaceTooLargeError as e:
        print(f'error: state space of {e.size} configurations exceeds --state-limit {e.limit}', file=sys.stderr)
    except TraceFormatError as e:
        print(f'error: malformed trace, {e}', file=sys.stderr)
    except ParameterError as e:
        print(f'error: {e}', file=sys.stderr)
    return EXIT_USAGE
