"""
Trace and report serialization.

Trace files are UTF-8 JSON Lines: line 1 is a header object carrying "header": true, every following line is one
step with the keys step, node, before, after. Reports are single JSON objects.
"""
import json
import logging
from collections.abc import Iterable
from typing import Any, Optional, TextIO, Union
from kstate_ring import __version__
from kstate_ring.protocol import Params
from kstate_ring.daemon import Trace, TraceStep, TerminatedReason
from kstate_ring.checker import Verdict, Lasso, PropertyReport, Counterexample, SweepRow, FrontierReport
from kstate_ring.theorem import MilestoneReport, Violation
from kstate_ring.utility import ParameterError, TraceFormatError

log = logging.getLogger(__name__)

STEP_KEYS = ('step', 'node', 'before', 'after')


def _line(record: dict) -> str:
    return json.dumps(record, separators=(',', ':')) + '\n'


###
# Traces
#

def trace_header(trace: Trace) -> dict[str, Any]:
    return {
        'header': True,
        'n': trace.params.n,
        'k': trace.params.k,
        'strategy': trace.strategy,
        'seed': trace.seed,
        'version': __version__,
        'reason': trace.terminated_reason.value if trace.terminated_reason else None,
        'initial': list(trace.initial) if trace.initial is not None else None,
    }


def step_record(step: TraceStep) -> dict[str, Any]:
    return {'step': step.step_index, 'node': step.fired, 'before': list(step.before), 'after': list(step.after)}


def dump_trace(trace: Trace, stream: TextIO) -> None:
    stream.write(_line(trace_header(trace)))
    for step in trace.steps:
        stream.write(_line(step_record(step)))


def dump_steps(params: Params, steps: Iterable[TraceStep], stream: TextIO, strategy: str = 'lasso') -> None:
    """
    Writes bare steps (a lasso stem or cycle, for instance) as a trace file with a header
    """
    dump_trace(Trace(params=params, steps=list(steps), strategy=strategy), stream)


def load_trace(stream: Iterable[Union[str, bytes]]) -> Trace:
    """
    Parses a trace file, given as text lines or as raw bytes lines that are decoded as UTF-8 one by one.
    Raises TraceFormatError naming the offending line; values are not range checked here, replay does that
    against the header's n and k
    """
    trace: Optional[Trace] = None
    for line_number, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode('utf-8')
            except UnicodeDecodeError as e:
                log.error(f'Line {line_number} is not valid UTF-8: {e}')
                raise TraceFormatError(f'line {line_number}: not valid UTF-8 ({e.reason})', line_number=line_number)
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            log.error(f'Malformed JSON on line {line_number}: {e}')
            raise TraceFormatError(f'line {line_number}: malformed JSON ({e})', line_number=line_number)
        if not isinstance(record, dict):
            raise TraceFormatError(f'line {line_number}: expected a JSON object', line_number=line_number)

        if trace is None:
            trace = _parse_header(record, line_number)
        else:
            trace.steps.append(_parse_step(record, line_number))

    if trace is None:
        log.error('Trace file holds no header line')
        raise TraceFormatError('line 1: missing header line', line_number=1)
    return trace


def _parse_header(record: dict, line_number: int) -> Trace:
    if record.get('header') is not True:
        log.error(f'Line {line_number} is not a trace header: {record}')
        raise TraceFormatError(f'line {line_number}: first record must be a header with "header": true',
                               line_number=line_number)
    try:
        params = Params(n=record.get('n'), k=record.get('k'))
        reason = TerminatedReason(record['reason']) if record.get('reason') is not None else None
    except (ParameterError, ValueError) as e:
        raise TraceFormatError(f'line {line_number}: invalid header ({e})', line_number=line_number)
    log.debug(f'Trace header: {record}')
    initial = record.get('initial')
    if initial is not None and not _int_list(initial):
        raise TraceFormatError(f'line {line_number}: initial must be a list of integers', line_number=line_number)
    return Trace(params=params, strategy=record.get('strategy', 'unknown'), seed=record.get('seed'),
                 terminated_reason=reason, initial=tuple(initial) if initial is not None else None)


def _parse_step(record: dict, line_number: int) -> TraceStep:
    if set(record) != set(STEP_KEYS):
        log.error(f'Line {line_number} has keys {list(record)}, expected {list(STEP_KEYS)}')
        raise TraceFormatError(f'line {line_number}: keys must be exactly {",".join(STEP_KEYS)}',
                               line_number=line_number)
    if not _int(record['step']) or not _int(record['node']) \
            or not _int_list(record['before']) or not _int_list(record['after']):
        raise TraceFormatError(f'line {line_number}: step and node must be integers, before and after lists of '
                               f'integers', line_number=line_number)
    return TraceStep(step_index=record['step'], fired=record['node'], before=tuple(record['before']),
                     after=tuple(record['after']))


def _int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _int_list(value: Any) -> bool:
    return isinstance(value, list) and all(_int(v) for v in value)


###
# Reports
#

def lasso_record(lasso: Lasso) -> dict[str, Any]:
    return {'stem': [step_record(step) for step in lasso.stem],
            'cycle': [step_record(step) for step in lasso.cycle]}


def verdict_record(verdict: Verdict) -> dict[str, Any]:
    if verdict.converges:
        return {'holds': True, 'verdict': 'converges', 'worst_case_steps': verdict.worst_case_steps}
    return {'holds': False, 'verdict': 'diverges', 'cycle_length': len(verdict.lasso.cycle),
            'lasso': lasso_record(verdict.lasso)}


def counterexample_record(counterexample: Optional[Counterexample]) -> Optional[dict[str, Any]]:
    if counterexample is None:
        return None
    return {
        'configuration': list(counterexample.configuration),
        'node': counterexample.node,
        'successor': list(counterexample.successor) if counterexample.successor is not None else None,
        'note': counterexample.note,
    }


def property_record(report: PropertyReport) -> dict[str, Any]:
    return {'holds': report.holds, 'counterexample': counterexample_record(report.counterexample)}


def sweep_row_record(row: SweepRow, timings: bool = False) -> dict[str, Any]:
    """
    Wall time is only included when timings is set
    """
    record = {
        'n': row.n,
        'k': row.k,
        'verdict': row.verdict,
        'worst_case_steps': row.worst_case_steps,
        'cycle_length': row.cycle_length,
        'note': row.note,
    }
    if timings:
        record['seconds'] = round(row.seconds, 6)
    return record


def frontier_record(report: FrontierReport, timings: bool = False) -> dict[str, Any]:
    return {'n': report.n, 'stable_from': report.stable_from,
            'rows': [sweep_row_record(row, timings) for row in report.rows]}


def violation_record(violation: Violation) -> dict[str, Any]:
    return {
        'milestone': violation.milestone,
        'step': violation.step_index,
        'configuration': list(violation.configuration),
        'node': violation.node,
        'detail': violation.detail,
    }


def milestone_record(report: MilestoneReport) -> dict[str, Any]:
    record: dict[str, Any] = {
        'version': __version__,
        'n': report.n,
        'k': report.k,
        'nodes': report.n + 1,
        'mode': report.mode,
    }
    if report.mode == 'exhaustive':
        record['explored_states'] = report.explored_states
    else:
        record.update({'seed': report.seed, 'count': report.runs, 'depth': report.depth})
    record.update({
        'absent_value_checked': report.absent_value_checked,
        'events': dict(report.event_counts),
        'violation_counts': dict(report.violation_counts),
        'outside_pattern': report.outside_pattern,
        'inconclusive': report.inconclusive,
        'violations': [violation_record(v) for v in report.violations],
        'holds': report.holds,
    })
    return record


def dump_report(record: dict[str, Any], stream: TextIO) -> None:
    stream.write(json.dumps(record, indent=2) + '\n')
