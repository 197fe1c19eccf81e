import logging
from collections.abc import Sequence
from typing import Any, Optional

# Largest k**(n+1) a Params instance accepts
MAX_STATE_SPACE: int = 2 ** 63 - 1

# Largest number of encoded configurations the checker will enumerate
DEFAULT_STATE_LIMIT: int = 10 ** 7

# max_steps = DEFAULT_MAX_STEPS_FACTOR * k**(n+1) when a run does not name one
DEFAULT_MAX_STEPS_FACTOR: int = 10

# probe phases per configuration in the milestone product graph
PRODUCT_PHASES: int = 8


###
# Exceptions
#

class ParameterError(ValueError):
    """
    Invalid ring parameters, node ids or configurations
    """


class IllegalMoveError(RuntimeError):
    """
    A non-privileged node was asked to fire
    """


class IllegalScheduleError(RuntimeError):
    """
    A daemon strategy produced a node that cannot be fired, or ran out of script
    """

    def __init__(self, message: str, step_index: Optional[int] = None):
        super().__init__(message)
        self.step_index: Optional[int] = step_index


class StateSpaceTooLargeError(RuntimeError):

    def __init__(self, message: str, size: int, limit: int):
        super().__init__(message)
        self.size: int = size
        self.limit: int = limit


class InvalidStateError(RuntimeError):
    """
    Operation requested on an instance whose verdict does not allow it
    """


class InvalidTraceError(ValueError):

    def __init__(self, message: str, verdict: Any = None):
        super().__init__(message)
        self.verdict = verdict


class TraceFormatError(ValueError):

    def __init__(self, message: str, line_number: int = 0):
        super().__init__(message)
        self.line_number: int = line_number


class DaemonStopped(Exception):
    """
    Raised by a strategy to end a run on behalf of its user
    """


class RingCommon:
    """
    Validation shared by the protocol, daemon, checker and probes.
    Not to be initiated
    """

    log: logging.Logger
    n: int
    k: int

    ###
    # Validation
    #

    def verify_node(self, node: int) -> int:
        if isinstance(node, bool) or not isinstance(node, int):
            self.log.error(f'Node id must be an integer, got: {node!r}')
            raise ParameterError(f'Node id must be an integer, got: {node!r}')
        if not 0 <= node <= self.n:
            self.log.error(f'Node id out of range. Should be between 0 and {self.n}, got: {node}')
            raise ParameterError(f'Node id out of range. Should be between 0 and {self.n}, got: {node}')
        return node

    def verify_configuration(self, cfg: Sequence[int]) -> tuple[int, ...]:
        """
        Checks length (n+1, n being the highest node index) and value range [0, k-1].
        Returns the configuration as a tuple
        """
        states = tuple(cfg)
        if len(states) != self.n + 1:
            self.log.error(f'Configuration must hold {self.n + 1} states (n={self.n} is the highest index), '
                           f'got {len(states)}: {list(states)}')
            raise ParameterError(f'Configuration must hold {self.n + 1} states (n={self.n} is the highest index), '
                                 f'got {len(states)}')
        for value in states:
            if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < self.k:
                self.log.error(f'State {value!r} outside 0..{self.k - 1} in {list(states)}')
                raise ParameterError(f'State {value!r} outside 0..{self.k - 1}')
        return states

    def verify_state_limit(self, size: int, limit: int) -> bool:
        if size > limit:
            self.log.error(f'State space of {size} configurations exceeds the limit of {limit}')
            raise StateSpaceTooLargeError(f'State space of {size} configurations exceeds the limit of {limit}',
                                          size=size, limit=limit)
        return True
