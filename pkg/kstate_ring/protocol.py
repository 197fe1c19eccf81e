"""
The K-state token ring: state space, privileges, moves and the legitimate set.

Nodes are numbered 0..n, so `n` is the HIGHEST node index and the ring holds n+1 nodes.
Every node holds a state in 0..k-1 and reads the state of its anti-clockwise neighbour.
Node 0 is privileged when x[0] = x[n] and moves x[0] := (x[0] + 1) mod k; node i >= 1 is
privileged when x[i] != x[i-1] and moves x[i] := x[i-1].
"""
import itertools
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from typing import Optional
from kstate_ring.utility import RingCommon, ParameterError, IllegalMoveError, MAX_STATE_SPACE

log = logging.getLogger(__name__)

Configuration = tuple[int, ...]


@dataclass(frozen=True)
class Params:
    """
    n: highest node index (the ring has n+1 nodes), n >= 1
    k: number of states per node, k >= 1
    """

    n: int
    k: int

    def __post_init__(self):
        for name, value, low in (('n', self.n, 1), ('k', self.k, 1)):
            if isinstance(value, bool) or not isinstance(value, int):
                log.error(f'{name} must be an integer, got: {value!r}')
                raise ParameterError(f'{name} must be an integer, got: {value!r}')
            if value < low:
                log.error(f'{name} must be at least {low}, got: {value}')
                raise ParameterError(f'{name} must be at least {low}, got: {value}')
        if self._exceeds(MAX_STATE_SPACE):
            log.error(f'k**(n+1) = {self.k}**{self.n + 1} exceeds the supported maximum of {MAX_STATE_SPACE}')
            raise ParameterError(f'k**(n+1) = {self.k}**{self.n + 1} exceeds the supported maximum of '
                                 f'{MAX_STATE_SPACE}')

    def _exceeds(self, limit: int) -> bool:
        """
        True when k**(n+1) > limit. Stops multiplying as soon as the product passes limit
        """
        size = 1
        for _ in range(self.n + 1):
            size *= self.k
            if size > limit:
                return True
            if self.k == 1:
                break
        return False

    @property
    def ring_size(self) -> int:
        return self.n + 1

    @property
    def state_space(self) -> int:
        return self.k ** (self.n + 1)

    def describe(self) -> str:
        return f'n={self.n} (highest node index, ring of {self.ring_size} nodes), k={self.k}'


@dataclass(frozen=True)
class LegitimacyWitness:
    """
    Certifies x[i] = a for 0 <= i < j and x[i] = (a-1) mod k for j <= i <= n
    """

    a: int
    j: int


class Ring(RingCommon):
    """
    Protocol definition for one (n, k) instance. All methods are pure; configurations are tuples and
    fire() returns a new one.
    """

    def __init__(self, params: Params):
        self.log: logging.Logger = logging.getLogger(__name__)
        self.params: Params = params
        self.n: int = params.n
        self.k: int = params.k
        # positional weights, states[0] most significant
        self.weights: tuple[int, ...] = tuple(self.k ** (self.n - i) for i in range(self.n + 1))

    ###
    # Guards and moves
    #

    def privileged(self, cfg: Sequence[int], node: int) -> bool:
        states = self.verify_configuration(cfg)
        self.verify_node(node)
        return self._is_privileged(states, node)

    def privileged_set(self, cfg: Sequence[int]) -> frozenset[int]:
        """
        Nodes whose guard holds in cfg. Never empty.
        """
        return frozenset(self._privileged_nodes(self.verify_configuration(cfg)))

    def privilege_count(self, cfg: Sequence[int]) -> int:
        return len(self._privileged_nodes(self.verify_configuration(cfg)))

    def fire(self, cfg: Sequence[int], node: int) -> Configuration:
        """
        Executes the move of a privileged node and returns the successor configuration

        Parameters
        ----------
        cfg: current configuration
        node: node id in 0..n, must be privileged in cfg

        Returns
        -------
        New configuration; only the entry of `node` differs from cfg
        """
        states = self.verify_configuration(cfg)
        self.verify_node(node)
        if not self._is_privileged(states, node):
            self.log.error(f'Node {node} is not privileged in {list(states)}')
            raise IllegalMoveError(f'Node {node} is not privileged in {list(states)}')
        return self._fire(states, node)

    ###
    # Legitimate set
    #

    def is_legitimate(self, cfg: Sequence[int]) -> Optional[LegitimacyWitness]:
        """
        Returns the canonical witness (largest j) when cfg has the two-block legitimate form, else None.
        An all-equal configuration of value v is reported as (a=v, j=n+1).
        """
        return self._witness(self.verify_configuration(cfg))

    def from_witness(self, witness: LegitimacyWitness) -> Configuration:
        if not 0 <= witness.a < self.k or not 0 <= witness.j <= self.n + 1:
            self.log.error(f'Witness {witness} out of range for {self.params.describe()}')
            raise ParameterError(f'Witness {witness} out of range for {self.params.describe()}')
        tail = (witness.a - 1) % self.k
        return tuple(witness.a if i < witness.j else tail for i in range(self.n + 1))

    def legitimate_configurations(self) -> Iterator[Configuration]:
        """
        Every legitimate configuration exactly once, in encoding order
        """
        return (states for states in self.configurations() if self._witness(states) is not None)

    def absent_values(self, cfg: Sequence[int]) -> frozenset[int]:
        states = self.verify_configuration(cfg)
        return frozenset(range(self.k)) - frozenset(states)

    ###
    # Dense indexing
    #

    def encode(self, cfg: Sequence[int]) -> int:
        """
        Base-k positional index of cfg with states[0] as the most significant digit
        """
        return self._encode(self.verify_configuration(cfg))

    def decode(self, index: int) -> Configuration:
        if isinstance(index, bool) or not isinstance(index, int) or not 0 <= index < self.params.state_space:
            self.log.error(f'Index {index!r} outside 0..{self.params.state_space - 1}')
            raise ParameterError(f'Index {index!r} outside 0..{self.params.state_space - 1}')
        return self._decode(index)

    def configurations(self) -> Iterator[Configuration]:
        # lexicographic order of itertools.product matches encoding order
        return itertools.product(range(self.k), repeat=self.n + 1)

    ###
    # Unchecked internals used by the engines
    #

    def _is_privileged(self, states: Configuration, node: int) -> bool:
        if node == 0:
            return states[0] == states[self.n]
        return states[node] != states[node - 1]

    def _privileged_nodes(self, states: Configuration) -> list[int]:
        nodes = [0] if states[0] == states[self.n] else []
        nodes.extend(i for i in range(1, self.n + 1) if states[i] != states[i - 1])
        return nodes

    def _fire(self, states: Configuration, node: int) -> Configuration:
        new = (states[0] + 1) % self.k if node == 0 else states[node - 1]
        return states[:node] + (new,) + states[node + 1:]

    def _witness(self, states: Configuration) -> Optional[LegitimacyWitness]:
        a = states[0]
        j = next((i for i in range(1, self.n + 1) if states[i] != a), self.n + 1)
        tail = (a - 1) % self.k
        if all(value == tail for value in states[j:]):
            return LegitimacyWitness(a=a, j=j)
        return None

    def _encode(self, states: Configuration) -> int:
        return sum(value * weight for value, weight in zip(states, self.weights))

    def _decode(self, index: int) -> Configuration:
        digits = []
        for _ in range(self.n + 1):
            index, digit = divmod(index, self.k)
            digits.append(digit)
        return tuple(reversed(digits))
