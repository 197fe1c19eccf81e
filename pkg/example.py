import sys
from kstate_ring.protocol import Params, Ring
from kstate_ring.daemon import Daemon, RoundRobin, RandomDaemon, Scripted
from kstate_ring.checker import Checker, sweep, frontier
from kstate_ring.theorem import check_theorem_milestones, probe_three_share
from kstate_ring.records import dump_trace

###
# Create the ring: n is the highest node index, so this ring has 4 nodes
params = Params(n=3, k=3)
ring = Ring(params)

###
# Protocol
#

# Privileged nodes and the move of node 0
print(ring.privileged_set([0, 1, 1, 0]))
print(ring.fire([0, 1, 1, 0], 0))

# Legitimacy witness, None when the configuration is not legitimate
print(ring.is_legitimate([1, 1, 0, 0]))
print(ring.is_legitimate([0, 1, 1, 0]))

###
# Daemon
#

daemon = Daemon(params)

# Round robin until the first legitimate configuration
trace = daemon.run([0, 1, 1, 0], RoundRobin())
print(trace.terminated_reason, len(trace.steps))

# Seeded random daemon, written as a JSONL trace
trace = daemon.run([2, 0, 1, 2], RandomDaemon(seed=7), max_steps=20, stop_on_legitimate=False)
dump_trace(trace, sys.stdout)
print(daemon.replay(trace))
print(daemon.statistics(trace))

# Scripted schedule
print(daemon.run([0, 1, 1, 0], Scripted([0, 3])).steps)

###
# Checker
#

checker = Checker(params)
print(checker.check_convergence())
print(checker.check_closure(), checker.check_no_termination(), checker.check_node0_liveness())

# The exact adversary realises the worst case from the worst configuration
start = checker.maximizing_configuration()
print(len(daemon.run(start, checker.adversary()).steps), checker.worst_case_steps())

# k below n: a lasso counterexample
print(Checker(Params(n=3, k=2)).find_counterexample())

# Verdicts over a range of n, and over every k for one n
for row in sweep(range(2, 5), 'n'):
    print(row)
print(frontier(4))

###
# Milestones
#

print(probe_three_share(daemon.run([0, 1, 1, 0], RoundRobin(), max_steps=30, stop_on_legitimate=False)))
print(check_theorem_milestones(params))
print(check_theorem_milestones(Params(n=4, k=4), mode='sampled', seed=1, count=100, depth=200))
