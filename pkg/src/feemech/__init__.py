"""feemech: a transaction fee mechanism laboratory.

Block-space fee markets as formal objects: mechanisms (allocation,
payment, burning), base fee update rules, demand curves, miner and user
strategies, brute-force incentive checkers, and a multi-block trajectory
simulator.
"""

__version__ = "0.1.0"
