"""Scenario-based testing of autonomous-driving controllers.

Parameter spaces are sampled (Halton or random, optionally refined by
simulated annealing), each sample instantiates a parameterized road scene,
a synchronous stream engine drives a 2D kinematic simulation, and monitors
turn the resulting streams into verdicts and scores.
"""

__version__ = "0.1.0"
CONFIG_SCHEMA_VERSION = 1
