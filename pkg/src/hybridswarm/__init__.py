"""Stochastic hybrid agents with guards, clocks and jump-triggered coupling.

Subpackages:

- ``core``: PDMP and SHS primitives (flows, thinning, Euler-Maruyama).
- ``agent``: one agent's specification, state and one-step update.
- ``swarm``: many agents simulated together, the (guard, clock)
  abstraction and composition of collectives.
- ``analysis``: generators, semigroup checks, first passage and jump
  intensity.
- ``io``: scenario files, CSV traces, manifests and the command line.
"""

__version__ = "0.1.0"
