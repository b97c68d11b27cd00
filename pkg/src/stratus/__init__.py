"""Multi-cloud scientific workflow orchestration.

Layers:

- ``catalog``: instance catalog, capability-based selection, cost estimates
- ``workflow``: versioned templates, parameter resolution, command rendering
- ``execution``: provisioning plans, MPI envelopes, job state machine
- ``backends``: local-process runner and the deterministic cloud simulator
- ``results``: provenance records, repetition stats, efficiency, reports
- ``governance``: groups, permissions, shared budgets with reservations
- ``gateway``: CLI + HTTP API orchestrating all of the above
"""

__version__ = "0.1.0"
