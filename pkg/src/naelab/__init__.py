"""k-NAE-SAT instances, complete and local-search solvers, and QAOA simulation."""

__version__ = "0.1.0"
