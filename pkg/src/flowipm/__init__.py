"""Exact minimum-cost-flow solving via a robust interior point method.

The package is organised bottom-up:

- :mod:`flowipm.graph` -- graph/matrix representations and DIMACS I/O
- :mod:`flowipm.primitives` -- batch list, tau-proportional sampler, seeded RNG
- :mod:`flowipm.sdd` -- SDD (graph Laplacian) system solver
- :mod:`flowipm.unitflow` -- bounded-height parallel push-relabel
- :mod:`flowipm.trimming`, :mod:`flowipm.pruning` -- expander repair machinery
- :mod:`flowipm.decomposition` -- static + dynamic expander decomposition
- :mod:`flowipm.heavyhitter` -- expander-backed large-entry detection/sampling
- :mod:`flowipm.leverage` -- leverage-score and Lewis-weight maintenance
- :mod:`flowipm.gradient`, :mod:`flowipm.dual` -- primal/gradient and dual maintenance
- :mod:`flowipm.sampler` -- the combined step-sparsification sampler
- :mod:`flowipm.ipm` -- the central-path loop
- :mod:`flowipm.mcf` -- the end-to-end min-cost-flow pipeline and reductions
- :mod:`flowipm.service`, :mod:`flowipm.cli` -- HTTP service and CLI front ends
"""

__version__ = "0.1.0"

from .graph import WeightedDigraph, IncidenceMatrix, ProblemBounds, load_dimacs, save_dimacs

__all__ = [
    "WeightedDigraph",
    "IncidenceMatrix",
    "ProblemBounds",
    "load_dimacs",
    "save_dimacs",
    "__version__",
]
