"""lorwave: a numerical laboratory for linear wave equations on globally
hyperbolic 1+1 spacetimes.

Layers:

- geometry:      spacetimes in temporal-splitting form, lightlike graphs,
                 causal predicates
- sobolev:       fractional Sobolev norms as Fourier multipliers, mollifier,
                 slice energies
- operators:     wave operators with lower-order terms, formal duals,
                 principal-symbol probes
- cauchy:        RK4 method-of-lines Cauchy solver and its verification suite
- energy_verify: energy traces, the Groenwall-type estimate, slab estimates
- goursat:       characteristic (lightlike) initial value problems
- greens:        Green's formula on lightlike boundaries
- cli:           scenario configs, expression parser, report emission
"""

from . import errors
from .expressions import Expression, parse_expression

__all__ = ["errors", "Expression", "parse_expression"]

__version__ = "0.1.0"
