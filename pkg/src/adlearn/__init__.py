"""adlearn: closed-loop estimation of load and reserve forecast models.

Forecast parameters are trained to minimize the realized operating cost of
an energy-and-reserve dispatch pipeline instead of a statistical error
metric, either exactly (KKT branch-and-bound) or with a derivative-free
search over the assessed-cost objective.
"""

__version__ = "0.1.0"
