"""Computer-assisted validation of the Hopf periodic-orbit branch of the
Kuramoto-Sivashinsky equation by radii polynomials.

Modules: ``interval`` (directed-rounding intervals), ``ball`` (vectorized
midpoint-radius arithmetic), ``sequences`` (weighted l1 spaces), ``operators``
(block operators and norms), ``tail_bounds`` (rational diagonal tails), ``ks``
(the blow-up system and its derivatives), ``continuation`` (floating-point
Newton and stepping), ``validator`` (bounds and certificates), ``config`` and
``cli``.
"""

__version__ = "0.1.0"
