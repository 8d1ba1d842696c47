"""Numerical toolkit for quantum self-testing with untrusted randomness sources.

Builds tilted Hardy tests and their qudit covering-tree extensions, simulates
Bell scenarios whose settings come from sources correlated with the device,
verifies self-testing conditions on concrete realizations, and bounds Bell
expressions with an embedded moment-matrix SDP engine under
residual-randomness constraints.
"""

from . import hardy, npa, qmath, scenario, selftest, tree

__version__ = "0.1.0"

__all__ = ["hardy", "npa", "qmath", "scenario", "selftest", "tree", "__version__"]
