"""Numerical toolkit for second-order jet calculus, L1/Linf Finsler duality and
the explicit genus-one Teichmueller model."""

__version__ = "0.1.0"
