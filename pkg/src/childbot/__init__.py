"""Desk-scale child-robot interaction stack.

Subpackages: ``events`` (typed events and broker), ``statechart`` (dialog
DSL and interpreter), ``audio`` (propagation, GCC/SRP-PHAT, beamforming),
``speaker`` (audio-visual active speaker selection), ``activity``
(multi-view BoVW/VLAD encoding and classification), ``tracking`` (6-DoF
particle-filter tracker), ``speech`` (grammar-constrained recognition) and
``scenarios`` (simulated use-case runs).
"""
__version__ = "0.1.0"
