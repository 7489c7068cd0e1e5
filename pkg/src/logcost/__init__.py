"""Logarithmic-cost adaptive filters, their performance theory, and a
Monte Carlo system-identification harness.

Subpackages by role:

    specfun  overflow-safe special functions for the closed-form theory
    filters  the filter update family (LMLS, LLAD, normalized variants,
             and the classical baselines they are measured against)
    theory   closed-form transient and steady-state performance engine
    simkit   seeded, reproducible ensemble simulation harness
    cli      command line front end emitting CSV/JSON and figures
"""

__version__ = "0.1.0"
