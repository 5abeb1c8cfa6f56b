"""Linear and nonlinear Rayleigh-Taylor stability toolkit for capillary fluids.

Computes critical capillary numbers, growth-rate spectra and normal modes of
an increasing density profile on (0, 1), time-integrates the per-wavenumber
linearized dynamics, and evaluates the mode-combination bookkeeping (growth
envelopes, escape times, lower bounds) used in nonlinear instability analysis.
"""

__version__ = "0.1.0"
