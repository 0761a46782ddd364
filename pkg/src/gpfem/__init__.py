"""EQ1rot and Q2 finite elements for Gross-Pitaevskii ground states."""
__version__ = "0.1.0"
