"""Publication-style figure regeneration from simulation output directories."""

__version__ = "0.1.0"
