"""
nestline: analytic low-p logical error rates of topological error-correction circuits.
"""

__version__ = "1.0.0"
