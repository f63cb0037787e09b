"""Strong convergence experiments for the Euler-Maruyama scheme with irregular drift."""
__version__ = "0.1.0"
