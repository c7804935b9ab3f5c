"""Multi-criteria shape optimization of a flow-loaded component (2D, desk scale)."""
__version__ = "0.1.0"
