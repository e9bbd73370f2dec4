"""EVM-based SINR prediction link simulator."""

__version__ = "1.0.0"
