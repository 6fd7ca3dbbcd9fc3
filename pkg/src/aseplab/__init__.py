"""ASEP on segments and on Z: coupled simulation, exact small-system
oracles, cutoff profiles and KPZ one-point checks."""

__version__ = "0.1.0"
