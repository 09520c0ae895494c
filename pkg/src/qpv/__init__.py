"""Position-based quantum cryptography simulator: protocols, attacks, bounds."""

__version__ = "0.1.0"
