"""OAM qutrit entanglement engineering via pump-shaped SPDC."""

__version__ = "0.1.0"
