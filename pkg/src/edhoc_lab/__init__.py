"""EDHOC handshake lab: protocol engine, simulated network, MitM harness and escrow."""

from .errors import EdhocError, ErrorCode

__version__ = "0.1.0"
__all__ = ["EdhocError", "ErrorCode", "__version__"]
