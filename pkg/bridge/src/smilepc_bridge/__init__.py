"""Reference worker for the point-cloud classifier line protocol."""

from .server import BridgeModelSpec, EchoModel, TorchCheckpointModel, main, serve

__version__ = "0.1.0"

__all__ = [
    "BridgeModelSpec",
    "EchoModel",
    "TorchCheckpointModel",
    "main",
    "serve",
    "__version__",
]
