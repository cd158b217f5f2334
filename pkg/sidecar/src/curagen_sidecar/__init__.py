"""Reference embedding server for the curagen wire protocol."""
from .app import SidecarConfig, create_app
from .backends import HashingBackend, load_backend

__version__ = "0.1.0"
