"""Out-of-process denoiser servers speaking the ZSND wire protocol."""

from .backends import BoxBlurBackend, IdentityBackend, make_backend
from .conformance import ConformanceReport, conformance_check
from .server import ServerConfig, serve

__version__ = "0.1.0"
