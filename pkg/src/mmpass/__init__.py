"""Multi-mode pinching-antenna downlink: channel model, KPBF precoding, PSO-KPBF."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
