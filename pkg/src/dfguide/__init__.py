"""Path tracing with neural distribution-factorization path guiding."""
from dfguide.kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
