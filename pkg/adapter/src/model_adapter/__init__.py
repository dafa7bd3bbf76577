"""HTTP adapter between the QE pipeline and actual ML models.

Exposes a masked language model as ``POST /unmask`` and a translation
model (conventional MT or a prompted LLM) as ``POST /translate``. A
deterministic fixture mode answers both endpoints from static files so
the pipeline's test suite never needs model weights.
"""

__version__ = "0.1.0"

from .app import create_app
from .config import AdapterConfig

__all__ = ["AdapterConfig", "create_app", "__version__"]
