"""Goal-oriented models of evolving digital-twin systems.

Submodules: :mod:`model`, :mod:`parser`, :mod:`validator`, :mod:`transform`,
:mod:`render`, :mod:`sim` and :mod:`cli`.
"""

from .model import Model
from .parser import ParseError, load_model, parse_model, serialize_model

__version__ = "0.1.0"
__all__ = ["Model", "ParseError", "load_model", "parse_model", "serialize_model", "__version__"]
