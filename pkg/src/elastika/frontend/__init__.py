"""Source language frontend: parsing, static checks and lowering."""
from .lower import LowerError, compile
from .syntax import (FrontendError, ParConflict, SourceModule, SyntaxError,
                     UndeclaredName, parse)

__all__ = [
    "FrontendError", "LowerError", "ParConflict", "SourceModule",
    "SyntaxError", "UndeclaredName", "compile", "parse",
]
