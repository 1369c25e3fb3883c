"""Export adapter: NumPy backbone dumps -> SKC1 stream containers."""

from .convert import convert
from .manifest import ExportManifest, ManifestError
from .skc1 import Skc1Error, Skc1Stream
from .validate import ValidationReport, validate

__version__ = "0.1.0"

__all__ = [
    "ExportManifest",
    "ManifestError",
    "Skc1Error",
    "Skc1Stream",
    "ValidationReport",
    "convert",
    "validate",
]
