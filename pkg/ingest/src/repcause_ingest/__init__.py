"""Extraction of pre-trained representations into PTRZ files."""
from .image import ImageJob, extract_image
from .ptrz import write_ptrz
from .text import TextJob, extract_text

__version__ = "0.1.0"

__all__ = ["ImageJob", "TextJob", "__version__", "extract_image",
           "extract_text", "write_ptrz"]
