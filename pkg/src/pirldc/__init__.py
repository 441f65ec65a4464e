"""Two-server private information retrieval, the smooth codes it induces,
their one-query quantum decoders, and the resulting lower bounds."""

__version__ = "0.1.0"

from .bits import Database, all_bitstrings, as_bits
from .codes import Code, DecoderSpec, pir_to_code, smoothness_profile
from .errors import PirError
from .schemes import CubeScheme, SquareScheme, audit_privacy, get_scheme, run_protocol
from .superposed import BooleanFunction, build_decoding_unitary, qdecode

__all__ = [
    "BooleanFunction",
    "Code",
    "CubeScheme",
    "Database",
    "DecoderSpec",
    "PirError",
    "SquareScheme",
    "all_bitstrings",
    "as_bits",
    "audit_privacy",
    "build_decoding_unitary",
    "get_scheme",
    "pir_to_code",
    "qdecode",
    "run_protocol",
    "smoothness_profile",
]
