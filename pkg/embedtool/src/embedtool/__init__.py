"""Text-to-embedding exporter for the chain inference engine.

Encodes technique descriptions and incident reports into the unit-norm
JSONL embedding format the engine loads, with a deterministic hashing
encoder built in and an optional sentence-transformers backend.
"""

from .encoder import (
    DEFAULT_MODEL,
    EncoderError,
    HashEncoder,
    SentenceTransformerEncoder,
    get_encoder,
)
from .pipeline import (
    CONTEXT_ID,
    EncodeJob,
    PipelineError,
    encode,
    encode_report,
)

__all__ = [
    "CONTEXT_ID",
    "DEFAULT_MODEL",
    "EncodeJob",
    "EncoderError",
    "HashEncoder",
    "PipelineError",
    "SentenceTransformerEncoder",
    "encode",
    "encode_report",
    "get_encoder",
]
