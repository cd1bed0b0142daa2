"""Encode jobs: batches of text written as embedding JSONL rows.

The output format matches the inference engine's loader: one JSON object
per line with an "id" and a flat "vec" list, unit-normalized at 32-bit
precision, all rows sharing one dimension. The report encoder emits the
reserved context id so a report row can be concatenated with a technique
file into a single corpus.
"""

import json
import sys
from dataclasses import dataclass

import numpy as np

from .encoder import get_encoder

CONTEXT_ID = "__context__"


class PipelineError(Exception):
    """Raised for invalid jobs or inputs that produce no usable vectors."""


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


@dataclass(frozen=True)
class EncodeJob:
    """One batch-encode request: what to encode and where it goes."""

    model_name: str
    inputs: tuple
    output_path: str
    batch_size: int = 32

    def __post_init__(self):
        if self.batch_size < 1:
            raise PipelineError(f"batch_size must be >= 1, got {self.batch_size}")
        seen = set()
        duplicates = []
        for item in self.inputs:
            if not isinstance(item, (tuple, list)) or len(item) != 2:
                raise PipelineError("inputs must be (id, text) pairs")
            vid = item[0]
            if not isinstance(vid, str) or not vid:
                raise PipelineError(f"input id must be a nonempty string, got {vid!r}")
            if vid in seen:
                duplicates.append(vid)
            seen.add(vid)
        if duplicates:
            raise PipelineError(f"duplicate input ids: {sorted(set(duplicates))}")


def _write_rows(rows, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for vid, vector in rows:
            fh.write(json.dumps({"id": vid, "vec": [float(x) for x in vector]}))
            fh.write("\n")


def encode(job: EncodeJob, encoder=None) -> int:
    """Encode every nonempty input and write one JSONL row per vector.

    Inputs with blank text, or text too short to produce any feature, are
    skipped with a warning on standard error. Returns the row count.
    """
    encoder = encoder if encoder is not None else get_encoder(job.model_name)
    kept = []
    for vid, text in job.inputs:
        if not str(text).strip():
            _warn(f"skipping {vid!r}: empty text")
            continue
        kept.append((vid, str(text)))
    if not kept:
        raise PipelineError("no nonempty texts to encode")

    rows = []
    for start in range(0, len(kept), job.batch_size):
        batch = kept[start : start + job.batch_size]
        vectors = encoder.encode_batch([text for _, text in batch])
        for (vid, _), vector in zip(batch, vectors):
            if not float(np.linalg.norm(vector)) > 0.0:
                _warn(f"skipping {vid!r}: text produced no features")
                continue
            rows.append((vid, vector))
    if not rows:
        raise PipelineError("every input was skipped; nothing to write")
    _write_rows(rows, job.output_path)
    return len(rows)


def _chunk_text(text: str, max_chars: int) -> list[str]:
    """Greedy whitespace-boundary chunks; oversized words are hard-split."""
    words = []
    for word in text.split():
        while len(word) > max_chars:
            words.append(word[:max_chars])
            word = word[max_chars:]
        words.append(word)
    chunks = []
    current = []
    length = 0
    for word in words:
        extra = len(word) + (1 if current else 0)
        if current and length + extra > max_chars:
            chunks.append(" ".join(current))
            current = []
            length = 0
            extra = len(word)
        current.append(word)
        length += extra
    if current:
        chunks.append(" ".join(current))
    return chunks


def encode_report(text: str, output_path: str, model_name: str = "hash:256",
                  encoder=None) -> np.ndarray:
    """Encode one document into a single reserved-id context row.

    Text longer than the encoder's window is split on whitespace and the
    chunk embeddings are averaged, then renormalized. Returns the vector.
    """
    encoder = encoder if encoder is not None else get_encoder(model_name)
    if not str(text).strip():
        raise PipelineError("report is empty")
    text = str(text)
    if len(text) > encoder.max_chars:
        chunks = _chunk_text(text, encoder.max_chars)
        _warn(
            f"report exceeds the {encoder.max_chars}-character window; "
            f"averaging {len(chunks)} chunk embeddings"
        )
    else:
        chunks = [text]
    vectors = encoder.encode_batch(chunks).astype(np.float64)
    mean = vectors.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if not norm > 0.0:
        raise PipelineError("report text produced no features")
    vector = (mean / norm).astype(np.float32)
    _write_rows([(CONTEXT_ID, vector)], output_path)
    return vector
