"""Hash encoder contracts: determinism, norms, text normalization."""

import importlib.util

import numpy as np
import pytest

from embedtool.encoder import (
    DEFAULT_MODEL,
    EncoderError,
    HashEncoder,
    get_encoder,
)


def test_model_spec_parsing():
    assert get_encoder("hash:64").dim == 64
    assert get_encoder(" hash:32 ").dim == 32
    assert get_encoder(DEFAULT_MODEL).dim == 256


@pytest.mark.parametrize("spec", ["hash:x", "hash:", "hash:4", "hash", ""])
def test_bad_model_specs_rejected(spec):
    with pytest.raises(EncoderError):
        get_encoder(spec)


@pytest.mark.skipif(
    importlib.util.find_spec("sentence_transformers") is not None,
    reason="sentence-transformers installed; the extra hint does not apply",
)
def test_model_name_without_backend_names_the_extra():
    with pytest.raises(EncoderError, match="transformers"):
        get_encoder("all-MiniLM-L6-v2")


def test_same_text_encodes_identically():
    enc = HashEncoder(128)
    first = enc.encode_batch(["spearphishing attachment delivery"])
    second = enc.encode_batch(["spearphishing attachment delivery"])
    assert np.array_equal(first, second)
    fresh = HashEncoder(128).encode_batch(["spearphishing attachment delivery"])
    assert np.array_equal(first, fresh)


def test_rows_are_unit_norm_float32():
    enc = HashEncoder(64)
    texts = ["credential dumping", "remote service exploitation", "x"]
    vectors = enc.encode_batch(texts[:2])
    assert vectors.dtype == np.float32
    for row in vectors:
        assert abs(float(np.linalg.norm(row)) - 1.0) <= 1e-5


def test_featureless_text_gives_zero_row():
    enc = HashEncoder(64)
    vectors = enc.encode_batch(["!", "credential dumping"])
    assert float(np.linalg.norm(vectors[0])) == 0.0
    assert float(np.linalg.norm(vectors[1])) > 0.0


def test_case_and_whitespace_are_normalized():
    enc = HashEncoder(128)
    a, b = enc.encode_batch(["Phishing   EMAIL", "phishing email"])
    assert np.array_equal(a, b)


def test_distinct_texts_get_distinct_vectors():
    enc = HashEncoder(256)
    a, b = enc.encode_batch(["lateral movement", "boot persistence"])
    assert not np.array_equal(a, b)


def test_related_text_scores_higher_than_unrelated():
    enc = HashEncoder(256)
    anchor, related, unrelated = enc.encode_batch(
        [
            "ransomware encryption",
            "data encrypted for impact",
            "network packet capture",
        ]
    )
    assert float(anchor @ related) > float(anchor @ unrelated)
