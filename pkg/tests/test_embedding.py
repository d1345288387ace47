import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from car.embedding import (
    EmbedderSpec,
    EmbeddingMatrix,
    embed_corpus,
    hash_embed,
    load_embeddings,
    save_embeddings,
)
from car.dataset import concat_text
from car.errors import FormatError, ValidationError

from conftest import make_dataset


class TestHashEmbed:
    def test_empty_text_is_zero(self):
        assert not hash_embed("", 16).any()

    def test_deterministic(self):
        a = hash_embed("pack my box with five dozen jugs", 64, seed=3)
        b = hash_embed("pack my box with five dozen jugs", 64, seed=3)
        assert np.array_equal(a, b)

    def test_unit_norm(self):
        vec = hash_embed("some nonempty text", 32, seed=0)
        # independent norm: plain python accumulation
        norm = math.sqrt(sum(float(x) * float(x) for x in vec))
        assert abs(norm - 1.0) <= 1e-9

    def test_seed_changes_vector(self):
        a = hash_embed("hello world", 64, seed=0)
        b = hash_embed("hello world", 64, seed=1)
        assert not np.array_equal(a, b)

    def test_case_insensitive(self):
        assert np.array_equal(hash_embed("Hello World", 32), hash_embed("hello world", 32))

    def test_edge_whitespace_ignored(self):
        assert np.array_equal(
            hash_embed("  hello world \n", 32), hash_embed("hello world", 32)
        )

    def test_word_order_matters(self):
        # bigrams make the embedding order-sensitive
        a = hash_embed("alpha beta gamma", 64)
        b = hash_embed("gamma beta alpha", 64)
        assert not np.array_equal(a, b)

    def test_dim_too_small(self):
        with pytest.raises(ValidationError):
            hash_embed("x", 1)

    @given(st.text(max_size=60), st.integers(min_value=2, max_value=48))
    def test_norm_is_zero_or_one(self, text, dim):
        vec = hash_embed(text, dim, seed=7)
        norm = float(np.linalg.norm(vec))
        assert norm == 0.0 or abs(norm - 1.0) <= 1e-9


class TestEmbedCorpus:
    def test_hash_rows_match_pair_order(self, tiny_rows):
        ds = make_dataset(tiny_rows)
        spec = EmbedderSpec(backend="hash", dim=24, seed=5)
        matrix = embed_corpus(ds, spec)
        assert matrix.n == len(ds) and matrix.d == 24
        for i, pair in enumerate(ds):
            assert np.array_equal(matrix.data[i], hash_embed(concat_text(pair), 24, 5))

    def test_instruction_only_flag(self, tiny_rows):
        ds = make_dataset(tiny_rows)
        full = embed_corpus(ds, EmbedderSpec(backend="hash", dim=24))
        instr = embed_corpus(ds, EmbedderSpec(backend="hash", dim=24, instruction_only=True))
        assert not np.array_equal(full.data, instr.data)
        assert np.array_equal(
            instr.data[0], hash_embed(tiny_rows[0][0], 24, 0)
        )

    def test_file_backend_roundtrip(self, tmp_path, tiny_rows):
        ds = make_dataset(tiny_rows)
        matrix = embed_corpus(ds, EmbedderSpec(backend="hash", dim=8))
        path = tmp_path / "vectors.emb"
        save_embeddings(matrix, path)
        spec = EmbedderSpec(backend="file", dim=8, path=str(path))
        assert np.array_equal(embed_corpus(ds, spec).data, matrix.data)

    def test_file_backend_row_mismatch(self, tmp_path, tiny_rows):
        ds = make_dataset(tiny_rows)
        matrix = EmbeddingMatrix(np.ones((2, 8)))
        path = tmp_path / "short.emb"
        save_embeddings(matrix, path)
        with pytest.raises(ValidationError, match="rows"):
            embed_corpus(ds, EmbedderSpec(backend="file", dim=8, path=str(path)))

    def test_file_backend_dim_mismatch(self, tmp_path, tiny_rows):
        ds = make_dataset(tiny_rows)
        matrix = EmbeddingMatrix(np.ones((len(ds), 8)))
        path = tmp_path / "dim8.emb"
        save_embeddings(matrix, path)
        with pytest.raises(ValidationError, match="dimension"):
            embed_corpus(ds, EmbedderSpec(backend="file", dim=16, path=str(path)))


class TestEmbeddingFile:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        matrix = EmbeddingMatrix(rng.normal(size=(3, 4)))
        path = tmp_path / "m.emb"
        save_embeddings(matrix, path)
        back = load_embeddings(path)
        assert back.data.tobytes() == matrix.data.tobytes()

    def test_d384_preserved(self, tmp_path):
        matrix = EmbeddingMatrix(np.random.default_rng(1).normal(size=(5, 384)))
        path = tmp_path / "wide.emb"
        save_embeddings(matrix, path)
        assert load_embeddings(path).d == 384

    def test_truncated_file(self, tmp_path):
        matrix = EmbeddingMatrix(np.ones((10, 4)))
        path = tmp_path / "trunc.emb"
        save_embeddings(matrix, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 4 * 8])  # drop the last row
        with pytest.raises(FormatError, match="bytes"):
            load_embeddings(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.emb"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(FormatError, match="magic"):
            load_embeddings(path)

    def test_too_short_for_header(self, tmp_path):
        path = tmp_path / "tiny.emb"
        path.write_bytes(b"EM")
        with pytest.raises(FormatError, match="header"):
            load_embeddings(path)

    def test_nan_rejected(self):
        data = np.ones((2, 3))
        data[1, 1] = np.nan
        with pytest.raises(ValidationError, match="NaN"):
            EmbeddingMatrix(data)
