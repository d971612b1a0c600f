import struct

import numpy as np
import pytest

from callsift.dsp import MelSpectrogram
from callsift.embed import (
    MAGIC,
    BackendSpec,
    EmbeddingMatrix,
    embed_baseline,
    embed_batch,
    export_embeddings,
    import_embeddings,
    manifest_path,
)
from callsift.errors import FormatError, NotFoundError


def spec_of(values, wid="w0"):
    return MelSpectrogram(np.asarray(values, dtype=np.float64), wid)


class TestEmbedBaseline:
    def test_dim_10000(self):
        emb = embed_baseline(spec_of(np.random.default_rng(0).random((100, 100))))
        assert emb.shape == (10000,)
        assert emb.dtype == np.float32

    def test_row_major_order(self):
        values = np.arange(10000, dtype=np.float64).reshape(100, 100) / 10000
        emb = embed_baseline(spec_of(values))
        # pixel (r, c) lands at flat index r*100 + c
        assert emb[205] == np.float32(values[2, 5])

    def test_batch_order_matches_input(self):
        specs = [
            spec_of(np.full((100, 100), 0.25), "a"),
            spec_of(np.full((100, 100), 0.75), "b"),
        ]
        mat = embed_batch(BackendSpec("baseline-flatten"), specs)
        assert mat.window_ids == ["a", "b"]
        assert np.all(mat.values[0] == np.float32(0.25))
        assert np.all(mat.values[1] == np.float32(0.75))
        assert mat.backend_tag == "baseline-flatten"


class TestEmbeddingMatrix:
    def test_row_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingMatrix(np.zeros((2, 4)), ["only-one"])

    def test_coerces_to_float32(self):
        mat = EmbeddingMatrix(np.zeros((1, 4), dtype=np.float64), ["a"])
        assert mat.values.dtype == np.float32
        assert mat.dim == 4
        assert len(mat) == 1

    def test_unknown_backend_kind_rejected(self):
        with pytest.raises(ValueError):
            BackendSpec("mystery")


class TestExchangeFormat:
    def make(self, n=7, dim=5, seed=0):
        gen = np.random.default_rng(seed)
        return EmbeddingMatrix(
            gen.standard_normal((n, dim)).astype(np.float32),
            [f"w{i:03d}" for i in range(n)],
        )

    def test_round_trip_bitwise(self, tmp_path):
        mat = self.make()
        path = tmp_path / "emb.bin"
        export_embeddings(mat, path)
        back = import_embeddings(path)
        assert back.values.tobytes() == mat.values.tobytes()
        assert back.window_ids == mat.window_ids

    def test_header_layout(self, tmp_path):
        mat = self.make(n=3, dim=2)
        path = tmp_path / "emb.bin"
        export_embeddings(mat, path)
        data = path.read_bytes()
        assert data[:6] == MAGIC
        dim, n = struct.unpack("<IQ", data[6:18])
        assert (dim, n) == (2, 3)
        assert len(data) == 18 + 4 * 6

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE!\n" + b"\x00" * 20)
        with pytest.raises(FormatError) as e:
            import_embeddings(path)
        assert e.value.offset == 0

    def test_truncated_payload(self, tmp_path):
        mat = self.make()
        path = tmp_path / "emb.bin"
        export_embeddings(mat, path)
        good = path.read_bytes()
        path.write_bytes(good[:-3])
        with pytest.raises(FormatError):
            import_embeddings(path)

    def test_missing_manifest_gets_synthetic_ids(self, tmp_path):
        mat = self.make(n=2, dim=3)
        path = tmp_path / "emb.bin"
        export_embeddings(mat, path)
        manifest_path(path).unlink()
        back = import_embeddings(path)
        assert back.window_ids == ["row0", "row1"]

    def test_nonfinite_export_rejected(self, tmp_path):
        mat = self.make(n=2, dim=2)
        mat.values[0, 0] = np.nan
        with pytest.raises(ValueError):
            export_embeddings(mat, tmp_path / "emb.bin")


class TestExternalBackend:
    def test_join_by_window_id(self, tmp_path):
        gen = np.random.default_rng(1)
        mat = EmbeddingMatrix(
            gen.standard_normal((3, 4)).astype(np.float32), ["a", "b", "c"]
        )
        path = tmp_path / "ext.bin"
        export_embeddings(mat, path)
        specs = [spec_of(np.zeros((100, 100)), "c"), spec_of(np.zeros((100, 100)), "a")]
        out = embed_batch(BackendSpec("external", external_path=str(path)), specs)
        assert out.window_ids == ["c", "a"]
        assert np.array_equal(out.values[0], mat.values[2])
        assert np.array_equal(out.values[1], mat.values[0])

    def test_missing_id_rejected(self, tmp_path):
        mat = EmbeddingMatrix(np.zeros((1, 4), dtype=np.float32), ["a"])
        path = tmp_path / "ext.bin"
        export_embeddings(mat, path)
        specs = [spec_of(np.zeros((100, 100)), "zz")]
        with pytest.raises(NotFoundError):
            embed_batch(BackendSpec("external", external_path=str(path)), specs)
