import numpy as np
import pytest
import scipy.sparse as sparse

from lavdm_kit import read_container, write_container
from lavdm_kit.errors import LavdmError


class TestContainer:
    def test_dense_roundtrip(self, tmp_path):
        path = tmp_path / "box.lvdm"
        rng = np.random.default_rng(0)
        frames = rng.standard_normal((5, 3, 2))
        values = rng.standard_normal(4)
        write_container(path, [("FRM", frames), ("VAL", values)])
        out = read_container(path)
        assert [tag for tag, _ in out] == ["FRM", "VAL"]
        np.testing.assert_array_equal(out[0][1], frames)
        np.testing.assert_array_equal(out[1][1], values)

    def test_csr_roundtrip(self, tmp_path):
        path = tmp_path / "mat.lvdm"
        rng = np.random.default_rng(1)
        dense = rng.standard_normal((7, 9))
        dense[dense < 0.5] = 0.0
        mat = sparse.csr_matrix(dense)
        write_container(path, [("AFF", mat)])
        (tag, back), = read_container(path)
        assert tag == "AFF"
        assert sparse.issparse(back)
        np.testing.assert_array_equal(back.toarray(), dense)

    def test_mixed_sections_with_connection_tag(self, tmp_path):
        path = tmp_path / "conn.lvdm"
        blocks = np.random.default_rng(2).standard_normal((6, 2, 2))
        edges = np.arange(12, dtype=float).reshape(6, 2)
        write_container(path, [("CON", blocks), ("EDG", edges)])
        out = dict(read_container(path))
        np.testing.assert_array_equal(out["CON"], blocks)
        np.testing.assert_array_equal(out["EDG"], edges)

    def test_magic_check(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\0" * 16)
        with pytest.raises(LavdmError):
            read_container(path)

    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.lvdm"
        b = tmp_path / "b.lvdm"
        arr = np.linspace(0, 1, 10)
        write_container(a, [("VAL", arr)])
        write_container(b, [("VAL", arr)])
        assert a.read_bytes() == b.read_bytes()
