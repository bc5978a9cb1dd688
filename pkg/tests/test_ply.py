import numpy as np
import pytest

from artiseg.errors import InputFormatError
from artiseg.ply import read_ply, write_ply


class TestPlyRoundTrip:
    def test_points_and_properties(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(50, 3))
        cluster = rng.integers(0, 4, 50)
        confident = rng.random(50) > 0.5
        path = tmp_path / "cloud.ply"
        write_ply(path, pts, {"cluster_id": cluster.astype(np.int32),
                              "confident": confident})
        back_pts, props = read_ply(path)
        assert np.allclose(back_pts, pts, atol=1e-6)  # float32 storage
        assert np.array_equal(props["cluster_id"], cluster)
        assert np.array_equal(props["confident"].astype(bool), confident)

    def test_header_is_binary_little_endian(self, tmp_path):
        path = tmp_path / "c.ply"
        write_ply(path, np.zeros((2, 3)))
        head = path.read_bytes()[:200].decode("ascii", errors="replace")
        assert head.startswith("ply\n")
        assert "format binary_little_endian 1.0" in head
        assert "element vertex 2" in head

    def test_file_size_matches_record_layout(self, tmp_path):
        path = tmp_path / "c.ply"
        write_ply(path, np.zeros((10, 3)), {"cluster_id": np.zeros(10, dtype=np.int32)})
        raw = path.read_bytes()
        header_len = raw.find(b"end_header\n") + len(b"end_header\n")
        assert len(raw) - header_len == 10 * (3 * 4 + 4)

    def test_property_length_mismatch_rejected(self, tmp_path):
        with pytest.raises(InputFormatError):
            write_ply(tmp_path / "c.ply", np.zeros((3, 3)), {"x2": np.zeros(4)})

    def test_non_ply_rejected(self, tmp_path):
        path = tmp_path / "junk.ply"
        path.write_bytes(b"not a ply file")
        with pytest.raises(InputFormatError):
            read_ply(path)
