"""Tests for the Grid container and the FGRD format"""
import io
import struct

import numpy as np
import pytest

from gridfusion.errors import GridFormatError, GridMismatchError, InputError, ShapeMismatchError
from gridfusion.geometry import CartesianSpace, FrustumSpace, Pose
from gridfusion.grid import (
    Grid,
    collapse_height,
    concat_channels,
    coordinate_grid,
    decode_grid,
    encode_grid,
    read_grid,
    write_grid,
)


class TestGrid:
    """Tests for grid construction and channel operations"""

    def test_rejects_wrong_rank(self, unit_space):
        """Test that data must be 5-D"""
        with pytest.raises(ShapeMismatchError):
            Grid(np.zeros((2,) + unit_space.dims), unit_space, Pose.identity())

    def test_rejects_dims_that_disagree_with_space(self, unit_space):
        """Test that the spatial shape must equal the space dims"""
        with pytest.raises(ShapeMismatchError):
            Grid(np.zeros((1, 1, 3, 4, 4)), unit_space, Pose.identity())

    def test_data_is_read_only(self, random_grid):
        """Test that grids are immutable values"""
        with pytest.raises(ValueError):
            random_grid.data[0, 0, 0, 0, 0] = 1.0

    def test_caller_array_stays_writable(self, unit_space):
        """Test that wrapping an array does not freeze the caller's copy"""
        data = np.zeros((1, 1) + unit_space.dims)
        Grid(data, unit_space, Pose.identity())
        data[0, 0, 0, 0, 0] = 2.0

    def test_concat_stacks_channels(self, random_grid):
        """Test that concat gives C_a + C_b channels in order"""
        fused = concat_channels(random_grid, random_grid.slice_channels(0, 1))
        assert fused.channels == 3
        np.testing.assert_array_equal(fused.data[:, 2], random_grid.data[:, 0])

    def test_concat_then_slice_recovers_inputs(self, random_grid):
        """Test that slicing a concatenation returns both inputs unchanged"""
        other = random_grid.with_data(random_grid.data[:, :1] * 3.0)
        fused = concat_channels(random_grid, other)
        np.testing.assert_array_equal(fused.slice_channels(0, 2).data, random_grid.data)
        np.testing.assert_array_equal(fused.slice_channels(2, 3).data, other.data)

    def test_concat_space_mismatch(self, random_grid):
        """Test that concat in different spaces names the space field"""
        other_space = CartesianSpace((0.0, 0.0, 0.0), (4.0, 5.0, 3.0), (1.0, 1.0, 0.5))
        other = Grid(np.zeros((1, 1) + other_space.dims), other_space, Pose.identity())
        with pytest.raises(GridMismatchError) as excinfo:
            concat_channels(random_grid, other)
        assert excinfo.value.field == 'space'
        assert 'space' in str(excinfo.value)

    def test_concat_pose_mismatch(self, random_grid):
        """Test that concat with a different pose names the pose field"""
        moved = Grid(random_grid.data, random_grid.space, Pose.translation_only([0.0, 0.0, 1.0]))
        with pytest.raises(GridMismatchError) as excinfo:
            concat_channels(random_grid, moved)
        assert excinfo.value.field == 'pose'

    def test_concat_batch_mismatch(self, random_grid):
        """Test that concat with different N names the N field"""
        doubled = random_grid.with_data(np.concatenate([random_grid.data, random_grid.data]))
        with pytest.raises(GridMismatchError) as excinfo:
            concat_channels(random_grid, doubled)
        assert excinfo.value.field == 'N'

    def test_coordinate_grid_holds_reference_centers(self, unit_space):
        """Test that the coordinate channels equal pose-mapped voxel centers"""
        pose = Pose.from_euler([0.0, 0.0, 30.0], [1.0, 2.0, 3.0])
        coords = coordinate_grid(unit_space, pose)
        assert coords.shape == (1, 3, 3, 4, 5)
        expected = pose.apply(unit_space.grid_to_world(np.array([2.0, 1.0, 4.0])))
        np.testing.assert_array_equal(coords.data[0, :, 2, 1, 4], expected)

    def test_collapse_height_folds_z_into_channels(self, random_grid):
        """Test (N, C, Z, X, Y) -> (N, C*Z, 1, X, Y)"""
        flat = collapse_height(random_grid)
        assert flat.shape == (1, 6, 1, 4, 5)
        assert flat.space.dims == (1, 4, 5)
        np.testing.assert_array_equal(flat.data[0, 1 * 3 + 2, 0], random_grid.data[0, 1, 2])

    def test_zeros(self, unit_space):
        """Test the zeros constructor"""
        grid = Grid.zeros(unit_space, Pose.identity(), channels=4, batch=2)
        assert grid.shape == (2, 4, 3, 4, 5)
        assert not grid.data.any()


class TestFgrdFormat:
    """Tests for FGRD encoding and decoding"""

    def test_round_trip_preserves_everything(self, stored_grid):
        """Test that data, space and pose survive a round trip bit for bit"""
        pose = Pose.from_euler([1.0, 2.0, 3.0], [4.0, 5.0, 6.0], base_frame='ego')
        grid = Grid(stored_grid.data, stored_grid.space, pose)
        decoded = decode_grid(encode_grid(grid))
        assert decoded.space == grid.space
        assert decoded.pose == pose
        np.testing.assert_array_equal(decoded.data, grid.data)
        assert decoded.data.dtype == np.float32
        assert decoded.checksum() == grid.checksum()

    def test_frustum_space_round_trip(self, forward_camera):
        """Test that a frustum grid keeps its camera and planes"""
        space = FrustumSpace(forward_camera, (2.0, 5.0), stride=8)
        grid = Grid(np.ones((1, 1) + space.dims, dtype=np.float32), space, forward_camera.pose)
        assert decode_grid(encode_grid(grid)).space == space

    def test_file_and_stream_io(self, stored_grid, tmp_path):
        """Test write/read through a path and a file object"""
        path = tmp_path / 'sub' / 'grid.fgrd'
        write_grid(stored_grid, path)
        assert read_grid(path).checksum() == stored_grid.checksum()
        buffer = io.BytesIO()
        write_grid(stored_grid, buffer)
        buffer.seek(0)
        assert read_grid(buffer).checksum() == stored_grid.checksum()

    def test_missing_file_is_input_error(self, tmp_path):
        """Test that a missing grid file maps to InputError"""
        with pytest.raises(InputError):
            read_grid(tmp_path / 'absent.fgrd')

    def test_bad_magic(self, stored_grid):
        """Test that a corrupted magic gives "bad magic\""""
        raw = bytearray(encode_grid(stored_grid))
        raw[0:4] = b'XXXX'
        with pytest.raises(GridFormatError) as excinfo:
            decode_grid(raw)
        assert excinfo.value.code == 'bad magic'

    def test_bad_version(self, stored_grid):
        """Test that an unknown version is rejected"""
        raw = bytearray(encode_grid(stored_grid))
        raw[4:6] = struct.pack('<H', 99)
        with pytest.raises(GridFormatError) as excinfo:
            decode_grid(raw)
        assert excinfo.value.code == 'bad version'

    def test_truncated_payload(self, stored_grid):
        """Test that a payload shorter than the header dims gives "truncated payload\""""
        raw = encode_grid(stored_grid)[:-4]
        with pytest.raises(GridFormatError) as excinfo:
            decode_grid(raw)
        assert excinfo.value.code == 'truncated payload'

    def test_dim_overflow(self, stored_grid):
        """Test that header dims whose product overflows are rejected"""
        raw = bytearray(encode_grid(stored_grid))
        raw[6:14] = struct.pack('<II', 70000, 70000)
        with pytest.raises(GridFormatError) as excinfo:
            decode_grid(raw)
        assert excinfo.value.code == 'dim overflow'

    def test_header_dims_must_match_space(self, stored_grid):
        """Test that Z in the header must agree with the space descriptor"""
        raw = bytearray(encode_grid(stored_grid))
        raw[14:18] = struct.pack('<I', 2)
        with pytest.raises(GridFormatError) as excinfo:
            decode_grid(raw)
        assert excinfo.value.code == 'dim overflow'

    def test_format_errors_are_input_errors(self):
        """Test the exit code carried by format errors"""
        with pytest.raises(InputError) as excinfo:
            decode_grid(b'')
        assert excinfo.value.exit_code == 3

    def test_checksum_is_stable(self, stored_grid):
        """Test that equal grids have equal checksums and different data differs"""
        copy = stored_grid.with_data(stored_grid.data.copy())
        assert copy.checksum() == stored_grid.checksum()
        assert stored_grid.with_data(stored_grid.data + 1.0).checksum() != stored_grid.checksum()

    def test_round_trip_over_random_dims(self):
        """
        Test exact round trips over many shapes.

        Given: Seeded random grids with every spatial dim between 1 and 16
        When: Each is encoded and decoded
        Then: The bytes have the documented length and the grid comes back unchanged
        """
        rng = np.random.default_rng(7)
        for _ in range(25):
            z, x, y = (int(d) for d in rng.integers(1, 17, size=3))
            n, c = int(rng.integers(1, 3)), int(rng.integers(1, 5))
            space = CartesianSpace((0.0, 0.0, 0.0), (x * 0.5, y * 0.5, z * 0.25), (0.5, 0.5, 0.25))
            pose = Pose.from_euler(rng.uniform(-180, 180, 3), rng.uniform(-5, 5, 3))
            data = rng.standard_normal((n, c, z, x, y)).astype(np.float32)
            grid = Grid(data, space, pose)
            raw = encode_grid(grid)
            meta_len = struct.unpack_from('<I', raw, 26)[0]
            assert len(raw) == 30 + meta_len + 96 + 4 * data.size
            decoded = decode_grid(raw)
            np.testing.assert_array_equal(decoded.data, data)
            assert decoded.space == space
            assert decoded.pose == pose

    def test_non_float32_data_is_rejected(self, random_grid, tmp_path):
        """Test that writing float64 data raises instead of rounding it"""
        assert random_grid.data.dtype == np.float64
        with pytest.raises(GridFormatError) as excinfo:
            write_grid(random_grid, tmp_path / 'grid.fgrd')
        assert excinfo.value.code == 'bad dtype'
        assert not (tmp_path / 'grid.fgrd').exists()

    def test_astype_gives_writable_grid(self, random_grid):
        """Test that casting to float32 keeps space and pose and allows writing"""
        stored = random_grid.astype(np.float32)
        assert stored.space == random_grid.space and stored.pose == random_grid.pose
        assert stored.astype(np.float32) is stored
        assert decode_grid(encode_grid(stored)).checksum() == stored.checksum()

    def test_bad_metadata(self, stored_grid):
        """Test that unreadable metadata JSON gives "bad metadata\""""
        raw = bytearray(encode_grid(stored_grid))
        raw[30] = ord('#')
        with pytest.raises(GridFormatError) as excinfo:
            decode_grid(raw)
        assert excinfo.value.code == 'bad metadata'

    def test_metadata_without_space(self, stored_grid):
        """Test that metadata missing its space descriptor gives "bad metadata\""""
        raw = encode_grid(stored_grid)
        meta_len = struct.unpack_from('<I', raw, 26)[0]
        meta = b'{"base_frame": "x"}'.ljust(meta_len)
        with pytest.raises(GridFormatError) as excinfo:
            decode_grid(raw[:30] + meta + raw[30 + meta_len:])
        assert excinfo.value.code == 'bad metadata'
