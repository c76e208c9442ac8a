import numpy as np
import pytest

from levelilt.errors import FieldFormatError
from levelilt.fields import ScalarField
from levelilt.fileio import (
    parse_config_text,
    read_kernels,
    read_pgm,
    read_raw_field,
    write_kernels,
    write_pgm,
    write_raw_field,
)
from levelilt.lithosim import OpticsParams, generate_kernels


class TestPgm:
    def test_round_trip_binary_mask(self, tmp_path):
        rng = np.random.default_rng(5)
        mask = ScalarField((rng.random((24, 40)) > 0.5).astype(float), 7.5)
        path = tmp_path / "m.pgm"
        write_pgm(mask, path)
        back = read_pgm(path)
        np.testing.assert_array_equal(back.data, mask.data)
        assert back.pixel_size == mask.pixel_size

    def test_write_is_byte_deterministic(self, tmp_path):
        mask = ScalarField(np.eye(16), 1.0)
        write_pgm(mask, tmp_path / "a.pgm")
        write_pgm(mask, tmp_path / "b.pgm")
        assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()

    def test_not_pgm_rejected(self, tmp_path):
        p = tmp_path / "bad.pgm"
        p.write_bytes(b"P6 junk")
        with pytest.raises(FieldFormatError, match="P5"):
            read_pgm(p)

    def test_truncated_payload_rejected(self, tmp_path):
        mask = ScalarField(np.eye(16), 1.0)
        p = tmp_path / "t.pgm"
        write_pgm(mask, p)
        p.write_bytes(p.read_bytes()[:-10])
        with pytest.raises(FieldFormatError, match="truncated"):
            read_pgm(p)


class TestRawField:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        field = ScalarField(rng.normal(size=(18, 26)), 12.0)
        path = tmp_path / "psi.raw"
        write_raw_field(field, path)
        back = read_raw_field(path)
        np.testing.assert_array_equal(back.data, field.data)
        assert back.pixel_size == field.pixel_size
        # 16-byte header + f64 payload
        assert path.stat().st_size == 16 + 18 * 26 * 8

    def test_truncation_rejected(self, tmp_path):
        field = ScalarField(np.zeros((16, 16)), 1.0)
        p = tmp_path / "x.raw"
        write_raw_field(field, p)
        p.write_bytes(p.read_bytes()[:-1])
        with pytest.raises(FieldFormatError, match="expected"):
            read_raw_field(p)


@pytest.fixture(scope="module")
def kernels():
    return generate_kernels(OpticsParams(kernel_size=15, pixel_size=24.0), 3, defocus=40.0)


class TestLkrn:
    def test_round_trip_exact(self, tmp_path, kernels):
        path = tmp_path / "k.lkrn"
        write_kernels(kernels, path)
        back = read_kernels(path)
        assert back.defocus == kernels.defocus
        assert back.pixel_size == kernels.pixel_size
        np.testing.assert_array_equal(back.weights, kernels.weights)
        np.testing.assert_array_equal(back.kernels, kernels.kernels)

    def test_layout_matches_spec(self, tmp_path, kernels):
        path = tmp_path / "k.lkrn"
        write_kernels(kernels, path)
        raw = path.read_bytes()
        assert raw[:4] == b"LKRN"
        version, count, size = np.frombuffer(raw[4:16], dtype="<u4")
        assert (version, count, size) == (1, 3, 15)
        pixel_size, defocus = np.frombuffer(raw[16:32], dtype="<f8")
        assert pixel_size == 24.0 and defocus == 40.0
        assert len(raw) == 32 + 3 * 8 + 3 * 15 * 15 * 16

    def test_truncated_rejected(self, tmp_path, kernels):
        path = tmp_path / "k.lkrn"
        write_kernels(kernels, path)
        (tmp_path / "cut.lkrn").write_bytes(path.read_bytes()[:100])
        with pytest.raises(FieldFormatError, match="LKRN: unexpected end"):
            read_kernels(tmp_path / "cut.lkrn")

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.lkrn"
        p.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(FieldFormatError, match="magic"):
            read_kernels(p)


class TestConfigText:
    def test_parses_dotted_keys_and_comments(self):
        text = """
        # a comment
        grid.width = 256
        ilt.lambda_tv = 0.01   # trailing comment
        paths.kernels_dir = out/kernels
        """
        values = parse_config_text(text)
        assert values == {
            "grid.width": "256",
            "ilt.lambda_tv": "0.01",
            "paths.kernels_dir": "out/kernels",
        }

    def test_missing_equals_rejected(self):
        with pytest.raises(FieldFormatError, match="line 2"):
            parse_config_text("a = 1\nbroken line\n")
