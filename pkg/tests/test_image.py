import numpy as np
import pytest

from flipblur.lib.errors import UsageError
from flipblur.lib.image import (
    AsciiPgmEncoder,
    BinaryPgmEncoder,
    ImageKind,
    PgmEncoding,
    PgmFormatError,
    UnsupportedEncodingError,
    get_encoder,
    load_image,
    quantize,
    read_pgm,
    synth_image,
    write_pgm,
)

PLAIN = b"P2\n2 2\n255\n0 255\n255 0\n"


class TestEncoders:
    def test_registry(self):
        assert get_encoder(PgmEncoding.P2) is AsciiPgmEncoder
        assert get_encoder("P5") is BinaryPgmEncoder

    def test_unsupported(self):
        with pytest.raises(UnsupportedEncodingError):
            get_encoder("P6")


class TestReadPgm:
    def test_plain(self):
        np.testing.assert_array_equal(read_pgm(PLAIN), [[0.0, 1.0], [1.0, 0.0]])

    def test_raw_matches_plain(self):
        raw = b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0])
        np.testing.assert_array_equal(read_pgm(raw), read_pgm(PLAIN))

    def test_comment(self):
        data = b"P2\n# written by hand\n2 1\n255\n0 51\n"
        np.testing.assert_allclose(read_pgm(data), [[0.0, 0.2]])

    def test_bad_magic(self):
        with pytest.raises(PgmFormatError):
            read_pgm(b"P3\n2 2\n255\n0 255\n255 0\n")

    @pytest.mark.parametrize("maxval", [0, 15, 1023])
    def test_unsupported_maxval(self, maxval):
        with pytest.raises(PgmFormatError):
            read_pgm(f"P2\n1 1\n{maxval}\n0\n".encode())

    def test_truncated(self):
        with pytest.raises(PgmFormatError):
            read_pgm(b"P5\n2 2\n")


class TestWritePgm:
    @pytest.mark.parametrize("encoding", list(PgmEncoding))
    def test_round_trip_on_grid(self, encoding, rng):
        img = quantize(rng.random((5, 7))) / 255.0
        np.testing.assert_array_equal(read_pgm(write_pgm(img, encoding=encoding)), img)

    def test_sixteen_bit(self, rng):
        img = rng.random((4, 6))
        restored = read_pgm(write_pgm(img, maxval=65535))
        assert np.abs(restored - img).max() <= 0.5 / 65535 + 1e-15

    def test_header(self):
        assert write_pgm(np.zeros((2, 3)), encoding=PgmEncoding.P2).startswith(b"P2")
        assert write_pgm(np.zeros((2, 3))).startswith(b"P5")

    def test_clips(self):
        np.testing.assert_array_equal(read_pgm(write_pgm(np.array([[-0.5, 1.5]]))), [[0.0, 1.0]])

    def test_one_dimensional(self):
        assert read_pgm(write_pgm(np.linspace(0, 1, 5))).shape == (1, 5)

    def test_bad_maxval(self):
        with pytest.raises(PgmFormatError):
            write_pgm(np.zeros((2, 2)), maxval=100)


class TestLoadImage:
    def test_npy(self, tmp_path, rng):
        img = rng.random((3, 4))
        np.save(tmp_path / "img.npy", img)
        np.testing.assert_array_equal(load_image(tmp_path / "img.npy"), img)

    def test_pgm(self, tmp_path):
        (tmp_path / "img.pgm").write_bytes(PLAIN)
        np.testing.assert_array_equal(load_image(tmp_path / "img.pgm"), [[0.0, 1.0], [1.0, 0.0]])


class TestSynthImage:
    def test_ramp(self):
        np.testing.assert_allclose(synth_image(ImageKind.RAMP, (4,)), [0, 1 / 3, 2 / 3, 1])

    def test_checker(self):
        np.testing.assert_array_equal(synth_image("checker", (2, 2)), [[0, 1], [1, 0]])

    def test_blob(self):
        img = synth_image(ImageKind.BLOB, (32, 32))
        assert img.max() == pytest.approx(1.0)
        assert img.min() >= 0.0
        border = np.concatenate([img[0], img[-1], img[:, 0], img[:, -1]])
        assert border.max() < 1e-3
        assert synth_image(ImageKind.BLOB, (8, 8))[0, 0] > 0.0

    @pytest.mark.parametrize("kind", list(ImageKind))
    @pytest.mark.parametrize("shape", [(9,), (12, 10)])
    def test_margin_extends_the_pattern(self, kind, shape):
        scene = synth_image(kind, shape, margin=3)
        assert scene.shape == tuple(n + 6 for n in shape)
        np.testing.assert_allclose(scene[tuple(slice(3, -3) for _ in shape)], synth_image(kind, shape), atol=1e-15)

    def test_ramp_continues_past_the_edges(self):
        np.testing.assert_allclose(synth_image(ImageKind.RAMP, (4,), margin=1), [-1 / 3, 0, 1 / 3, 2 / 3, 1, 4 / 3])

    def test_negative_margin(self):
        with pytest.raises(UsageError):
            synth_image(ImageKind.BLOB, (8, 8), margin=-1)

    def test_deterministic(self):
        np.testing.assert_array_equal(synth_image("blob", (16, 16)), synth_image("blob", (16, 16)))

    def test_bad_shape(self):
        with pytest.raises(Exception):
            synth_image(ImageKind.RAMP, (0, 4))
