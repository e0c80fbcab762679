import struct

import numpy as np
import pytest

from mavot.errors import (BadMagicError, MissingTensorError, ShapeMismatchError, TruncatedFileError,
                          WeightFormatError)
from mavot.weights import (ExtractorWeights, dump_weights, expected_shapes, load_weights, parse_weights,
                           save_weights)


@pytest.fixture(scope="module")
def weights():
    return ExtractorWeights.random(0)


@pytest.fixture(scope="module")
def blob(weights):
    return dump_weights(weights)


def test_tensor_inventory():
    shapes = expected_shapes()
    assert len(shapes) == 15
    assert sum(n.endswith(".kernel") and n != "reduce.kernel" for n in shapes) == 7
    assert sum(n.endswith(".bias") for n in shapes) == 7
    assert shapes["conv1_1.kernel"] == (3, 3, 3, 64)
    assert shapes["conv3_3.bias"] == (256,)
    assert shapes["reduce.kernel"] == (20, 20, 256, 256)


def test_roundtrip_is_byte_identical(tmp_path, weights, blob):
    path = tmp_path / "w.mavw"
    save_weights(weights, path)
    assert path.read_bytes() == blob
    again = tmp_path / "again.mavw"
    save_weights(load_weights(path), again)
    assert again.read_bytes() == blob


def test_header(blob):
    assert blob[:4] == b"MAVW"
    assert struct.unpack_from("<II", blob, 4) == (1, 15)


def test_bad_magic(blob):
    with pytest.raises(BadMagicError):
        parse_weights(b"NOPE" + blob[4:])


def test_truncated(blob):
    with pytest.raises(TruncatedFileError):
        parse_weights(blob[:-10])
    with pytest.raises(TruncatedFileError):
        parse_weights(blob[:6])


def test_trailing_bytes(blob):
    with pytest.raises(WeightFormatError):
        parse_weights(blob + b"\0")


def test_missing_tensor_is_named(weights):
    partial = {k: v for k, v in weights.items() if k != "conv3_2.kernel"}
    with pytest.raises(MissingTensorError, match="conv3_2.kernel"):
        parse_weights(dump_weights(partial))


def test_shape_mismatch_is_named(weights):
    bad = dict(weights)
    bad["conv1_2.bias"] = np.zeros(63, np.float32)
    with pytest.raises(ShapeMismatchError, match="conv1_2.bias"):
        parse_weights(dump_weights(bad))


def test_distinct_error_types():
    kinds = {BadMagicError, TruncatedFileError, MissingTensorError, ShapeMismatchError}
    assert len(kinds) == 4
    assert all(issubclass(k, WeightFormatError) for k in kinds)


def test_unknown_tensor_and_non_finite(weights):
    extra = dict(weights)
    extra["conv4_1.kernel"] = np.zeros(1)
    with pytest.raises(WeightFormatError):
        ExtractorWeights(extra)
    bad = dict(weights)
    bad["conv1_1.bias"] = np.full(64, np.nan)
    with pytest.raises(WeightFormatError):
        ExtractorWeights(bad)


def test_weights_are_read_only(weights):
    with pytest.raises(ValueError):
        weights["conv1_1.bias"][0] = 1.0
