import math

import numpy as np
import pytest

from app.config.settings import APP_DESCRIPTION, APP_NAME, APP_VERSION
from app.utils.common import format_float, get_project_meta, pack_bits, round_param, unpack_bits


def test_format_float():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1"
    assert format_float(math.inf) == "inf"
    assert format_float(-math.inf) == "-inf"
    assert format_float(math.nan) == "nan"
    assert format_float(None) == ""


def test_pack_bits_layout():
    bits = np.array([1, 0, 0, 0, 0, 0, 0, 1, 1], dtype=np.uint8)
    encoded = pack_bits(bits)
    # 0b10000001, 0b10000000
    assert encoded == "gYA="
    np.testing.assert_array_equal(unpack_bits(encoded, 9), bits)


def test_unpack_bits_length_mismatch():
    encoded = pack_bits(np.ones(9, dtype=np.uint8))
    with pytest.raises(ValueError):
        unpack_bits(encoded, 17)
    with pytest.raises(ValueError):
        unpack_bits(encoded, 8)


def test_unpack_bits_rejects_garbage():
    with pytest.raises(ValueError):
        unpack_bits("not base64!", 4)


def test_project_meta():
    meta = get_project_meta()
    assert meta["name"] == "one-run-privacy-audit"
    assert meta["version"]


def test_app_metadata_comes_from_pyproject():
    meta = get_project_meta()
    assert (APP_NAME, APP_VERSION, APP_DESCRIPTION) == (meta["name"], meta["version"], meta["description"])


def test_round_param():
    assert round_param(1.23456789) == 1.234568
    assert round_param(0.0) == 0.0
    # 小参数保留有效数字而不是被舍成 0
    assert round_param(3.141592653e-7) == 3.14159e-7
    assert round_param(2.5e-12) == 2.5e-12
    assert round_param(0.0123456789) == 0.0123457
