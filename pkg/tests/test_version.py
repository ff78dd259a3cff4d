"""
Tests for version information
"""

import numpy as np
import pytest

from src.utils import version
from src.utils.version import (
    check_version_compatibility,
    get_version,
    get_version_info,
    parse_version,
)


def test_parse_version():
    """Test parsing MAJOR.MINOR.PATCH"""
    assert parse_version("1.12.3") == (1, 12, 3)


@pytest.mark.parametrize("text", ["1.2", "1.2.3.4", "a.b.c", ""])
def test_parse_invalid_version(text):
    """Test malformed version strings"""
    with pytest.raises(ValueError):
        parse_version(text)


def test_version_info():
    """Test the version report"""
    info = get_version_info()
    assert info["version"] == get_version() == version.__version__
    assert set(info) == {"version", "python_version", "numpy_version", "platform"}
    assert info["numpy_version"] == np.__version__


def test_compatibility(monkeypatch):
    """Test which recorded versions the running version can read"""
    monkeypatch.setattr(version, "__version__", "1.4.2")
    assert check_version_compatibility("1.4.0")
    assert check_version_compatibility("1.3.9")
    assert not check_version_compatibility("1.5.0")
    assert not check_version_compatibility("2.0.0")
    assert not check_version_compatibility("garbage")
