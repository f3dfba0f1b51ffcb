"""Shared fixtures for the walsh_filter_mcp test suite."""

from __future__ import annotations

import math

from mcp.server.fastmcp.server import FastMCP
import pytest

from walsh_filter_mcp.catalog import primitive, wamf03
from walsh_filter_mcp.control import ControlSequence
from walsh_filter_mcp.server import mcp as _mcp_instance


@pytest.fixture
def mcp_server() -> FastMCP:
    """Return the FastMCP server instance."""
    return _mcp_instance


@pytest.fixture
def primitive_pi() -> ControlSequence:
    """Single square pi pulse over unit duration."""
    return primitive(math.pi)


@pytest.fixture
def dcg_not() -> ControlSequence:
    """WAMF_{0,3}(3pi, pi), the first-order dynamically corrected NOT."""
    return wamf03(3 * math.pi, math.pi)
