"""Allow running as python -m walsh_filter_mcp."""

from .server import main

main()
