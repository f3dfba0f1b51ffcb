"""Walsh Filter MCP - Walsh-synthesized qubit control and filter-transfer functions."""
