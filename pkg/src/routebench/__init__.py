"""Constrained route-planning task generation and symbolic evaluation on land-cover masks."""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
