"""Batch figure renderer for the extheat CSV artifact schema."""

from .render import KINDS, SchemaError, main, read_series, render

__all__ = ["KINDS", "SchemaError", "main", "read_series", "render"]
