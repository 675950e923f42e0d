"""Exception hierarchy; each class carries the CLI exit code it maps to."""

from __future__ import annotations


class StylemillError(Exception):
    exit_code = 2


class ConfigError(StylemillError):
    """Bad configuration, missing file, or invalid CLI usage."""

    exit_code = 1


class DataError(StylemillError):
    """Input data violates a precondition (schema, class coverage, widths)."""

    exit_code = 2


class NumericError(StylemillError):
    """A numerical procedure failed (divergence, undefined statistic)."""

    exit_code = 3
