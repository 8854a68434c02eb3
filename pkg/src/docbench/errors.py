"""Exception hierarchy shared across the harness."""

from __future__ import annotations


class DocbenchError(Exception):
    """Base class for every harness-specific failure."""


class ConfigError(DocbenchError):
    """Invalid run, adapter, or pattern configuration."""


class MalformedRecord(DocbenchError):
    """A ground-truth line that does not satisfy the record contract."""

    def __init__(self, message: str, line_no: int = 0):
        super().__init__(message)
        self.line_no = line_no


class UnknownLabel(DocbenchError):
    """A label outside the active vocabulary."""

    def __init__(self, label: str, line_no: int = 0):
        super().__init__(f"unknown label: {label!r}")
        self.label = label
        self.line_no = line_no


class KeyParseError(DocbenchError):
    """A filename the page-key pattern cannot interpret."""


class AdapterError(DocbenchError):
    """Base class for tool-output parsing failures."""


class XmlParseError(AdapterError):
    pass


class JsonParseError(AdapterError):
    pass


class CsvParseError(AdapterError):
    pass


class PathTypeError(AdapterError):
    """A JSON selector path that resolves to an unusable value type."""
