"""Exception types raised by convlim.

All of them derive from ValueError, so callers that only care about bad
input can catch that.
"""
from __future__ import annotations

from typing import Optional


class PartitionError(ValueError):
    """Raised for mismatched time sets and refinement precondition failures."""


class MeasureError(ValueError):
    """Raised for invalid weights or maps that are not measure-preserving."""


class SystemConstructionError(ValueError):
    """Raised when a convolution system or a derived object cannot be built."""


class DescriptionError(ValueError):
    """Raised when a system description cannot be ingested.

    Attributes:
        path: Dotted location inside the JSON document (e.g.
            ``measures.per_interval[1]``), empty for document-level errors.
    """

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path or ""
        super().__init__(f"{self.path}: {message}" if self.path else message)
