"""Exception hierarchy shared across the engine.

Everything raised deliberately by this package derives from :class:`CbmirError`
so callers (and the CLI exit-code mapping) can distinguish data/contract
problems from genuine I/O failures, which surface as ``OSError``.
"""

from __future__ import annotations


class CbmirError(Exception):
    """Base class for validation, format, and contract errors."""


class StoreFormatError(CbmirError):
    """A byte stream does not conform to the FSET1 container layout."""


class SetValidationError(CbmirError):
    """A feature set violates one or more of its invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        summary = "; ".join(str(v) for v in self.violations[:5])
        if len(self.violations) > 5:
            summary += f"; ... ({len(self.violations)} violations total)"
        super().__init__(summary or "invalid feature set")


class DimensionMismatchError(CbmirError):
    """Two vectors or sets that must share a dimensionality do not."""


class ZeroNormError(CbmirError):
    """A vector with zero Euclidean norm where a direction is required."""


class SearchError(CbmirError):
    """Retrieval cannot proceed (bad database, bad query, bad k)."""


class EvaluationError(CbmirError):
    """Metric evaluation cannot produce a report."""


class VolumeError(CbmirError):
    """Slice stacks that cannot be concatenated into a volume feature."""


class ProvenanceError(CbmirError):
    """A feature file does not match the experiment manifest's declaration."""


class RaggedGridError(CbmirError):
    """An experiment grid is missing cells required for an aggregate."""


class ManifestError(CbmirError):
    """An experiment manifest is malformed."""
