"""Exception hierarchy shared across the package.

Exit-code mapping for the CLI: usage errors exit 2, ContractViolation and
its data-shaped subclasses exit 3, NumericalFailure exits 4.
"""


class SceneAnnotateError(Exception):
    """Base class for all package errors."""


class ContractViolation(SceneAnnotateError):
    """An operation was called with inputs that violate its contract."""


class SceneSpecError(SceneAnnotateError):
    """A synthetic scene specification is invalid (e.g. placement off-canvas)."""


class ManifestError(ContractViolation):
    """A dataset manifest is malformed or references missing files."""


class DegenerateRegionError(SceneAnnotateError):
    """A region produced a zero-mass or otherwise unusable feature."""

    def __init__(self, region_id, message=""):
        self.region_id = region_id
        super().__init__(message or f"degenerate region {region_id}")


class DegeneratePatchError(SceneAnnotateError):
    """A patch is too small to yield a single descriptor block."""


class DegenerateInputError(SceneAnnotateError):
    """An input image is too small or empty for the requested pipeline."""


class BundleFormatError(SceneAnnotateError):
    """A model bundle has the wrong magic, version, or layout."""


class NumericalFailure(SceneAnnotateError):
    """A computation produced a non-finite result (e.g. -inf log-likelihood)."""
