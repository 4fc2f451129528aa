"""Exception hierarchy shared across the package.

Every error carries a stable machine-readable ``code`` so the HTTP layer and
the CLI can map failures to responses without string matching.
"""

from __future__ import annotations


class FloornavError(Exception):
    """Base class for all package errors."""

    code = "internal_error"


# --- geometry ---------------------------------------------------------------

class TooFewPoints(FloornavError):
    code = "too_few_points"


class DegenerateConfiguration(FloornavError):
    code = "degenerate_configuration"


class InvalidSlicing(FloornavError):
    code = "invalid_slicing"


class InvalidFov(FloornavError):
    code = "invalid_fov"


# --- descriptors ------------------------------------------------------------

class DimensionMismatch(FloornavError):
    code = "dimension_mismatch"


class FormatError(FloornavError):
    """Malformed descriptor or map file.  ``offset`` is the byte position at
    which reading failed, when known."""

    code = "format_error"

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (at byte {offset})")
        self.offset = offset


class OutOfWorld(FloornavError):
    code = "out_of_world"


# --- topometric map ---------------------------------------------------------

class EmptyRaster(FloornavError):
    code = "empty_raster"


class UnknownBoundary(FloornavError):
    code = "unknown_boundary"


class UnknownImage(FloornavError):
    code = "unknown_image"


class DuplicateName(FloornavError):
    code = "duplicate_name"


class VersionUnsupported(FloornavError):
    code = "version_unsupported"


# --- localization -----------------------------------------------------------

class EmptyDatabase(FloornavError):
    code = "empty_database"


class LocalizationFailed(FloornavError):
    code = "localization_failed"


class InsufficientCorrespondences(FloornavError):
    code = "insufficient_correspondences"


class ConsensusFailed(FloornavError):
    code = "consensus_failed"


# --- navigation -------------------------------------------------------------

class DegenerateSegment(FloornavError):
    code = "degenerate_segment"


class Unreachable(FloornavError):
    code = "unreachable"


class NoRoute(FloornavError):
    code = "no_route"


class VersionSkew(FloornavError):
    code = "version_skew"


# --- evaluation -------------------------------------------------------------

class NoComparablePairs(FloornavError):
    code = "no_comparable_pairs"


# --- service ----------------------------------------------------------------

class NotFound(FloornavError):
    """A referenced map, session, or destination does not exist."""

    code = "not_found"
