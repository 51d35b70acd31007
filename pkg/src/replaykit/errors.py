"""Exception hierarchy.

Callers mostly care about the two branches: DataError covers malformed or
inconsistent inputs (CLI exit code 2), ServiceError covers remote embedding
service failures (CLI exit code 3).
"""

from __future__ import annotations


class ReplayKitError(Exception):
    """Base class for all library errors."""


class DataError(ReplayKitError):
    """Invalid, inconsistent, or unreadable input data."""


class ServiceError(ReplayKitError):
    """Remote embedding service could not satisfy a request."""


# -- record and inventory validation ---------------------------------------

class DuplicateAssetId(DataError):
    pass


class EmptyCaptions(DataError):
    pass


class EmptyClassLabel(DataError):
    pass


# -- file parsing -----------------------------------------------------------

class ParseError(DataError):
    pass


class MissingField(DataError):
    pass


class HeaderMismatch(DataError):
    pass


class TruncatedBody(DataError):
    pass


class DuplicateId(DataError):
    pass


class IoError(DataError):
    pass


class SchemaError(DataError):
    pass


# -- embedding provider -----------------------------------------------------

class ServiceUnavailable(ServiceError):
    pass


class DimensionMismatch(DataError):
    pass


class MissingEmbedding(DataError):
    pass


# -- allocation -------------------------------------------------------------

class InfeasibleBudget(DataError):
    pass


# -- selection --------------------------------------------------------------

class NoValidCaptions(DataError):
    pass


class DegenerateMean(DataError):
    pass


# -- replay orchestration ---------------------------------------------------

class UnresolvedAssetId(DataError):
    pass


# -- benchmark splits -------------------------------------------------------

class UnknownClass(DataError):
    pass


class OverlappingSplits(DataError):
    pass


# -- metrics ----------------------------------------------------------------

class MissingFeature(DataError):
    pass


class TooFewSamples(DataError):
    pass


class EigDecompositionFailure(DataError):
    pass
