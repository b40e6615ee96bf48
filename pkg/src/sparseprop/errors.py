"""Exception hierarchy shared across the package."""


class SparsePropError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(SparsePropError):
    pass


class BadStructure(SparsePropError):
    pass


class NoActiveArena(SparsePropError):
    pass


class UndefinedValue(SparsePropError):
    pass


class CycleDetected(SparsePropError):
    pass


class NotIntermediate(SparsePropError):
    pass


class StructureFallback(SparsePropError):
    pass


class ResourceLimit(SparsePropError):
    pass


class SpikeFlipDetected(SparsePropError):
    pass


class ParseError(SparsePropError):
    pass


class RangeError(SparsePropError):
    pass


class NotDivisible(SparsePropError):
    pass


class LabelOutOfRange(SparsePropError):
    pass
