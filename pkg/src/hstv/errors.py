"""Exception types shared across the package."""


class HstvError(Exception):
    """Base class for domain errors raised by this package."""


class MeshError(HstvError):
    """Invalid mesh topology or geometry (nonconforming, degenerate, ...)."""


class FieldError(HstvError):
    """Invalid smooth-field descriptor or evaluation outside the domain."""


class PlanError(HstvError):
    """Mesh plan cannot be realized (overflow guard, inconsistent frames)."""


class ExtremalError(HstvError):
    """Extremality analysis called outside its preconditions."""
