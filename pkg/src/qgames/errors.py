"""Exception types shared across the package."""


class InvalidPayoffError(ValueError):
    pass


class SchemaError(ValueError):
    pass


class InvalidQuestionError(KeyError):
    pass


class NormalizationError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class UnsupportedFamilyError(ValueError):
    pass


class LevelTooLowError(ValueError):
    """A probability needs a moment that the monomial basis does not generate."""
