from typing import Final


class MomentError(ValueError):
    """Base class of every error raised by the moment and correlation toolkit."""


class OrderMismatchError(MomentError):
    def __init__(self, left: int, right: int):
        super().__init__(f"Tensor orders differ: {left} != {right}")
        self.left: Final[int] = left
        self.right: Final[int] = right


class DegreeOverflowError(MomentError):
    """
    Raised when an operation needs components beyond the available truncation.

    Attributes:
        required: The minimal truncation degree D the operation needs
        available: The truncation degree D of the input
    """

    def __init__(self, required: int, available: int, what: str = "operation"):
        super().__init__(
            f"{what} needs truncation degree D >= {required}, but the sequence is truncated at D = {available}"
        )
        self.required: Final[int] = required
        self.available: Final[int] = available


class GridLimitError(MomentError):
    pass


class NonFiniteMatrixError(MomentError):
    pass


class BasisMismatchError(MomentError):
    pass


class ModelParameterError(MomentError):
    pass


class EmptySampleError(MomentError):
    pass


class ZeroReferenceWeightError(MomentError):
    def __init__(self, site: str):
        super().__init__(f"Reference weight sigma vanishes at site {site}")
        self.site: Final[str] = site


class MissingInputError(MomentError):
    def __init__(self, name: str):
        super().__init__(f"No sequence file named {name}")
        self.name: Final[str] = name
