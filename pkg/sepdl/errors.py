# Copyright (c) 2025 sepdl developers

"""Exceptions raised by sepdl."""


class SepdlError(Exception):
    pass


class ShapeError(SepdlError, ValueError):
    pass


class ParameterError(SepdlError, ValueError):
    pass


class SliceIndexError(SepdlError, IndexError):
    pass


class FormatError(SepdlError, ValueError):
    pass


class DegenerateDirectionError(SepdlError, ValueError):
    pass


class MisuseError(SepdlError, RuntimeError):
    pass


class NumericalError(SepdlError, ArithmeticError):
    def __init__(self, message: str, iteration: int) -> None:
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class StallError(SepdlError, RuntimeError):
    """Raised when the escape step keeps soft-thresholding to zero.

    The partially filled run record is attached as ``record``.
    """

    def __init__(self, message: str, record) -> None:
        super().__init__(message)
        self.record = record
