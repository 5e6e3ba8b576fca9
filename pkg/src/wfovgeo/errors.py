"""Exception types shared across the package.

The CLI maps these onto its exit-code scheme: InputError -> 2,
NumericalError -> 3.
"""


class InputError(ValueError):
    """Invalid input data or arguments (bad camera, empty mask, ...)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (rank deficiency, no convergence, ...)."""
