from __future__ import annotations


class GarmentFlowError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(GarmentFlowError, ValueError):
    """Grids that must share a shape do not."""


class TopologyError(GarmentFlowError, ValueError):
    """Meshes (or a mesh and its rasterisation) disagree on faces or parts."""


class DataError(GarmentFlowError, ValueError):
    """A file or bundle on disk is missing or malformed."""


class NonFiniteObjective(GarmentFlowError, ArithmeticError):
    """An optimisation objective became NaN or infinite."""

    def __init__(self, iteration: int, value: float):
        super().__init__(f"objective is {value} at iteration {iteration}")
        self.iteration = iteration
        self.value = value
