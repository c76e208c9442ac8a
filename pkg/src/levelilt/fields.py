"""Dense 2D scalar fields on a uniform pixel grid.

A ScalarField is the common currency of the package: masks, aerial images,
resist patterns and level-set functions are all ScalarFields with different
value conventions. Fields are immutable after construction so they can be
shared freely between threads and cached without defensive copies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_GRID = 8


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out is a or out.base is not None:
        out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per pixel on a (height, width) grid.

    data is row-major with shape (height, width); pixel_size is the physical
    edge length of one pixel in nanometres.
    """

    data: np.ndarray
    pixel_size: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _freeze(self.data))
        if self.data.ndim != 2:
            raise ValueError(f"field data must be 2D, got shape {self.data.shape}")
        h, w = self.data.shape
        if h < MIN_GRID or w < MIN_GRID:
            raise ValueError(f"grid must be at least {MIN_GRID}x{MIN_GRID}, got {w}x{h}")
        if not (self.pixel_size > 0 and np.isfinite(self.pixel_size)):
            raise ValueError(f"pixel_size must be positive and finite, got {self.pixel_size}")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def is_binary(self) -> bool:
        return bool(np.all((self.data == 0.0) | (self.data == 1.0)))

    def with_data(self, data: np.ndarray) -> "ScalarField":
        """New field on the same grid with replaced values."""
        return ScalarField(data, self.pixel_size)


def require_same_shape(a: ScalarField, b: ScalarField, what: str = "fields") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} have mismatched shapes {a.shape} vs {b.shape}")


def require_same_grid(a: ScalarField, b: ScalarField, what: str = "fields") -> None:
    require_same_shape(a, b, what)
    if a.pixel_size != b.pixel_size:
        raise ValueError(
            f"{what} have mismatched pixel sizes {a.pixel_size} vs {b.pixel_size}"
        )


def require_binary(f: ScalarField, what: str = "field") -> None:
    if not f.is_binary():
        raise ValueError(f"{what} must be binary (values in {{0, 1}})")


@dataclass(frozen=True, eq=False)
class LevelSet:
    """Level-set function psi over a ScalarField grid; psi <= 0 is inside.

    psi is stored in pixel units: after signed-distance construction, |psi|
    is the Euclidean pixel distance to the pixel boundary of the opposite
    phase. Multiply by field.pixel_size for nanometres.
    """

    field: ScalarField

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.field.data)):
            raise ValueError("level set must be finite everywhere")

    @property
    def psi(self) -> np.ndarray:
        return self.field.data

    @property
    def pixel_size(self) -> float:
        return self.field.pixel_size

    @property
    def shape(self) -> tuple[int, int]:
        return self.field.shape
