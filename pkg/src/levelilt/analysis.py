"""Printability and robustness metrics.

EDE (edge distance error) is the symmetric-difference area between wafer and
target divided by the target perimeter, in nanometres: an area-weighted
average edge displacement that is insensitive to mesh size. Process-window
curves sweep (defocus, dose) and report the widest passing dose interval per
defocus; image log slope measures aerial-image contrast at feature edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .fields import ScalarField, require_binary, require_same_shape
from .ilt import IltConfig
from .lithosim import KernelSet, aerial_image, resist_step


@dataclass(frozen=True)
class EdeReport:
    """Per-clip EDE values with their mean and max-min spread, in nm."""

    per_clip_ede: tuple[float, ...]
    aede: float
    max_min_spread: float

    def __post_init__(self) -> None:
        if not self.per_clip_ede:
            raise ValueError("report requires at least one clip")
        if self.max_min_spread < 0:
            raise ValueError("spread cannot be negative")


@dataclass(frozen=True)
class PwCurve:
    """Exposure-latitude-vs-defocus samples and the area under the curve.

    samples are (defocus nm, max exposure latitude in percent), defocus
    ascending; area is the trapezoidal integral of EL over defocus.
    """

    samples: tuple[tuple[float, float], ...]
    area: float

    def __post_init__(self) -> None:
        dofs = [s[0] for s in self.samples]
        if any(b <= a for a, b in zip(dofs, dofs[1:])):
            raise ValueError("defocus samples must be strictly ascending")
        if any(s[1] < 0 for s in self.samples):
            raise ValueError("exposure latitude cannot be negative")

    def el_at_zero_defocus(self) -> float:
        for dof, el in self.samples:
            if dof == 0.0:
                return el
        raise ValueError("curve has no zero-defocus sample")

    def dof_at_el(self, el_percent: float) -> float:
        """Width of the widest contiguous defocus run containing 0 nm whose
        samples all reach el_percent. Sample resolution, no interpolation."""
        passing = [(dof, el >= el_percent) for dof, el in self.samples]
        idx0 = next((i for i, (dof, _) in enumerate(passing) if dof == 0.0), None)
        if idx0 is None:
            raise ValueError("curve has no zero-defocus sample")
        if not passing[idx0][1]:
            return 0.0
        lo = idx0
        while lo > 0 and passing[lo - 1][1]:
            lo -= 1
        hi = idx0
        while hi < len(passing) - 1 and passing[hi + 1][1]:
            hi += 1
        return self.samples[hi][0] - self.samples[lo][0]


def perimeter_edge_count(target: ScalarField) -> int:
    """Number of 4-neighbor inside/outside pixel edges; the grid border
    counts as outside."""
    m = np.pad(target.data.astype(bool), 1)
    edges = 0
    edges += int(np.sum(m[1:, :] != m[:-1, :]))
    edges += int(np.sum(m[:, 1:] != m[:, :-1]))
    return edges


def ede(wafer: ScalarField, target: ScalarField, pixel_size: float) -> float:
    """Edge distance error in nm: differing area / target perimeter."""
    require_same_shape(wafer, target, "wafer and target")
    require_binary(wafer, "wafer")
    require_binary(target, "target")
    perimeter_px = perimeter_edge_count(target)
    if perimeter_px == 0:
        raise ValueError("target has zero perimeter")
    differing = int(np.sum(wafer.data != target.data))
    area = differing * pixel_size * pixel_size
    return area / (perimeter_px * pixel_size)


def ede_report(
    pairs: Sequence[tuple[ScalarField, ScalarField]], pixel_size: float
) -> EdeReport:
    """EDE per (wafer, target) pair plus mean and max-min spread."""
    if not pairs:
        raise ValueError("at least one (wafer, target) pair required")
    values = tuple(ede(w, t, pixel_size) for w, t in pairs)
    return EdeReport(
        per_clip_ede=values,
        aede=float(np.mean(values)),
        max_min_spread=float(max(values) - min(values)),
    )


def pw_curve(
    mask: ScalarField,
    target: ScalarField,
    kernels_by_defocus: Mapping[float, KernelSet],
    dose_grid: Sequence[float],
    pass_ede_nm: float,
    cfg: IltConfig,
) -> PwCurve:
    """Exposure latitude vs defocus for one mask.

    For every supplied defocus the aerial image is simulated once and the
    dose grid swept through the step resist; a (defocus, dose) point passes
    when its EDE stays within pass_ede_nm. The reported EL is the full width
    in percent of the widest contiguous passing dose run containing dose 0.
    """
    doses = sorted(dose_grid)
    if 0.0 not in doses:
        raise ValueError("dose grid must contain the nominal dose 0")
    for t in doses:
        if -t not in doses:
            raise ValueError("dose grid must be symmetric about 0")
    samples = []
    for defocus in sorted(kernels_by_defocus):
        intensity = aerial_image(mask, kernels_by_defocus[defocus])
        passing = []
        for t in doses:
            wafer = resist_step(intensity, cfg.resist(t))
            passing.append(ede(wafer, target, mask.pixel_size) <= pass_ede_nm)
        idx0 = doses.index(0.0)
        if not passing[idx0]:
            max_el = 0.0
        else:
            lo = idx0
            while lo > 0 and passing[lo - 1]:
                lo -= 1
            hi = idx0
            while hi < len(doses) - 1 and passing[hi + 1]:
                hi += 1
            max_el = (doses[hi] - doses[lo]) * 100.0
        samples.append((defocus, max_el))
    dofs = [s[0] for s in samples]
    els = [s[1] for s in samples]
    area = float(np.trapezoid(els, dofs)) if len(samples) > 1 else 0.0
    return PwCurve(samples=tuple(samples), area=area)


def target_boundary_pixels(target: ScalarField) -> np.ndarray:
    """Boolean mask of outside pixels 4-adjacent to inside pixels."""
    m = target.data.astype(bool)
    pad = np.pad(m, 1)
    near_inside = (
        pad[2:, 1:-1] | pad[:-2, 1:-1] | pad[1:-1, 2:] | pad[1:-1, :-2]
    )
    return ~m & near_inside


def worst_ils(intensity: ScalarField, target: ScalarField, pixel_size: float) -> float:
    """Minimum image log slope |grad I| / I over target boundary pixels, 1/um."""
    require_same_shape(intensity, target, "intensity and target")
    boundary = target_boundary_pixels(target)
    if not boundary.any():
        raise ValueError("target has no boundary pixels")
    if (intensity.data[boundary] <= 0).any():
        raise ValueError("zero intensity at a boundary pixel: log slope undefined")
    gy, gx = np.gradient(intensity.data)
    slope = np.hypot(gx, gy) / intensity.data  # per pixel
    per_um = slope / (pixel_size * 1e-3)
    return float(per_um[boundary].min())
