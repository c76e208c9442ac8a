"""Synthetic rectilinear layout generation and rasterization.

Layouts are unions of axis-aligned rectangles in nanometres, constrained so
that every rectangle is at least min_cd wide and tall and any two rectangles
either overlap (forming one merged feature) or sit at least min_cd apart.
That local rule keeps every feature run and every space at or above the
minimum critical dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField

DEFAULT_MIN_CD_NM = 80.0
MAX_PLACEMENT_TRIES = 200

Rect = tuple[float, float, float, float]  # x, y, w, h in nm


def _rects_overlap(a: Rect, b: Rect) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax <= bx + bw and bx <= ax + aw and ay <= by + bh and by <= ay + ah


def _rect_distance(a: Rect, b: Rect) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    gap_x = max(0.0, max(bx - (ax + aw), ax - (bx + bw)))
    gap_y = max(0.0, max(by - (ay + ah), ay - (by + bh)))
    return float(np.hypot(gap_x, gap_y))


def _components(rects: tuple[Rect, ...]) -> list[list[int]]:
    parent = list(range(len(rects)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            if _rects_overlap(rects[i], rects[j]):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(rects)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


@dataclass(frozen=True)
class LayoutSpec:
    """Axis-aligned rectangles in nm with a minimum-CD constraint."""

    rectangles: tuple[Rect, ...]
    min_cd: float = DEFAULT_MIN_CD_NM

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "rectangles", tuple(tuple(float(v) for v in r) for r in self.rectangles)
        )
        for r in self.rectangles:
            if r[2] < self.min_cd or r[3] < self.min_cd:
                raise ValueError(f"rectangle {r} narrower than min CD {self.min_cd} nm")
        comps = _components(self.rectangles)
        for i, ca in enumerate(comps):
            for cb in comps[i + 1 :]:
                d = min(
                    _rect_distance(self.rectangles[a], self.rectangles[b])
                    for a in ca
                    for b in cb
                )
                if d < self.min_cd:
                    raise ValueError(
                        f"features closer than min CD: {d:.1f} nm < {self.min_cd} nm"
                    )

    def feature_count(self) -> int:
        return len(_components(self.rectangles))


def rasterize(spec: LayoutSpec, width: int, height: int, pixel_size: float) -> ScalarField:
    """Binary raster: pixel is 1 iff its centre lies inside any rectangle."""
    extent_x = width * pixel_size
    extent_y = height * pixel_size
    for x, y, w, h in spec.rectangles:
        if x < 0 or y < 0 or x + w > extent_x or y + h > extent_y:
            raise ValueError(
                f"rectangle ({x}, {y}, {w}, {h}) outside the "
                f"{extent_x} x {extent_y} nm grid"
            )
    cx = (np.arange(width) + 0.5) * pixel_size
    cy = (np.arange(height) + 0.5) * pixel_size
    data = np.zeros((height, width))
    for x, y, w, h in spec.rectangles:
        in_x = (cx >= x) & (cx < x + w)
        in_y = (cy >= y) & (cy < y + h)
        data[np.ix_(in_y, in_x)] = 1.0
    return ScalarField(data, pixel_size)


def gen_bar_layouts(
    count: int,
    width: int,
    height: int,
    pixel_size: float,
    seed: int,
    min_cd: float = DEFAULT_MIN_CD_NM,
) -> list[tuple[LayoutSpec, ScalarField]]:
    """Dense staggered bar fields at near-minimum pitch, wiring-layer style.

    Bars run vertically at widths of 1..1.6x the minimum CD with spaces of
    1..2x, the regime where proximity correction actually has to work.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    ext_x = width * pixel_size
    ext_y = height * pixel_size
    margin = max(min_cd, 0.09 * ext_x)
    if ext_x < margin * 2 + min_cd * 3 or ext_y < margin * 2 + min_cd * 4:
        raise ValueError("grid too small for a bar field at this min CD")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        rects: list[Rect] = []
        x = float(rng.uniform(margin, margin + 0.6 * min_cd))
        while True:
            w = float(rng.uniform(min_cd, 1.6 * min_cd))
            if x + w > ext_x - margin:
                break
            h = float(rng.uniform(0.4, 0.8) * (ext_y - 2 * margin))
            y = float(rng.uniform(margin, ext_y - margin - h))
            rects.append((x, y, w, h))
            x += w + float(rng.uniform(min_cd, 2.1 * min_cd))
        spec = LayoutSpec(rectangles=tuple(rects), min_cd=min_cd)
        out.append((spec, rasterize(spec, width, height, pixel_size)))
    return out


def gen_layouts(
    count: int,
    width: int,
    height: int,
    pixel_size: float,
    seed: int,
    min_cd: float = DEFAULT_MIN_CD_NM,
    max_rects: int = 8,
) -> list[tuple[LayoutSpec, ScalarField]]:
    """Random rectilinear layouts plus their rasterized targets.

    Each layout holds 2..max_rects rectangles; the same seed reproduces the
    same layouts bit for bit.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if max_rects < 2:
        raise ValueError("max_rects must be >= 2")
    extent = min(width, height) * pixel_size
    margin = min_cd
    if extent - 2 * margin < min_cd:
        raise ValueError(
            f"grid extent {extent} nm cannot hold a {min_cd} nm feature "
            f"with {margin} nm margins"
        )
    lo = max(min_cd, extent / 12.0)
    hi = max(lo * 1.2, extent / 4.0)
    area_budget = 0.5 * (width * pixel_size) * (height * pixel_size)
    rng = np.random.default_rng(seed)

    out = []
    for _ in range(count):
        n_rects = int(rng.integers(2, max_rects + 1))
        rects: list[Rect] = []
        area = 0.0
        for _ in range(n_rects):
            placed = False
            for _ in range(MAX_PLACEMENT_TRIES):
                # Bars at the minimum CD show up alongside larger blocks.
                style = rng.integers(0, 3)
                if style == 0:
                    w = float(rng.uniform(min_cd, 1.5 * min_cd))
                    h = float(rng.uniform(lo, hi))
                elif style == 1:
                    w = float(rng.uniform(lo, hi))
                    h = float(rng.uniform(min_cd, 1.5 * min_cd))
                else:
                    w = float(rng.uniform(lo, hi))
                    h = float(rng.uniform(lo, hi))
                w = min(w, width * pixel_size - 2 * margin)
                h = min(h, height * pixel_size - 2 * margin)
                if area + w * h > area_budget and rects:
                    continue
                x_max = width * pixel_size - margin - w
                y_max = height * pixel_size - margin - h
                if rects and rng.random() < 0.45:
                    # Bias towards overlapping an existing rectangle so merged
                    # L and T features occur, not only isolated blocks.
                    ax, ay, aw, ah = rects[int(rng.integers(0, len(rects)))]
                    x = float(np.clip(rng.uniform(ax - 0.7 * w, ax + aw - 0.3 * w), margin, x_max))
                    y = float(np.clip(rng.uniform(ay - 0.7 * h, ay + ah - 0.3 * h), margin, y_max))
                else:
                    x = float(rng.uniform(margin, x_max))
                    y = float(rng.uniform(margin, y_max))
                cand = (x, y, w, h)
                ok = all(
                    _rects_overlap(r, cand) or _rect_distance(r, cand) >= min_cd
                    for r in rects
                )
                if ok:
                    rects.append(cand)
                    area += w * h
                    placed = True
                    break
            if not placed and len(rects) >= 2:
                break
        if len(rects) < 2:
            raise ValueError("layout constraints unsatisfiable on this grid")
        spec = LayoutSpec(rectangles=tuple(rects), min_cd=min_cd)
        out.append((spec, rasterize(spec, width, height, pixel_size)))
    return out
