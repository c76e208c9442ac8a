import numpy as np
import pytest

from levelilt.layouts import LayoutSpec, gen_layouts, rasterize


def run_lengths(mask: np.ndarray) -> list[int]:
    """Lengths of every maximal 1-run along rows and columns."""
    out = []
    for axis_data in (mask, mask.T):
        for line in axis_data:
            n = 0
            for v in line:
                if v:
                    n += 1
                elif n:
                    out.append(n)
                    n = 0
            if n:
                out.append(n)
    return out


class TestLayoutSpec:
    def test_min_cd_enforced_on_rect_dims(self):
        with pytest.raises(ValueError, match="min CD"):
            LayoutSpec(((0.0, 0.0, 40.0, 100.0),), 80.0)

    def test_spacing_enforced_between_features(self):
        with pytest.raises(ValueError, match="closer than min CD"):
            LayoutSpec(((0.0, 0.0, 100.0, 100.0), (140.0, 0.0, 100.0, 100.0)), 80.0)

    def test_overlapping_rects_are_one_feature(self):
        spec = LayoutSpec(((0.0, 0.0, 100.0, 100.0), (50.0, 50.0, 100.0, 100.0)), 80.0)
        assert spec.feature_count() == 1

    def test_separated_features_allowed(self):
        spec = LayoutSpec(((0.0, 0.0, 100.0, 100.0), (200.0, 0.0, 100.0, 100.0)), 80.0)
        assert spec.feature_count() == 2


class TestRasterize:
    def test_empty_spec_all_zero(self):
        f = rasterize(LayoutSpec((), 80.0), 32, 32, 1.0)
        assert f.data.max() == 0.0

    def test_pixel_center_count(self):
        # 80x80 nm rectangle at 1 nm/px: pixel centers at x + 0.5 land inside
        # for exactly 80 columns and 80 rows.
        spec = LayoutSpec(((10.0, 10.0, 80.0, 80.0),), 80.0)
        f = rasterize(spec, 128, 128, 1.0)
        assert int(f.data.sum()) == 6400

    def test_union_no_double_count(self):
        spec = LayoutSpec(
            ((10.0, 10.0, 80.0, 80.0), (50.0, 10.0, 80.0, 80.0)), 80.0
        )
        f = rasterize(spec, 160, 128, 1.0)
        # union is 120 x 80
        assert int(f.data.sum()) == 120 * 80

    def test_out_of_bounds_rejected(self):
        spec = LayoutSpec(((100.0, 10.0, 80.0, 80.0),), 80.0)
        with pytest.raises(ValueError, match="outside"):
            rasterize(spec, 128, 128, 1.0)


class TestGenLayouts:
    def test_deterministic_per_seed(self):
        a = gen_layouts(3, 512, 512, 1.0, seed=42)
        b = gen_layouts(3, 512, 512, 1.0, seed=42)
        for (spec_a, ras_a), (spec_b, ras_b) in zip(a, b):
            assert spec_a.rectangles == spec_b.rectangles
            np.testing.assert_array_equal(ras_a.data, ras_b.data)

    def test_different_seeds_differ(self):
        a = gen_layouts(1, 512, 512, 1.0, seed=1)[0][0]
        b = gen_layouts(1, 512, 512, 1.0, seed=2)[0][0]
        assert a.rectangles != b.rectangles

    def test_min_run_length_on_raster(self):
        # Raster oracle: every feature run must span at least 80 px at
        # 1 nm/px; spaces between distinct features at least 80 px too.
        for seed in (3, 17, 99):
            for spec, raster in gen_layouts(2, 512, 512, 1.0, seed=seed):
                runs = run_lengths(raster.data)
                assert runs and min(runs) >= 80

    def test_area_fraction_reasonable(self):
        for spec, raster in gen_layouts(5, 512, 512, 1.0, seed=7):
            frac = raster.data.mean()
            assert 0.02 <= frac <= 0.60
            assert spec.feature_count() >= 1

    def test_rect_count_in_range(self):
        for spec, _ in gen_layouts(8, 512, 512, 1.0, seed=23):
            assert 2 <= len(spec.rectangles) <= 8

    def test_unsatisfiable_grid_rejected(self):
        with pytest.raises(ValueError, match="unsatisfiable|cannot hold"):
            gen_layouts(1, 16, 16, 1.0, seed=5, min_cd=80.0)

    def test_invalid_count_rejected(self):
        with pytest.raises(ValueError):
            gen_layouts(0, 512, 512, 1.0, seed=5)
