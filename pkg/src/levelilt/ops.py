"""Orchestration operations shared by the CLI and the HTTP service.

Each op is a pure function from a RunConfig plus inputs to artifacts; file
naming conventions for kernels live here so every entry point agrees on
them.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

from .analysis import PwCurve, ede, ede_report, pw_curve, worst_ils
from .config import RunConfig
from .errors import FieldFormatError
from .fields import LevelSet, ScalarField
from .fileio import read_kernels, write_kernels, write_pgm
from .ilt import OptResult, loss_and_gradient, optimize
from .layouts import LayoutSpec, gen_layouts
from .lithosim import KernelSet, aerial_image, generate_kernels, resist_step


def kernel_filename(defocus: float) -> str:
    return f"kernels_f{defocus:+g}.lkrn"


def truncate_kernels(kernels: KernelSet, count: int) -> KernelSet:
    if count >= kernels.count:
        return kernels
    return KernelSet(
        defocus=kernels.defocus,
        kernels=kernels.kernels[:count],
        weights=kernels.weights[:count],
        pixel_size=kernels.pixel_size,
    )


def op_gen_kernels(cfg: RunConfig, out_dir: str | Path) -> list[Path]:
    """Generate and write one LKRN file per defocus the config can need."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for defocus in cfg.all_defocus_values():
        kset = generate_kernels(cfg.optics, cfg.kernel_count, defocus)
        path = out_dir / kernel_filename(defocus)
        write_kernels(kset, path)
        written.append(path)
    return written


def load_kernel_map(
    cfg: RunConfig,
    kernels_dir: str | Path,
    defocus_values: Sequence[float],
    count: int | None = None,
) -> dict[float, KernelSet]:
    kernels_dir = Path(kernels_dir)
    out: dict[float, KernelSet] = {}
    for defocus in defocus_values:
        path = kernels_dir / kernel_filename(defocus)
        if not path.exists():
            raise FieldFormatError(
                f"missing kernel file {path}; run gen-kernels first"
            )
        kset = read_kernels(path)
        if kset.defocus != defocus:
            raise FieldFormatError(
                f"{path}: holds defocus {kset.defocus}, expected {defocus}"
            )
        if count is not None:
            kset = truncate_kernels(kset, count)
        out[defocus] = kset
    return out


def op_gen_layouts(
    cfg: RunConfig, out_dir: str | Path, count: int | None = None
) -> list[tuple[LayoutSpec, Path]]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = count if count is not None else cfg.layout_count
    results = []
    layouts = gen_layouts(
        n, cfg.width, cfg.height, cfg.pixel_size, cfg.seed, cfg.min_cd, cfg.max_rects
    )
    for i, (spec, raster) in enumerate(layouts):
        path = out_dir / f"layout_{i:03d}.pgm"
        write_pgm(raster, path)
        results.append((spec, path))
    return results


def op_simulate(
    cfg: RunConfig, kernels: KernelSet, mask: ScalarField, dose: float = 0.0
) -> tuple[ScalarField, ScalarField]:
    """Aerial image and hard-threshold resist pattern of one mask."""
    image = aerial_image(mask, kernels)
    from .lithosim import ResistParams

    resist = ResistParams(
        threshold=cfg.resist.threshold, steepness=cfg.resist.steepness, dose_latitude=dose
    )
    return image, resist_step(image, resist)


def op_ilt(
    cfg: RunConfig,
    kernels_by_defocus: Mapping[float, KernelSet],
    target: ScalarField,
    initial_psi: LevelSet | None = None,
) -> OptResult:
    return optimize(target, kernels_by_defocus, cfg.ilt, initial_psi=initial_psi)


def op_metrics(
    cfg: RunConfig,
    kernels: KernelSet,
    pairs: Sequence[tuple[ScalarField, ScalarField]],
) -> dict:
    """Simulate each mask at the nominal condition and report EDE stats."""
    wafers = []
    for mask, target in pairs:
        _, wafer = op_simulate(cfg, kernels, mask)
        wafers.append((wafer, target))
    report = ede_report(wafers, cfg.pixel_size)
    return {
        "per_clip_ede_nm": list(report.per_clip_ede),
        "aede_nm": report.aede,
        "max_min_spread_nm": report.max_min_spread,
    }


def op_pw(
    cfg: RunConfig,
    kernels_by_defocus: Mapping[float, KernelSet],
    mask: ScalarField,
    target: ScalarField,
) -> tuple[PwCurve, dict]:
    curve = pw_curve(
        mask, target, kernels_by_defocus, cfg.pw_dose_grid(), cfg.pw_pass_ede_nm, cfg.ilt
    )
    nominal = kernels_by_defocus[0.0] if 0.0 in kernels_by_defocus else None
    payload = {
        "samples": [[dof, el] for dof, el in curve.samples],
        "area": curve.area,
        "el_at_dof0_percent": curve.el_at_zero_defocus(),
        "dof_at_5pct_el_nm": curve.dof_at_el(5.0),
        "pass_ede_nm": cfg.pw_pass_ede_nm,
    }
    if nominal is not None:
        intensity = aerial_image(mask, nominal)
        payload["worst_ils_per_um"] = worst_ils(intensity, target, cfg.pixel_size)
    return curve, payload


def op_export_grad(
    cfg: RunConfig,
    kernels_by_defocus: Mapping[float, KernelSet],
    psi: LevelSet,
    target: ScalarField,
) -> tuple[float, ScalarField]:
    return loss_and_gradient(psi, target, kernels_by_defocus, cfg.ilt)


def unoptimized_ede(cfg: RunConfig, kernels: KernelSet, target: ScalarField) -> float:
    """EDE of printing the raw target as the mask (no correction)."""
    _, wafer = op_simulate(cfg, kernels, target)
    return ede(wafer, target, cfg.pixel_size)
