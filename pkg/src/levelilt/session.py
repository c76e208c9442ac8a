"""Evaluation sessions: preloaded kernels, target and config for repeated
loss-and-gradient calls.

A Session is immutable after creation and safe for concurrent evaluation;
evaluations are bit-identical to the corresponding core-library calls (the
CLI export-grad path goes through the same function).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .config import RunConfig, config_from_text
from .errors import NoInterfaceError
from .fields import LevelSet, ScalarField
from .fileio import read_kernels, read_pgm
from .ilt import Evaluator, loss_and_gradient
from .lithosim import KernelSet
from .ops import truncate_kernels


@dataclass(frozen=True, eq=False)
class Session:
    cfg: RunConfig
    z_target: ScalarField
    kernels_by_defocus: Mapping[float, KernelSet]
    evaluator: Evaluator

    @classmethod
    def create(
        cls,
        config_text: str,
        kernel_files: Sequence[str | Path],
        target_file: str | Path,
        overrides: dict[str, str] | None = None,
    ) -> "Session":
        """Build a session from serialized artifacts.

        Raises ConfigError or FieldFormatError when anything fails to parse;
        nothing is partially constructed.
        """
        cfg = config_from_text(config_text, overrides)
        kmap: dict[float, KernelSet] = {}
        for path in kernel_files:
            kset = truncate_kernels(read_kernels(path), cfg.ilt_kernel_count)
            kmap[kset.defocus] = kset
        target = read_pgm(target_file)
        missing = [h for h in cfg.ilt_defocus_values() if h not in kmap]
        if missing:
            raise ValueError(f"no kernel file supplied for defocus {missing[0]} nm")
        evaluator = Evaluator(target, kmap, cfg.ilt)
        return cls(cfg=cfg, z_target=target, kernels_by_defocus=kmap, evaluator=evaluator)

    @property
    def shape(self) -> tuple[int, int]:
        return self.z_target.shape

    def eval_loss_and_grad(self, psi_values: np.ndarray) -> tuple[float, np.ndarray]:
        """Loss of mask(psi) and the minimization gradient d(loss)/d(psi).

        psi_values is a row-major float64 buffer of the session's grid size.
        Rejects non-finite and uniform-sign inputs before any computation.
        """
        flat = np.asarray(psi_values, dtype=np.float64)
        if flat.size != self.z_target.width * self.z_target.height:
            raise ValueError(
                f"psi buffer has {flat.size} values, session grid needs "
                f"{self.z_target.width * self.z_target.height}"
            )
        if not np.all(np.isfinite(flat)):
            raise ValueError("psi buffer contains non-finite values")
        grid = flat.reshape(self.shape)
        inside = grid <= 0.0
        if inside.all() or not inside.any():
            raise NoInterfaceError("no interface: psi has uniform sign")
        psi = LevelSet(ScalarField(grid, self.z_target.pixel_size))
        loss, grad = loss_and_gradient(
            psi, self.z_target, self.kernels_by_defocus, self.cfg.ilt, self.evaluator
        )
        return loss, grad.data
