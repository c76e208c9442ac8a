"""Inverse lithography: process-weighted pattern error, analytic gradients,
and the conjugate-gradient level-set optimizer.

The pattern error compares the sigmoid-relaxed wafer image against the target
under a grid of (defocus, dose) conditions with Gaussian weights. Its exact
derivative with respect to the mask is a pair of kernel correlations; lifted
to the level set it becomes a boundary velocity times |grad psi| plus a
curvature smoothing term.

Sign convention: levelset_gradient returns the minimization gradient, i.e.
psi - eps * grad decreases the loss. The evolution step psi + dt * (velocity
+ smoothing) * |grad psi| is the same update written as a flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .fields import LevelSet, ScalarField, require_same_shape
from .levelset import (
    curvature,
    grad_magnitude,
    mask_from_levelset,
    reinitialize,
    signed_distance,
)
from .lithosim import KernelConvolver, KernelSet, ResistParams

DEFAULT_SIGMA_DEFOCUS_NM = 80.0
DEFAULT_SIGMA_DOSE = 0.1
PV_DEFOCUS_NM = (-80.0, 0.0, 80.0)
PV_DOSE = (-0.1, 0.0, 0.1)

STALL_WINDOW = 10
STALL_RELATIVE_IMPROVEMENT = 1e-5


def condition_weight(defocus: float, dose: float, sigma_h: float, sigma_q: float) -> float:
    """Gaussian process weight exp(-h^2/2s_h^2) * exp(-t^2/2s_q^2)."""
    return float(
        np.exp(-(defocus**2) / (2.0 * sigma_h**2)) * np.exp(-(dose**2) / (2.0 * sigma_q**2))
    )


@dataclass(frozen=True)
class ProcessCondition:
    """One (defocus, dose) sampling point with its Gaussian weight."""

    defocus: float
    dose: float
    weight: float

    def __post_init__(self) -> None:
        if not 0 < self.weight <= 1:
            raise ValueError(f"weight must be in (0, 1], got {self.weight}")
        nominal = self.defocus == 0.0 and self.dose == 0.0
        if nominal != (self.weight == 1.0):
            raise ValueError("weight must be 1 exactly iff defocus and dose are both 0")


def make_conditions(
    defocus_values: Sequence[float],
    dose_values: Sequence[float],
    sigma_h: float = DEFAULT_SIGMA_DEFOCUS_NM,
    sigma_q: float = DEFAULT_SIGMA_DOSE,
) -> tuple[ProcessCondition, ...]:
    """Cartesian grid of process conditions with Gaussian weights."""
    return tuple(
        ProcessCondition(h, t, condition_weight(h, t, sigma_h, sigma_q))
        for h in defocus_values
        for t in dose_values
    )


@dataclass(frozen=True)
class IltConfig:
    """Hyperparameters of the inverse problem and its optimizer."""

    gamma: float = 2.0
    theta_z: float = 50.0
    i_th: float = 0.225
    lambda_tv: float = 0.01
    alpha: float = 0.008
    dt: float = 0.5
    max_iters: int = 100
    reinit_every: int = 20
    sigma_h: float = DEFAULT_SIGMA_DEFOCUS_NM
    sigma_q: float = DEFAULT_SIGMA_DOSE
    conditions: tuple[ProcessCondition, ...] = field(
        default_factory=lambda: make_conditions((0.0,), (0.0,))
    )

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.gamma >= 1:
            raise ValueError("gamma must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.reinit_every < 1:
            raise ValueError("reinit_every must be >= 1")
        if not self.conditions:
            raise ValueError("at least one process condition required")
        if not any(c.defocus == 0.0 and c.dose == 0.0 for c in self.conditions):
            raise ValueError("the nominal (0, 0) condition must be present")

    @classmethod
    def nominal(cls, **kwargs) -> "IltConfig":
        return cls(**kwargs)

    @classmethod
    def process_variation(cls, **kwargs) -> "IltConfig":
        """3x3 grid over (-80, 0, 80) nm defocus and (-0.1, 0, 0.1) dose."""
        sigma_h = kwargs.pop("sigma_h", DEFAULT_SIGMA_DEFOCUS_NM)
        sigma_q = kwargs.pop("sigma_q", DEFAULT_SIGMA_DOSE)
        conditions = make_conditions(PV_DEFOCUS_NM, PV_DOSE, sigma_h, sigma_q)
        return cls(sigma_h=sigma_h, sigma_q=sigma_q, conditions=conditions, **kwargs)

    def with_conditions(self, conditions: Sequence[ProcessCondition]) -> "IltConfig":
        return replace(self, conditions=tuple(conditions))

    def resist(self, dose: float = 0.0) -> ResistParams:
        return ResistParams(threshold=self.i_th, steepness=self.theta_z, dose_latitude=dose)

    def defocus_values(self) -> tuple[float, ...]:
        seen: dict[float, None] = {}
        for c in self.conditions:
            seen.setdefault(c.defocus)
        return tuple(seen)


@dataclass(frozen=True)
class OptResult:
    """Outcome of one optimize() run; the returned iterate is the best seen."""

    final_psi: LevelSet
    final_mask: ScalarField
    loss_trace: tuple[float, ...]
    iterations_run: int

    def __post_init__(self) -> None:
        if len(self.loss_trace) != self.iterations_run:
            raise ValueError("loss trace length must equal iterations run")


class NonFiniteLossError(RuntimeError):
    """Loss became NaN/Inf during optimization."""

    def __init__(self, iteration: int, loss: float):
        super().__init__(f"non-finite loss {loss} at iteration {iteration}")
        self.iteration = iteration
        self.loss = loss


def _signed_power(d: np.ndarray, p: float) -> np.ndarray:
    if p == 1.0:
        return d
    return np.sign(d) * np.abs(d) ** p


def pattern_error(z: ScalarField, z_target: ScalarField, gamma: float = 2.0) -> float:
    """Sum over pixels of |Z - Z_t|^gamma."""
    require_same_shape(z, z_target, "wafer and target")
    if z.data.min() < 0 or z.data.max() > 1:
        raise ValueError("wafer values must lie in [0, 1]")
    return float(np.sum(np.abs(z.data - z_target.data) ** gamma))


def _kernels_for(kernels_by_defocus: Mapping[float, KernelSet], defocus: float) -> KernelSet:
    try:
        return kernels_by_defocus[defocus]
    except KeyError:
        raise ValueError(f"no kernel set supplied for defocus {defocus} nm") from None


class Evaluator:
    """Shared plumbing for loss and gradient over a condition grid.

    Holds one convolution plan per distinct defocus so repeated evaluations
    (the optimizer hot path) avoid rebuilding kernel spectra, and reuses the
    per-defocus amplitudes across all dose conditions.
    """

    def __init__(
        self,
        z_target: ScalarField,
        kernels_by_defocus: Mapping[float, KernelSet],
        cfg: IltConfig,
    ):
        self.z_target = z_target
        self.cfg = cfg
        self._by_defocus: list[tuple[float, KernelConvolver, list[ProcessCondition]]] = []
        for h in cfg.defocus_values():
            kset = _kernels_for(kernels_by_defocus, h)
            conv = KernelConvolver(kset, z_target.shape)
            conds = [c for c in cfg.conditions if c.defocus == h]
            self._by_defocus.append((h, conv, conds))

    def _dose_terms(self, intensity: np.ndarray, cond: ProcessCondition):
        cfg = self.cfg
        thr = cfg.i_th / (1.0 + cond.dose)
        z = 1.0 / (1.0 + np.exp(np.clip(-cfg.theta_z * (intensity - thr), -700.0, 700.0)))
        diff = z - self.z_target.data
        loss = float(np.sum(np.abs(diff) ** cfg.gamma))
        return z, diff, loss

    def loss(self, mask_data: np.ndarray) -> float:
        total = 0.0
        for _, conv, conds in self._by_defocus:
            intensity = conv.intensity(mask_data)
            for cond in conds:
                total += cond.weight * self._dose_terms(intensity, cond)[2]
        return total

    def loss_and_velocity(self, mask_data: np.ndarray) -> tuple[float, np.ndarray]:
        """Weighted loss and its exact derivative with respect to the mask."""
        cfg = self.cfg
        total = 0.0
        vel = np.zeros(self.z_target.shape)
        for _, conv, conds in self._by_defocus:
            amps = conv.amplitudes(mask_data)
            weights = conv.kernels.weights
            intensity = np.maximum(
                np.einsum("k,kij->ij", weights, np.abs(amps) ** 2), 0.0
            )
            # d(loss)/d(intensity), summed over the dose conditions at this
            # defocus: the kernel correlations are shared.
            dl_di = np.zeros_like(intensity)
            for cond in conds:
                z, diff, loss = self._dose_terms(intensity, cond)
                total += cond.weight * loss
                dl_di += (
                    cond.weight
                    * cfg.gamma
                    * cfg.theta_z
                    * _signed_power(diff, cfg.gamma - 1.0)
                    * z
                    * (1.0 - z)
                )
            fields = dl_di[np.newaxis, :, :] * amps.conj()
            corr = conv.correlate_flip(fields)
            vel += 2.0 * np.einsum("k,kij->ij", weights, corr.real)
        return total, vel


def total_error(
    mask: ScalarField,
    z_target: ScalarField,
    kernels_by_defocus: Mapping[float, KernelSet],
    cfg: IltConfig,
) -> float:
    """Process-weighted pattern error of a mask (sigmoid resist)."""
    require_same_shape(mask, z_target, "mask and target")
    return Evaluator(z_target, kernels_by_defocus, cfg).loss(mask.data)


def grad_wrt_mask(
    mask: ScalarField,
    z_target: ScalarField,
    kernels: KernelSet,
    dose: float,
    cfg: IltConfig,
) -> ScalarField:
    """Exact derivative of the single-condition pattern error w.r.t. the mask.

    The condition's Gaussian weight is not applied here; velocity() does the
    process-grid weighting. The result is real; the conjugate-pair structure
    of the two correlation terms cancels the imaginary parts identically.
    """
    require_same_shape(mask, z_target, "mask and target")
    conv = KernelConvolver(kernels, mask.shape)
    amps = conv.amplitudes(mask.data)
    weights = kernels.weights
    intensity = np.maximum(np.einsum("k,kij->ij", weights, np.abs(amps) ** 2), 0.0)
    thr = cfg.i_th / (1.0 + dose)
    z = 1.0 / (1.0 + np.exp(np.clip(-cfg.theta_z * (intensity - thr), -700.0, 700.0)))
    diff = z - z_target.data
    dl_di = cfg.gamma * cfg.theta_z * _signed_power(diff, cfg.gamma - 1.0) * z * (1.0 - z)
    corr = conv.correlate_flip(dl_di[np.newaxis, :, :] * amps.conj())
    grad = 2.0 * np.einsum("k,kij->ij", weights, corr.real)
    return mask.with_data(grad)


def velocity(
    mask: ScalarField,
    z_target: ScalarField,
    kernels_by_defocus: Mapping[float, KernelSet],
    cfg: IltConfig,
) -> ScalarField:
    """Process-weighted mask derivative sum_conditions w * d(error)/d(mask)."""
    require_same_shape(mask, z_target, "mask and target")
    ev = Evaluator(z_target, kernels_by_defocus, cfg)
    return mask.with_data(ev.loss_and_velocity(mask.data)[1])


def loss_and_gradient(
    psi: LevelSet,
    z_target: ScalarField,
    kernels_by_defocus: Mapping[float, KernelSet],
    cfg: IltConfig,
    evaluator: Evaluator | None = None,
) -> tuple[float, ScalarField]:
    """Process-weighted loss of mask(psi) and its minimization gradient.

    The gradient is -(velocity + lambda * curvature) * |grad psi|: stepping
    psi against it moves the boundary downhill in the loss and smooths it.
    Passing a prebuilt Evaluator skips kernel-spectrum replanning; the result
    is bit-identical either way.
    """
    require_same_shape(psi.field, z_target, "psi and target")
    ev = evaluator if evaluator is not None else Evaluator(z_target, kernels_by_defocus, cfg)
    mask_data = (psi.psi <= 0.0).astype(np.float64)
    loss, vel = ev.loss_and_velocity(mask_data)
    total = vel
    if cfg.lambda_tv != 0.0:
        total = total + cfg.lambda_tv * curvature(psi).data
    grad = psi.field.with_data(-total * grad_magnitude(psi).data)
    return loss, grad


def levelset_gradient(
    psi: LevelSet,
    z_target: ScalarField,
    kernels_by_defocus: Mapping[float, KernelSet],
    cfg: IltConfig,
) -> ScalarField:
    """Minimization gradient of the process-weighted error w.r.t. psi."""
    return loss_and_gradient(psi, z_target, kernels_by_defocus, cfg)[1]


def optimize(
    z_target: ScalarField,
    kernels_by_defocus: Mapping[float, KernelSet],
    cfg: IltConfig,
    initial_psi: LevelSet | None = None,
) -> OptResult:
    """Polak-Ribiere conjugate-gradient descent on the level set.

    Starts from the signed distance of the target unless initial_psi is
    given; reinitializes the signed-distance property every cfg.reinit_every
    steps (restarting the CG memory there) and returns the best-loss iterate
    seen, not the last one.
    """
    if initial_psi is None:
        psi = signed_distance(z_target)
    else:
        psi = initial_psi
        require_same_shape(psi.field, z_target, "initial psi and target")

    ev = Evaluator(z_target, kernels_by_defocus, cfg)
    kappa_on = cfg.lambda_tv != 0.0

    def grad_of(p: LevelSet, mask_data: np.ndarray, vel: np.ndarray) -> np.ndarray:
        total = vel
        if kappa_on:
            total = total + cfg.lambda_tv * curvature(p).data
        return -total * grad_magnitude(p).data

    trace: list[float] = []
    best_loss = np.inf
    best_psi = psi
    prev_grad: np.ndarray | None = None
    direction: np.ndarray | None = None

    for i in range(cfg.max_iters):
        mask_data = (psi.psi <= 0.0).astype(np.float64)
        loss, vel = ev.loss_and_velocity(mask_data)
        if not np.isfinite(loss):
            raise NonFiniteLossError(i, loss)
        trace.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_psi = psi

        if len(trace) > STALL_WINDOW:
            past = min(trace[: -STALL_WINDOW])
            if past - best_loss < STALL_RELATIVE_IMPROVEMENT * max(past, 1e-30):
                break

        g = grad_of(psi, mask_data, vel)

        if prev_grad is None:
            direction = -g
        else:
            denom = float(np.sum(prev_grad * prev_grad))
            beta = 0.0
            if denom > 0:
                beta = max(0.0, float(np.sum(g * (g - prev_grad))) / denom)
            direction = -g + beta * direction
            if float(np.sum(direction * g)) >= 0.0:
                direction = -g
        prev_grad = g

        scale = float(np.abs(direction).max())
        if scale == 0.0:
            break
        psi = LevelSet(psi.field.with_data(psi.psi + (cfg.dt / scale) * direction))

        if (i + 1) % cfg.reinit_every == 0:
            sign = psi.psi <= 0.0
            if sign.any() and not sign.all():
                psi = reinitialize(psi)
                prev_grad = None
                direction = None
            else:
                break  # interface vanished; keep the best iterate found so far

    final_mask = mask_from_levelset(best_psi)
    return OptResult(
        final_psi=best_psi,
        final_mask=final_mask,
        loss_trace=tuple(trace),
        iterations_run=len(trace),
    )
