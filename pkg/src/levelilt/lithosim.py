"""Partially coherent lithography forward model.

The imaging system is decomposed into a weighted set of coherent kernels by
eigendecomposition of the Hermitian mutual-coherence operator built from a
circular source (radius sigma * NA) and a circular pupil (radius NA / lambda),
with defocus entering as a paraxial quadratic pupil phase. The aerial image is
then

    I = sum_k w_k |M (*) h_k|^2

with (*) a zero-padded linear convolution. Kernels are normalized so that a
large open frame images to intensity ~1.0 in the clear region, which is what
makes the default resist threshold meaningful.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .fields import ScalarField

DEFAULT_WAVELENGTH_NM = 193.0
DEFAULT_NA = 1.35
DEFAULT_SIGMA = 0.3
DEFAULT_KERNEL_SIZE = 35
DEFAULT_KERNEL_PIXEL_NM = 12.0
DEFAULT_THRESHOLD = 0.225
DEFAULT_STEEPNESS = 50.0

# Eigenvalues below this fraction of the leading one count as numerically zero.
WEIGHT_FLOOR_REL = 1e-12

# Source disk is integrated on a sub-grid this many times finer than the
# kernel frequency grid.
SOURCE_OVERSAMPLE = 8


@dataclass(frozen=True)
class OpticsParams:
    """Projection-system description for kernel generation."""

    wavelength: float = DEFAULT_WAVELENGTH_NM
    numerical_aperture: float = DEFAULT_NA
    partial_coherence_sigma: float = DEFAULT_SIGMA
    kernel_size: int = DEFAULT_KERNEL_SIZE
    pixel_size: float = DEFAULT_KERNEL_PIXEL_NM

    def __post_init__(self) -> None:
        if not 0 < self.numerical_aperture < 1.5:
            raise ValueError(f"numerical_aperture out of range: {self.numerical_aperture}")
        if not 0 <= self.partial_coherence_sigma <= 1:
            raise ValueError(
                f"partial_coherence_sigma out of range: {self.partial_coherence_sigma}"
            )
        if self.kernel_size % 2 != 1 or self.kernel_size < 3:
            raise ValueError(f"kernel_size must be odd and >= 3, got {self.kernel_size}")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if not self.pixel_size > 0:
            raise ValueError("pixel_size must be positive")


@dataclass(frozen=True, eq=False)
class KernelSet:
    """Coherent kernels and weights for one defocus condition.

    kernels has shape (K, S, S), complex, with array index (S//2, S//2) being
    the zero spatial offset. weights are non-negative and descending.
    """

    defocus: float
    kernels: np.ndarray
    weights: np.ndarray
    pixel_size: float

    def __post_init__(self) -> None:
        k = np.ascontiguousarray(self.kernels, dtype=np.complex128)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if k is self.kernels:
            k = k.copy()
        if w is self.weights:
            w = w.copy()
        k.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "kernels", k)
        object.__setattr__(self, "weights", w)
        if k.ndim != 3 or k.shape[1] != k.shape[2]:
            raise ValueError(f"kernels must be (K, S, S), got {k.shape}")
        if k.shape[1] % 2 != 1:
            raise ValueError("kernel size must be odd")
        if w.shape != (k.shape[0],):
            raise ValueError("one weight per kernel required")
        if (w < 0).any() or (np.diff(w) > 0).any():
            raise ValueError("weights must be non-negative and descending")
        if k.shape[0] > k.shape[1] ** 2:
            raise ValueError("more kernels than frequency samples")
        if not self.pixel_size > 0:
            raise ValueError("pixel_size must be positive")

    @property
    def count(self) -> int:
        return self.kernels.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.kernels.shape[1]


@dataclass(frozen=True)
class ResistParams:
    threshold: float = DEFAULT_THRESHOLD
    steepness: float = DEFAULT_STEEPNESS
    dose_latitude: float = 0.0

    def __post_init__(self) -> None:
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if not self.steepness > 0:
            raise ValueError("steepness must be positive")
        if not self.dose_latitude > -1:
            raise ValueError("dose_latitude must be > -1")

    @property
    def effective_threshold(self) -> float:
        """Dose-shifted printing threshold I_th / (1 + t_q)."""
        return self.threshold / (1.0 + self.dose_latitude)


def _pupil(fx: np.ndarray, fy: np.ndarray, optics: OpticsParams, defocus: float) -> np.ndarray:
    r2 = fx * fx + fy * fy
    inside = r2 <= (optics.numerical_aperture / optics.wavelength) ** 2 + 1e-18
    phase = np.exp(1j * np.pi * optics.wavelength * defocus * r2)
    return np.where(inside, phase, 0.0 + 0.0j)


def _source_points(optics: OpticsParams, df: float) -> np.ndarray:
    """Sample the uniform source disk on a sub-grid of the frequency grid."""
    radius = optics.partial_coherence_sigma * optics.numerical_aperture / optics.wavelength
    if radius <= 0:
        return np.zeros((1, 2))
    ds = df / SOURCE_OVERSAMPLE
    m = int(np.ceil(radius / ds))
    s = np.arange(-m, m + 1) * ds
    sx, sy = np.meshgrid(s, s, indexing="ij")
    keep = np.hypot(sx, sy) <= radius + 1e-18
    return np.stack([sx[keep], sy[keep]], axis=1)


def generate_kernels(optics: OpticsParams, k_count: int, defocus: float = 0.0) -> KernelSet:
    """Leading coherent kernels of the imaging operator at one defocus.

    Builds the mutual-coherence matrix on the kernel-grid frequencies that the
    pupil can reach, eigendecomposes it, and returns the k_count strongest
    eigen-kernels in the spatial domain. If fewer than k_count eigenvalues are
    numerically nonzero, all nonzero ones are returned with a warning.
    """
    if k_count < 1:
        raise ValueError("k_count must be >= 1")
    S = optics.kernel_size
    df = 1.0 / (S * optics.pixel_size)
    f = (np.arange(S) - S // 2) * df
    fx, fy = np.meshgrid(f, f, indexing="ij")

    pupil_r = optics.numerical_aperture / optics.wavelength
    reach = (1.0 + optics.partial_coherence_sigma) * pupil_r
    band = np.hypot(fx, fy) <= reach + 1e-18
    if not band.any():
        raise ValueError("pupil unresolved: kernel grid too small for these optics")
    fb_x = fx[band]
    fb_y = fy[band]

    src = _source_points(optics, df)
    n = fb_x.size
    tcc = np.zeros((n, n), dtype=np.complex128)
    for sx, sy in src:
        pv = _pupil(fb_x + sx, fb_y + sy, optics, defocus)
        tcc += np.outer(pv, pv.conj())
    # Normalization makes a large open frame image to ~1.0 in the clear.
    tcc /= len(src) * S * S
    tcc = 0.5 * (tcc + tcc.conj().T)

    vals, vecs = np.linalg.eigh(tcc)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]

    nonzero = int(np.sum(vals > max(vals[0], 0.0) * WEIGHT_FLOOR_REL))
    if nonzero == 0:
        raise ValueError("imaging operator is numerically zero")
    if k_count > nonzero:
        warnings.warn(
            f"requested {k_count} kernels but only {nonzero} have nonzero weight",
            stacklevel=2,
        )
        k_count = nonzero

    kernels = np.empty((k_count, S, S), dtype=np.complex128)
    for k in range(k_count):
        grid = np.zeros((S, S), dtype=np.complex128)
        grid[band] = vecs[:, k]
        kernels[k] = S * np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(grid)))
    return KernelSet(
        defocus=defocus,
        kernels=kernels,
        weights=vals[:k_count],
        pixel_size=optics.pixel_size,
    )


def tcc_trace(optics: OpticsParams, defocus: float = 0.0) -> float:
    """Trace of the mutual-coherence matrix used by generate_kernels."""
    S = optics.kernel_size
    df = 1.0 / (S * optics.pixel_size)
    f = (np.arange(S) - S // 2) * df
    fx, fy = np.meshgrid(f, f, indexing="ij")
    pupil_r = optics.numerical_aperture / optics.wavelength
    reach = (1.0 + optics.partial_coherence_sigma) * pupil_r
    band = np.hypot(fx, fy) <= reach + 1e-18
    src = _source_points(optics, df)
    tr = 0.0
    for sx, sy in src:
        pv = _pupil(fx[band] + sx, fy[band] + sy, optics, defocus)
        tr += float(np.sum(np.abs(pv) ** 2))
    return tr / (len(src) * S * S)


class KernelConvolver:
    """Cached zero-padded FFT convolution plans for one kernel set and grid.

    Precomputes padded kernel spectra so repeated aerial-image and gradient
    evaluations on same-shaped masks cost one forward FFT plus K inverse FFTs.
    Instances are immutable after construction and safe to share.
    """

    def __init__(self, kernels: KernelSet, shape: tuple[int, int]):
        h, w = shape
        S = kernels.kernel_size
        self.kernels = kernels
        self.shape = shape
        self._pad = (next_fast_len(h + S - 1), next_fast_len(w + S - 1))
        self._lo = S // 2
        spectra = []
        spectra_flip = []
        for k in range(kernels.count):
            ker = kernels.kernels[k]
            buf = np.zeros(self._pad, dtype=np.complex128)
            buf[:S, :S] = ker
            spectra.append(np.fft.fft2(buf))
            buf = np.zeros(self._pad, dtype=np.complex128)
            buf[:S, :S] = ker[::-1, ::-1]
            spectra_flip.append(np.fft.fft2(buf))
        self._spectra = spectra
        self._spectra_flip = spectra_flip

    def _crop(self, a: np.ndarray) -> np.ndarray:
        h, w = self.shape
        return a[self._lo : self._lo + h, self._lo : self._lo + w]

    def _fft(self, data: np.ndarray) -> np.ndarray:
        buf = np.zeros(self._pad, dtype=np.complex128)
        buf[: data.shape[0], : data.shape[1]] = data
        return np.fft.fft2(buf)

    def amplitudes(self, mask_data: np.ndarray) -> np.ndarray:
        """Coherent amplitudes A_k = M (*) h_k, shape (K, H, W)."""
        fm = self._fft(mask_data)
        out = np.empty((self.kernels.count,) + self.shape, dtype=np.complex128)
        for k, spec in enumerate(self._spectra):
            out[k] = self._crop(np.fft.ifft2(fm * spec))
        return out

    def intensity(self, mask_data: np.ndarray) -> np.ndarray:
        amps = self.amplitudes(mask_data)
        i = np.einsum("k,kij->ij", self.kernels.weights, np.abs(amps) ** 2)
        return np.maximum(i, 0.0)

    def correlate_flip(self, fields: np.ndarray) -> np.ndarray:
        """Per-kernel cross-correlation sum_x h_k(x - u) G_k(x), shape (K, H, W)."""
        out = np.empty_like(fields)
        for k, spec in enumerate(self._spectra_flip):
            out[k] = self._crop(np.fft.ifft2(self._fft(fields[k]) * spec))
        return out


def aerial_image(mask: ScalarField, kernels: KernelSet) -> ScalarField:
    """Partially coherent aerial image of a mask (values clamped to >= 0)."""
    if mask.pixel_size != kernels.pixel_size:
        raise ValueError(
            f"mask pixel size {mask.pixel_size} does not match kernel "
            f"pixel size {kernels.pixel_size}"
        )
    if mask.data.min() < 0 or mask.data.max() > 1:
        raise ValueError("mask values must lie in [0, 1]")
    conv = KernelConvolver(kernels, mask.shape)
    return mask.with_data(conv.intensity(mask.data))


def resist_step(intensity: ScalarField, resist: ResistParams) -> ScalarField:
    """Hard-threshold resist: 1 where I >= I_th / (1 + t_q)."""
    if intensity.data.min() < 0:
        raise ValueError("intensity must be non-negative")
    z = (intensity.data >= resist.effective_threshold).astype(np.float64)
    return intensity.with_data(z)


def resist_sigmoid(intensity: ScalarField, resist: ResistParams) -> ScalarField:
    """Differentiable resist relaxation, values in (0, 1)."""
    if intensity.data.min() < 0:
        raise ValueError("intensity must be non-negative")
    arg = -resist.steepness * (intensity.data - resist.effective_threshold)
    z = 1.0 / (1.0 + np.exp(np.clip(arg, -700.0, 700.0)))
    return intensity.with_data(z)
