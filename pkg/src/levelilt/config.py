"""Run configuration: typed view over the flat key=value config format.

Every run is fully determined by a RunConfig; the same config and seed
reproduce identical artifacts byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ilt import IltConfig
from .lithosim import OpticsParams, ResistParams


class ConfigError(ValueError):
    """Invalid or malformed configuration; the message names the key."""


_MISSING = object()


class _Reader:
    def __init__(self, values: dict[str, str]):
        self.values = dict(values)
        self.used: set[str] = set()

    def _get(self, key: str, default):
        self.used.add(key)
        if key in self.values:
            return self.values[key]
        if default is _MISSING:
            raise ConfigError(f"missing required config key '{key}'")
        return default

    def get_float(self, key: str, default=_MISSING) -> float:
        raw = self._get(key, default)
        if isinstance(raw, (int, float)):
            return float(raw)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config key '{key}': expected a number, got '{raw}'") from None

    def get_int(self, key: str, default=_MISSING) -> int:
        raw = self._get(key, default)
        if isinstance(raw, int):
            return raw
        try:
            return int(str(raw), 10)
        except ValueError:
            raise ConfigError(f"config key '{key}': expected an integer, got '{raw}'") from None

    def get_bool(self, key: str, default=_MISSING) -> bool:
        raw = self._get(key, default)
        if isinstance(raw, bool):
            return raw
        lowered = str(raw).strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"config key '{key}': expected true/false, got '{raw}'")

    def get_str(self, key: str, default=_MISSING) -> str:
        return str(self._get(key, default))

    def get_floats(self, key: str, default=_MISSING) -> tuple[float, ...]:
        raw = self._get(key, default)
        if not isinstance(raw, str):
            return tuple(float(v) for v in raw)
        try:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"config key '{key}': expected numbers, got '{raw}'") from None

    def reject_unknown(self) -> None:
        unknown = set(self.values) - self.used
        if unknown:
            raise ConfigError(f"unknown config key '{sorted(unknown)[0]}'")


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run or a service session needs."""

    width: int = 512
    height: int = 512
    pixel_size: float = 12.0
    optics: OpticsParams = field(default_factory=OpticsParams)
    resist: ResistParams = field(default_factory=ResistParams)
    kernel_count: int = 24
    ilt_kernel_count: int = 9
    ilt: IltConfig = field(default_factory=IltConfig)
    pv: bool = False
    seed: int = 42
    layout_count: int = 20
    min_cd: float = 80.0
    max_rects: int = 8
    pw_pass_ede_nm: float = 8.0
    pw_defocus: tuple[float, ...] = (-100.0, -50.0, 0.0, 50.0, 100.0)
    pw_dose_step: float = 0.02
    pw_dose_max: float = 0.1
    kernels_dir: str = "kernels"

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ConfigError("grid.width and grid.height must be at least 8")
        if not self.pixel_size > 0:
            raise ConfigError("grid.pixel_size must be positive")
        if self.kernel_count < 1 or self.ilt_kernel_count < 1:
            raise ConfigError("kernel counts must be >= 1")

    def pw_dose_grid(self) -> tuple[float, ...]:
        n = int(round(self.pw_dose_max / self.pw_dose_step))
        return tuple(i * self.pw_dose_step for i in range(-n, n + 1))

    def ilt_defocus_values(self) -> tuple[float, ...]:
        return self.ilt.defocus_values()

    def all_defocus_values(self) -> tuple[float, ...]:
        """Every defocus any subcommand may need kernels for."""
        seen: dict[float, None] = {}
        for h in self.ilt_defocus_values() + tuple(self.pw_defocus):
            seen.setdefault(h)
        return tuple(seen)


def build_run_config(values: dict[str, str]) -> RunConfig:
    """Typed RunConfig from flat config values; raises ConfigError naming the
    offending key on any problem."""
    r = _Reader(values)
    width = r.get_int("grid.width", 512)
    height = r.get_int("grid.height", 512)
    pixel_size = r.get_float("grid.pixel_size", 12.0)

    try:
        optics = OpticsParams(
            wavelength=r.get_float("optics.wavelength", 193.0),
            numerical_aperture=r.get_float("optics.na", 1.35),
            partial_coherence_sigma=r.get_float("optics.sigma", 0.3),
            kernel_size=r.get_int("optics.kernel_size", 35),
            pixel_size=pixel_size,
        )
    except ValueError as e:
        raise ConfigError(f"optics.*: {e}") from None

    try:
        resist = ResistParams(
            threshold=r.get_float("resist.threshold", 0.225),
            steepness=r.get_float("resist.steepness", 50.0),
        )
    except ValueError as e:
        raise ConfigError(f"resist.*: {e}") from None

    pv = r.get_bool("ilt.pv", False)
    ilt_kwargs = dict(
        gamma=r.get_float("ilt.gamma", 2.0),
        theta_z=resist.steepness,
        i_th=resist.threshold,
        lambda_tv=r.get_float("ilt.lambda_tv", 0.01),
        alpha=r.get_float("ilt.alpha", 0.008),
        dt=r.get_float("ilt.dt", 0.5),
        max_iters=r.get_int("ilt.max_iters", 100),
        reinit_every=r.get_int("ilt.reinit_every", 20),
        sigma_h=r.get_float("ilt.sigma_h", 80.0),
        sigma_q=r.get_float("ilt.sigma_q", 0.1),
    )
    try:
        ilt = IltConfig.process_variation(**ilt_kwargs) if pv else IltConfig(**ilt_kwargs)
    except ValueError as e:
        raise ConfigError(f"ilt.*: {e}") from None

    cfg = RunConfig(
        width=width,
        height=height,
        pixel_size=pixel_size,
        optics=optics,
        resist=resist,
        kernel_count=r.get_int("kernels.count", 24),
        ilt_kernel_count=r.get_int("ilt.kernel_count", 9),
        ilt=ilt,
        pv=pv,
        seed=r.get_int("seed", 42),
        layout_count=r.get_int("layouts.count", 20),
        min_cd=r.get_float("layouts.min_cd", 80.0),
        max_rects=r.get_int("layouts.max_rects", 8),
        pw_pass_ede_nm=r.get_float("pw.pass_ede_nm", 8.0),
        pw_defocus=r.get_floats("pw.defocus", (-100.0, -50.0, 0.0, 50.0, 100.0)),
        pw_dose_step=r.get_float("pw.dose_step", 0.02),
        pw_dose_max=r.get_float("pw.dose_max", 0.1),
        kernels_dir=r.get_str("paths.kernels_dir", "kernels"),
    )
    r.reject_unknown()
    return cfg


def load_run_config(path: str | None, overrides: dict[str, str] | None = None) -> RunConfig:
    from .errors import FieldFormatError
    from .fileio import read_config_file

    values: dict[str, str] = {}
    if path is not None:
        try:
            values.update(read_config_file(path))
        except FieldFormatError as e:
            raise ConfigError(str(e)) from None
    if overrides:
        values.update(overrides)
    return build_run_config(values)


def config_from_text(text: str, overrides: dict[str, str] | None = None) -> RunConfig:
    from .errors import FieldFormatError
    from .fileio import parse_config_text

    try:
        values = parse_config_text(text)
    except FieldFormatError as e:
        raise ConfigError(str(e)) from None
    if overrides:
        values.update(overrides)
    return build_run_config(values)
