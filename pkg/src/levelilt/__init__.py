"""Level-set inverse lithography toolkit."""

from .fields import LevelSet, ScalarField
from .lithosim import KernelSet, OpticsParams, ResistParams
from .ilt import IltConfig, OptResult, ProcessCondition
from .analysis import EdeReport, PwCurve
from .layouts import LayoutSpec
from .session import Session

__version__ = "0.1.0"

__all__ = [
    "EdeReport",
    "IltConfig",
    "KernelSet",
    "LayoutSpec",
    "LevelSet",
    "OpticsParams",
    "OptResult",
    "ProcessCondition",
    "PwCurve",
    "ResistParams",
    "ScalarField",
    "Session",
    "__version__",
]
