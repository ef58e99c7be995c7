"""Detection-support toolkit: Focal-EIoU loss, GAM, SPPCSPC, evaluation and augmentation."""
from ._accel import backend
from .boxgeom import BBox, LossConfig, LossOutput, eiou_loss, enclosing_box, focal_eiou_loss, iou
from .errors import ConfigError, DomainError, FormatError, LabelParseError, LinekitError, ShapeError

__version__ = "0.1.0"

__all__ = [
    "BBox", "LossConfig", "LossOutput", "iou", "enclosing_box", "eiou_loss", "focal_eiou_loss",
    "LinekitError", "DomainError", "ShapeError", "ConfigError", "FormatError", "LabelParseError",
    "backend",
]
