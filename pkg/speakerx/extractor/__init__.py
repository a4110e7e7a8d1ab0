from .inference import extract
from .loss import mtsal_loss, psm_target
from .network import ExtractorModel, forward, init_model, load_model, save_model
from .training import backward, train

__all__ = [
    "ExtractorModel",
    "backward",
    "extract",
    "forward",
    "init_model",
    "load_model",
    "mtsal_loss",
    "psm_target",
    "save_model",
    "train",
]
