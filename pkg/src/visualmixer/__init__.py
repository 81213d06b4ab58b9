"""Window-level pixel shuffling with VFE-calibrated window sizes."""

from .imagecore import ImageTensor, Region, load_image, save_image
from .vfe import image_vfe, multichannel_vfe, region_vfe, vfe_report
from .calibration import calibrate, estimate_alpha0, lower_bound_ws, upper_bound_ws
from .mixer import MixKey, ShufflePlan, invert_image, obfuscate_dataset, obfuscate_image, plan_image
from .stadam import StAdamParams, adam_step, st_adam_step
from .attack import min_vfe_attack, search_space

__version__ = "0.1.0"

__all__ = [
    "ImageTensor", "Region", "load_image", "save_image",
    "image_vfe", "multichannel_vfe", "region_vfe", "vfe_report",
    "calibrate", "estimate_alpha0", "lower_bound_ws", "upper_bound_ws",
    "MixKey", "ShufflePlan", "invert_image", "obfuscate_dataset", "obfuscate_image", "plan_image",
    "StAdamParams", "adam_step", "st_adam_step",
    "min_vfe_attack", "search_space",
]
