"""Measure vectorization by quantization of the mean measure.

Typical use::

    from atol import QuantizerConfig, calibrate
    vmap = calibrate(measures, QuantizerConfig(budget=16, seed=0))
    features = vmap.transform_batch(measures)
"""
from ._backend import backend_name
from .measures import (MeasureCollection, MeasureFormatError, PointMeasure, empirical_mean_support,
                       integrate, load_measures, save_measures)
from .quantize import (Codebook, QuantizerConfig, distortion, fit, lloyd_fit, macqueen_fit,
                       voronoi_assign)
from .vectorize import (ContrastFamily, MultiChannelMap, VectorizationMap, calibrate,
                        compute_sigmas, transform_multi)

__all__ = [
    "Codebook", "ContrastFamily", "MeasureCollection", "MeasureFormatError", "MultiChannelMap",
    "PointMeasure", "QuantizerConfig", "VectorizationMap", "backend_name", "calibrate",
    "compute_sigmas", "distortion", "empirical_mean_support", "fit", "integrate", "lloyd_fit",
    "load_measures", "macqueen_fit", "save_measures", "transform_multi", "voronoi_assign",
]
