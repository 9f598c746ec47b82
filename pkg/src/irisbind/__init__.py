"""Iris recognition with Gabor phase codes and fuzzy-commitment key binding.

Stages: :mod:`segmentation` (Canny + Hough circles and eyelid parabolas),
:mod:`normalization` (rubber-sheet unwrapping, phase-correlation
registration), :mod:`encoding` (Gabor phase bits), :mod:`matching`
(masked Hamming distance over rotations) and :mod:`keybind` (Hadamard and
Reed-Solomon codes XORed with the iris code). :mod:`synth` renders
synthetic eyes with known geometry.
"""
__version__ = "0.1.0"

from .config import Config, run_pipeline
from .encoding import GaborParams, IrisTemplate, encode, gabor_kernel, histogram
from .errors import IrisError
from .geometry import Circle, Parabola
from .keybind import Commitment, KeyScheme, lock, unlock
from .matching import MatchScore, decide, hamming, match
from .normalization import PolarIris, phase_correlate, register_similarity, unwrap
from .segmentation import SegmentationConfig, SegmentationResult, segment
from .synth import EyeSpec, render, rerender_variant

__all__ = [
    "Circle", "Commitment", "Config", "EyeSpec", "GaborParams", "IrisError", "IrisTemplate",
    "KeyScheme", "MatchScore", "Parabola", "PolarIris", "SegmentationConfig",
    "SegmentationResult", "decide", "encode", "gabor_kernel", "hamming", "histogram", "lock",
    "match", "phase_correlate", "register_similarity", "render", "rerender_variant",
    "run_pipeline", "segment", "unlock", "unwrap",
]
