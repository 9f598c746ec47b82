"""Shared synthetic corpora, cached per test session."""
from functools import lru_cache

import numpy as np

from irisbind.config import Config, run_pipeline
from irisbind.synth import random_eye_spec, render, rerender_variant

SIZE = 160
COVERAGES = (0.0, 0.15, 0.3)


def textured_field(seed, shape=(64, 64)):
    """Smooth random texture with energy at every scale, values in [0, 1]."""
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(shape)
    spec = np.fft.fft2(white)
    fy = np.fft.fftfreq(shape[0])[:, None]
    fx = np.fft.fftfreq(shape[1])[None, :]
    spec /= (1.0 + 40.0 * np.hypot(fy, fx))
    field = np.fft.ifft2(spec).real
    field -= field.min()
    return field / field.max()


@lru_cache(maxsize=None)
def eye_spec(seed, coverage=0.0, noise=0.0):
    return random_eye_spec(seed, SIZE, SIZE, coverage, noise)


@lru_cache(maxsize=None)
def eye_image(seed, coverage=0.0, noise=0.0):
    return render(eye_spec(seed, coverage, noise), SIZE, SIZE)


@lru_cache(maxsize=None)
def variant_image(seed, coverage, noise, rotation, dilation, noise_seed):
    return rerender_variant(eye_spec(seed, coverage, noise), SIZE, SIZE, rotation, dilation,
                            noise_sigma=noise, noise_seed=noise_seed)


@lru_cache(maxsize=None)
def eye_template(seed, coverage=0.0, noise=0.0):
    return run_pipeline(eye_image(seed, coverage, noise), Config()).template


@lru_cache(maxsize=None)
def variant_template(seed, coverage, noise, rotation, dilation, noise_seed):
    img = variant_image(seed, coverage, noise, rotation, dilation, noise_seed)
    return run_pipeline(img, Config()).template


def genuine_variant(i):
    """Variant parameters for genuine pair ``i``: rotation within 7.5 deg,
    noise 0.03, mild dilation."""
    rotations = (-7.5, -4.5, -1.5, 3.0, 6.0, 7.5)
    return rotations[i % len(rotations)], 1.0 + 0.05 * (i % 3), i + 1
