"""scikit-learn compatible wrappers around the pipeline.

``IrisEncoder`` turns eye images into packed ``(code, mask)`` rows and
``IrisMatcher`` is a nearest-template classifier with a reject option, so
the two compose in an ``sklearn.pipeline.Pipeline``.
"""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .encoding import AMPLITUDE_FLOOR, DEFAULT_BANK, DEFAULT_KERNEL_SIZE, IrisTemplate, encode
from .errors import DimensionError, IncomparableError, ParameterError
from .imgcore import check_gray_image
from .matching import DEFAULT_MAX_SHIFT, DEFAULT_THRESHOLD, MIN_EVIDENCE, MatchScore, decide, match
from .normalization import unwrap
from .segmentation import SegmentationConfig, segment


def check_images(X):
    """Validate a batch of grayscale images: a 3D array or a sequence of 2D
    arrays, all in [0, 1]."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        raise DimensionError("expected a batch of images; wrap a single image in a list")
    images = [check_gray_image(x, min_size=5, name=f"X[{i}]") for i, x in enumerate(X)]
    if not images:
        raise ParameterError("empty batch")
    return images


def templates_to_array(templates):
    """Stack templates into an ``(n, 2, L)`` uint8 array of code and mask rows."""
    return np.stack([np.stack([t.code, t.mask]) for t in templates]).astype(np.uint8)


def check_templates(X, shape):
    """Accept IrisTemplate objects or ``(n, 2, L)`` arrays; return templates.

    ``shape`` is ``(radial_res, angular_res, n_filters)`` used to rebuild
    templates from raw arrays.
    """
    if len(X) and isinstance(X[0], IrisTemplate):
        return list(X)
    arr = np.asarray(X)
    r, t, f = shape
    n_bits = 2 * r * t * f
    if arr.ndim != 3 or arr.shape[1] != 2 or arr.shape[2] != n_bits:
        raise DimensionError(f"expected (n, 2, {n_bits}) template rows, got {arr.shape}")
    return [IrisTemplate(r, t, f, row[0], row[1]) for row in arr]


class IrisEncoder(TransformerMixin, BaseEstimator):
    """Segment, unwrap and Gabor-encode eye images.

    Parameters
    ----------
    radial_res, angular_res : int
        Polar grid size.
    bank : tuple of GaborParams
        Filter bank.
    kernel_size : int
        Odd Gabor kernel width.
    amplitude_floor : float
        Responses weaker than this are masked.
    segmentation : dict or None
        Overrides for :class:`SegmentationConfig`.
    """

    def __init__(self, radial_res=24, angular_res=240, bank=DEFAULT_BANK,
                 kernel_size=DEFAULT_KERNEL_SIZE, amplitude_floor=AMPLITUDE_FLOOR,
                 segmentation=None):
        self.radial_res = radial_res
        self.angular_res = angular_res
        self.bank = bank
        self.kernel_size = kernel_size
        self.amplitude_floor = amplitude_floor
        self.segmentation = segmentation

    def fit(self, X, y=None):
        check_images(X)
        if not self.bank:
            raise ParameterError("bank must not be empty")
        self.segmentation_config_ = SegmentationConfig.from_dict(self.segmentation or {})
        self.template_shape_ = (self.radial_res, self.angular_res, len(self.bank))
        return self

    def encode_images(self, X):
        """List of :class:`IrisTemplate`, one per image."""
        check_is_fitted(self, "segmentation_config_")
        out = []
        for img in check_images(X):
            seg = segment(img, self.segmentation_config_)
            polar = unwrap(img, seg, self.radial_res, self.angular_res)
            out.append(encode(polar, self.bank, self.kernel_size, self.amplitude_floor))
        return out

    def transform(self, X):
        return templates_to_array(self.encode_images(X))


class IrisMatcher(ClassifierMixin, BaseEstimator):
    """Nearest-template identification with a distance threshold.

    ``predict`` returns the label of the closest gallery template when the
    match would be accepted, otherwise ``reject_label``.
    """

    def __init__(self, threshold=DEFAULT_THRESHOLD, max_shift=DEFAULT_MAX_SHIFT,
                 min_evidence=MIN_EVIDENCE, reject_label=-1, template_shape=(24, 240, 1)):
        self.threshold = threshold
        self.max_shift = max_shift
        self.min_evidence = min_evidence
        self.reject_label = reject_label
        self.template_shape = template_shape

    def fit(self, X, y):
        templates = check_templates(X, self.template_shape)
        y = np.asarray(y)
        if y.shape != (len(templates),):
            raise DimensionError("y must have one label per template")
        self.gallery_ = templates
        self.gallery_labels_ = y
        self.classes_ = np.unique(y)
        return self

    def _distances(self, X):
        check_is_fitted(self, "gallery_")
        probes = check_templates(X, self.template_shape)
        d = np.full((len(probes), len(self.gallery_)), np.nan)
        n_valid = np.zeros_like(d)
        for i, p in enumerate(probes):
            for j, g in enumerate(self.gallery_):
                try:
                    s = match(g, p, self.max_shift)
                except IncomparableError:
                    continue
                d[i, j], n_valid[i, j] = s.hd, s.valid_bits
        return probes, d, n_valid

    def decision_function(self, X):
        """``1 - distance`` to the nearest template of each class, columns
        ordered as ``classes_``."""
        _, d, _ = self._distances(X)
        out = np.zeros((d.shape[0], self.classes_.size))
        for c, label in enumerate(self.classes_):
            cols = d[:, self.gallery_labels_ == label]
            out[:, c] = 1.0 - np.min(np.where(np.isnan(cols), 1.0, cols), axis=1)
        return out

    def predict(self, X):
        probes, d, n_valid = self._distances(X)
        labels = []
        for i, p in enumerate(probes):
            row = np.where(np.isnan(d[i]), np.inf, d[i])
            j = int(np.argmin(row))
            if not np.isfinite(row[j]):
                labels.append(self.reject_label)
                continue
            score = MatchScore(row[j], 0, int(n_valid[i, j]))
            ok = decide(score, self.threshold, len(p), self.min_evidence) == "accept"
            labels.append(self.gallery_labels_[j] if ok else self.reject_label)
        out = np.asarray(labels)
        if out.dtype != self.gallery_labels_.dtype:
            # a reject label of another type must not be coerced, e.g. -1 to "-1"
            out = np.asarray(labels, dtype=object)
        return out
