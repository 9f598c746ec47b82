"""Masked Hamming distance between iris templates, with rotation search."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, IncomparableError, ParameterError

DEFAULT_THRESHOLD = 0.35
DEFAULT_MAX_SHIFT = 10
MIN_EVIDENCE = 0.2


@dataclass(frozen=True)
class MatchScore:
    hd: float
    best_shift: int
    valid_bits: int

    def to_dict(self):
        return {"hd": float(self.hd), "best_shift": int(self.best_shift),
                "valid_bits": int(self.valid_bits)}


def _check_pair(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"template shapes differ: {a.shape} vs {b.shape}")


def _score(code_a, mask_a, code_b, mask_b):
    both = mask_a & mask_b
    n = int(np.count_nonzero(both))
    if n == 0:
        return None, 0
    diff = int(np.count_nonzero((code_a ^ code_b) & both))
    return diff / n, n


def hamming(a, b):
    """Fraction of disagreeing bits over the bits both masks trust."""
    _check_pair(a, b)
    hd, n = _score(a.code, a.mask, b.code, b.mask)
    if hd is None:
        raise IncomparableError("templates share no valid bits")
    return MatchScore(hd, 0, n)


def match(a, b, max_shift=DEFAULT_MAX_SHIFT):
    """Minimum masked Hamming distance over cyclic angular shifts of ``b``.

    ``best_shift = s`` means ``a`` lines up with ``b`` rotated by ``-s``
    columns, i.e. ``b`` is ``a`` shifted by ``+s``. Ties prefer the smaller
    ``|s|`` and then the negative shift.
    """
    _check_pair(a, b)
    max_shift = int(max_shift)
    if max_shift < 0 or 2 * max_shift >= a.angular_res:
        raise ParameterError(f"max_shift must be in [0, {(a.angular_res - 1) // 2}]")
    step = a.column_bits
    best = None
    for s in sorted(range(-max_shift, max_shift + 1), key=lambda v: (abs(v), v >= 0)):
        hd, n = _score(a.code, a.mask, np.roll(b.code, -s * step), np.roll(b.mask, -s * step))
        if hd is not None and (best is None or hd < best.hd):
            best = MatchScore(hd, s, n)
    if best is None:
        raise IncomparableError("templates share no valid bits at any shift")
    return best


def decide(score, threshold=DEFAULT_THRESHOLD, template_len=None, min_evidence=MIN_EVIDENCE):
    """``"accept"`` iff the distance is within ``threshold`` and enough bits
    were compared (at least ``min_evidence`` of ``template_len``)."""
    if template_len is not None and score.valid_bits < min_evidence * template_len:
        return "reject"
    return "accept" if score.hd <= threshold else "reject"


def pairwise_distances(templates, max_shift=DEFAULT_MAX_SHIFT):
    """Symmetric matrix of shifted-min distances; NaN where incomparable."""
    n = len(templates)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            try:
                out[i, j] = out[j, i] = match(templates[i], templates[j], max_shift).hd
            except IncomparableError:
                out[i, j] = out[j, i] = np.nan
    return out


def score_pairs(labels, templates, max_shift=DEFAULT_MAX_SHIFT):
    """Shifted-min distances of every unordered pair, split into
    ``(genuine, impostor)`` by label equality."""
    if len(labels) != len(templates):
        raise ParameterError("labels and templates differ in length")
    genuine, impostor = [], []
    for i in range(len(templates)):
        for j in range(i + 1, len(templates)):
            hd = match(templates[i], templates[j], max_shift).hd
            (genuine if labels[i] == labels[j] else impostor).append(hd)
    return np.asarray(genuine), np.asarray(impostor)


def error_rates(genuine, impostor, thresholds):
    """False accept and false reject rates at each threshold.

    A pair is accepted when its distance is ``<= threshold``.
    """
    genuine = np.sort(np.asarray(genuine, dtype=np.float64))
    impostor = np.sort(np.asarray(impostor, dtype=np.float64))
    if genuine.size == 0 or impostor.size == 0:
        raise ParameterError("need both genuine and impostor scores")
    thresholds = np.asarray(thresholds, dtype=np.float64)
    far = np.searchsorted(impostor, thresholds, side="right") / impostor.size
    frr = 1.0 - np.searchsorted(genuine, thresholds, side="right") / genuine.size
    return far, frr
