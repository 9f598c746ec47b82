"""Key binding against noisy iris codes.

A key is split into GF(2^m) symbols, protected by a Reed-Solomon outer
code (whole-symbol errors, i.e. bursts) and a Hadamard inner code (scattered
bit flips within a block), then XORed with selected iris-code bits. Only a
SHA-256 digest of the key is kept, so a wrong candidate is never released.
"""
import hashlib
import hmac
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, KeyReleaseError, ParameterError
from .gf import GF2m
from .matching import match

COMMITMENT_MAGIC = b"IRC1"
DIGEST_SIZE = 32


# -- Hadamard inner code ----------------------------------------------------

def sylvester(order):
    """Sylvester Hadamard matrix of the given power-of-two order, entries +-1."""
    if order < 1 or order & (order - 1):
        raise ParameterError("Hadamard order must be a power of two")
    h = np.ones((1, 1), dtype=np.int64)
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    return h


class HadamardCode:
    """``2**k`` codewords of ``2**(k-1)`` bits: Sylvester rows, then their
    complements, with -1 written as 0."""

    def __init__(self, k):
        if k < 2:
            raise ParameterError("Hadamard k must be >= 2")
        self.k = k
        self.block_len = 1 << (k - 1)
        h = sylvester(self.block_len)
        self.signs = np.vstack([h, -h])
        self.matrix = (self.signs > 0).astype(np.uint8)

    def encode(self, message):
        """Block for a message given as an int or an MSB-first bit sequence."""
        value = _as_int(message, self.k)
        return self.matrix[value].copy()

    def decode(self, block, reliability=None):
        """Maximum-correlation decoding.

        Returns ``(message, confidence)`` with ``message`` an int and
        ``confidence`` the winning correlation over the block length. Ties
        go to the smallest row index. ``reliability`` optionally weights
        each received bit (0 erases it).
        """
        block = np.asarray(block)
        if block.shape != (self.block_len,):
            raise DimensionError(f"block must have {self.block_len} bits")
        soft = 2 * block.astype(np.int64) - 1
        if reliability is not None:
            soft = soft * np.asarray(reliability)
        scores = self.signs @ soft
        best = int(np.argmax(scores))
        return best, float(scores[best]) / self.block_len

    def decode_blocks(self, blocks, reliability=None):
        """Vectorized :meth:`decode` over rows of ``blocks``."""
        blocks = np.asarray(blocks).reshape(-1, self.block_len)
        soft = 2 * blocks.astype(np.int64) - 1
        if reliability is not None:
            soft = soft * np.asarray(reliability).reshape(soft.shape)
        scores = soft @ self.signs.T
        best = np.argmax(scores, axis=1)
        return best, scores[np.arange(len(best)), best] / self.block_len


def _as_int(message, k):
    if isinstance(message, (int, np.integer)):
        value = int(message)
    else:
        bits = [int(b) for b in message]
        if len(bits) > k or any(b not in (0, 1) for b in bits):
            raise ParameterError(f"message must be at most {k} bits")
        value = int("".join(map(str, bits)) or "0", 2)
    if not 0 <= value < (1 << k):
        raise ParameterError(f"message {value} does not fit in {k} bits")
    return value


def int_to_bits(value, width):
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


# -- Reed-Solomon outer code ------------------------------------------------

@dataclass(frozen=True)
class RSParams:
    """Evaluation-style RS code: ``n`` points ``0, 1, a, a^2, ...`` of GF(2^m)."""

    m: int
    n: int
    k: int

    def __post_init__(self):
        if not 0 < self.k < self.n <= (1 << self.m):
            raise ParameterError(f"need 0 < k < n <= 2^m, got k={self.k} n={self.n} m={self.m}")

    @property
    def field(self):
        return _field(self.m)

    @property
    def t(self):
        return (self.n - self.k) // 2

    @property
    def points(self):
        f = self.field
        return np.array([0] + [f.alpha_pow(i) for i in range(self.n - 1)], dtype=np.int64)


_FIELDS = {}


def _field(m):
    if m not in _FIELDS:
        _FIELDS[m] = GF2m(m)
    return _FIELDS[m]


def rs_encode(message, p):
    """Evaluate the message polynomial (``message[0]`` is the constant term)
    at every evaluation point."""
    msg = p.field.check(message)
    if msg.shape != (p.k,):
        raise DimensionError(f"message must have {p.k} symbols")
    return p.field.poly_eval(msg, p.points)


def rs_decode(received, p):
    """Berlekamp-Welch decoding.

    Returns ``(message, corrected)`` or None when more than ``t`` symbol
    errors are detected. Solves ``Q(x_i) = r_i E(x_i)`` with ``deg E <= t``
    and ``deg Q < k + t``; the message polynomial is ``Q / E``, accepted
    only if it re-encodes within distance ``t`` of the input.
    """
    f = p.field
    r = f.check(received)
    if r.shape != (p.n,):
        raise DimensionError(f"received word must have {p.n} symbols")
    x = p.points
    # fast path: already a codeword
    coeffs = _interpolate(f, x[:p.k], r[:p.k])
    if np.array_equal(f.poly_eval(coeffs, x), r):
        return np.asarray(coeffs, dtype=np.int64), 0

    t = p.t
    nq = p.k + t
    powers = np.ones((p.n, max(nq, t + 1)), dtype=np.int64)
    for j in range(1, powers.shape[1]):
        powers[:, j] = f.mul(powers[:, j - 1], x)
    # unknowns: Q_0..Q_{nq-1}, E_0..E_t ; equation Q(x_i) + r_i E(x_i) = 0
    system = np.hstack([powers[:, :nq], f.mul(r[:, None], powers[:, :t + 1])])
    v = f.nullspace_vector(system)
    if v is None:
        return None
    q, e = v[:nq], v[nq:]
    if not e.any():
        return None
    quot, rem = f.poly_divmod(q, e)
    if any(rem) or any(quot[p.k:]):
        return None
    msg = np.asarray((quot + [0] * p.k)[:p.k], dtype=np.int64)
    corrected = int(np.count_nonzero(f.poly_eval(msg, x) != r))
    if corrected > t:
        return None
    return msg, corrected


def _interpolate(f, xs, ys):
    """Lagrange interpolation; coefficients low-order first."""
    k = len(xs)
    coeffs = np.zeros(k, dtype=np.int64)
    for i in range(k):
        basis = np.array([1], dtype=np.int64)
        denom = 1
        for j in range(k):
            if j == i:
                continue
            # multiply basis by (x - x_j) == (x + x_j)
            nxt = np.zeros(basis.size + 1, dtype=np.int64)
            nxt[1:] ^= basis
            nxt[:-1] ^= f.mul(basis, int(xs[j]))
            basis = nxt
            denom = int(f.mul(denom, int(xs[i]) ^ int(xs[j])))
        scale = int(f.mul(int(ys[i]), int(f.inv(denom))))
        coeffs ^= f.mul(basis, scale)
    return coeffs


# -- Fuzzy commitment -------------------------------------------------------

@dataclass(frozen=True)
class KeyScheme:
    """Concatenated code parameters: Hadamard ``k`` and RS ``(m, n, k_rs)``."""

    k: int = 6
    m: int = 6
    n: int = 32
    k_rs: int = 16

    def __post_init__(self):
        if self.k < self.m:
            raise ParameterError("Hadamard k must be >= symbol width m")
        RSParams(self.m, self.n, self.k_rs)

    @property
    def rs(self):
        return RSParams(self.m, self.n, self.k_rs)

    @property
    def hadamard(self):
        return _hadamard(self.k)

    @property
    def key_bits(self):
        return self.k_rs * self.m

    @property
    def codeword_bits(self):
        return self.n * (1 << (self.k - 1))

    def to_dict(self):
        return {"k": self.k, "m": self.m, "n": self.n, "k_rs": self.k_rs}


_HADAMARD = {}


def _hadamard(k):
    if k not in _HADAMARD:
        _HADAMARD[k] = HadamardCode(k)
    return _HADAMARD[k]


def key_digest(key_bits):
    return hashlib.sha256(np.packbits(np.asarray(key_bits, dtype=np.uint8)).tobytes()).digest()


def encode_key(key_bits, scheme):
    """Key bits -> RS symbols (``m`` bits each, MSB first) -> Hadamard blocks."""
    key = np.asarray(key_bits, dtype=np.uint8).ravel()
    if key.size != scheme.key_bits:
        raise ParameterError(f"key must be {scheme.key_bits} bits, got {key.size}")
    weights = 1 << np.arange(scheme.m - 1, -1, -1)
    symbols = key.reshape(scheme.k_rs, scheme.m) @ weights
    codeword = rs_encode(symbols, scheme.rs)
    return scheme.hadamard.matrix[codeword].ravel()


def decode_key(noisy, scheme, reliability=None):
    """Inverse of :func:`encode_key`; returns key bits or None."""
    symbols, _ = scheme.hadamard.decode_blocks(noisy, reliability)
    # rows beyond the symbol alphabet are just symbol errors to the outer code
    symbols = np.where(symbols >= (1 << scheme.m), 0, symbols)
    out = rs_decode(symbols, scheme.rs)
    if out is None:
        return None
    msg, _ = out
    return np.concatenate([int_to_bits(int(s), scheme.m) for s in msg])


@dataclass(frozen=True, eq=False)
class Commitment:
    scheme: KeyScheme
    selection: np.ndarray
    locked: np.ndarray
    digest: bytes

    def __post_init__(self):
        sel = np.asarray(self.selection, dtype=np.int64).ravel()
        locked = np.asarray(self.locked, dtype=np.uint8).ravel()
        if sel.size != self.scheme.codeword_bits or locked.size != self.scheme.codeword_bits:
            raise DimensionError("selection and locked bits must match the codeword length")
        if len(self.digest) != DIGEST_SIZE:
            raise FormatError("digest must be 32 bytes")
        object.__setattr__(self, "selection", sel)
        object.__setattr__(self, "locked", locked)

    def __eq__(self, other):
        if not isinstance(other, Commitment):
            return NotImplemented
        return (self.scheme == other.scheme and np.array_equal(self.selection, other.selection)
                and np.array_equal(self.locked, other.locked) and self.digest == other.digest)

    def to_bytes(self):
        s = self.scheme
        return b"".join([
            COMMITMENT_MAGIC,
            struct.pack("<IIII", s.k, s.m, s.n, s.k_rs),
            self.selection.astype("<u4").tobytes(),
            np.packbits(self.locked, bitorder="little").tobytes(),
            self.digest,
        ])

    @classmethod
    def from_bytes(cls, data):
        if len(data) < 20 or data[:4] != COMMITMENT_MAGIC:
            raise FormatError("not an IRC1 commitment")
        try:
            scheme = KeyScheme(*struct.unpack("<IIII", data[4:20]))
        except ParameterError as exc:
            raise FormatError(f"bad scheme parameters: {exc}") from exc
        nbits = scheme.codeword_bits
        nlocked = (nbits + 7) // 8
        expected = 20 + 4 * nbits + nlocked + DIGEST_SIZE
        if len(data) != expected:
            raise FormatError(f"IRC1 file is {len(data)} bytes, expected {expected}")
        pos = 20
        sel = np.frombuffer(data, dtype="<u4", count=nbits, offset=pos).astype(np.int64)
        pos += 4 * nbits
        locked = np.unpackbits(np.frombuffer(data, dtype=np.uint8, count=nlocked, offset=pos),
                               count=nbits, bitorder="little")
        pos += nlocked
        return cls(scheme, sel, locked, bytes(data[pos:pos + DIGEST_SIZE]))


def write_commitment(path, commitment):
    Path(path).write_bytes(commitment.to_bytes())


def read_commitment(path):
    return Commitment.from_bytes(Path(path).read_bytes())


def select_bits(template, count):
    """Indices of the first ``count`` trusted bits of ``template``."""
    idx = np.flatnonzero(template.mask)
    if idx.size < count:
        raise ParameterError(f"template has {idx.size} valid bits, scheme needs {count}")
    return idx[:count]


def lock(key_bits, template, scheme=KeyScheme()):
    """Bind ``key_bits`` to the enrollment ``template``."""
    codeword = encode_key(key_bits, scheme)
    sel = select_bits(template, scheme.codeword_bits)
    locked = codeword ^ template.code[sel]
    return Commitment(scheme, sel, locked, key_digest(key_bits))


def unlock(commitment, probe):
    """Recover the key from an aligned probe template.

    Probe bits that the probe's own mask distrusts are erased before inner
    decoding. Raises :class:`KeyReleaseError` with ``reason`` ``"decode"``
    when the outer code gives up and ``"digest"`` when the candidate key
    does not hash to the stored digest.
    """
    sel = commitment.selection
    if sel.size and sel.max() >= len(probe):
        raise DimensionError("probe template is shorter than the commitment selection")
    noisy = commitment.locked ^ probe.code[sel]
    key = decode_key(noisy, commitment.scheme, reliability=probe.mask[sel].astype(np.int64))
    if key is None:
        raise KeyReleaseError("error correction failed", reason="decode")
    if not hmac.compare_digest(key_digest(key), commitment.digest):
        raise KeyReleaseError("recovered key does not match the digest", reason="digest")
    return key


def align_probe(probe, reference, max_shift=10):
    """Rotate ``probe`` onto ``reference`` using the best matching shift."""
    score = match(reference, probe, max_shift)
    return probe.shifted(-score.best_shift), score
