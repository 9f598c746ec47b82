"""Arithmetic in GF(2^m) via exponent/logarithm tables."""
import numpy as np

from .errors import ParameterError

# primitive polynomials, bit i = coefficient of x^i
PRIMITIVE_POLY = {2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89, 8: 0x11D}


class GF2m:
    """The field with ``2**m`` elements, ``2 <= m <= 8``.

    Elements are ints in ``[0, 2**m)``; addition is XOR. ``alpha = 2`` is a
    primitive element. Multiplication of arrays goes through a full
    product table, which is small at these field sizes.
    """

    def __init__(self, m):
        if m not in PRIMITIVE_POLY:
            raise ParameterError(f"field degree m must be in 2..8, got {m}")
        self.m = m
        self.order = 1 << m
        self.poly = PRIMITIVE_POLY[m]
        q1 = self.order - 1
        exp = np.zeros(2 * q1, dtype=np.int64)
        log = np.full(self.order, -1, dtype=np.int64)
        x = 1
        for i in range(q1):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.order:
                x ^= self.poly
        exp[q1:] = exp[:q1]
        self.exp, self.log = exp, log
        a = np.arange(self.order)
        la, lb = np.meshgrid(log, log, indexing="ij")
        table = exp[(la + lb) % q1]
        table[(a[:, None] == 0) | (a[None, :] == 0)] = 0
        self.mul_table = table.astype(np.int64)
        inv = np.zeros(self.order, dtype=np.int64)
        inv[1:] = exp[(q1 - log[1:]) % q1]
        self.inv_table = inv

    def __repr__(self):
        return f"GF2m({self.m})"

    def __eq__(self, other):
        return isinstance(other, GF2m) and other.m == self.m

    def __hash__(self):
        return hash(("GF2m", self.m))

    def check(self, symbols):
        arr = np.asarray(symbols, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.order):
            raise ParameterError(f"symbol outside GF(2^{self.m})")
        return arr

    def mul(self, a, b):
        return self.mul_table[a, b]

    def inv(self, a):
        if np.any(np.asarray(a) == 0):
            raise ZeroDivisionError("zero has no inverse")
        return self.inv_table[a]

    def alpha_pow(self, i):
        return int(self.exp[i % (self.order - 1)])

    def poly_eval(self, coeffs, x):
        """Evaluate ``sum coeffs[i] x^i`` at every point of ``x`` (Horner)."""
        x = np.asarray(x, dtype=np.int64)
        acc = np.zeros(x.shape, dtype=np.int64)
        for c in reversed(list(coeffs)):
            acc = self.mul_table[acc, x] ^ int(c)
        return acc

    def poly_divmod(self, num, den):
        """Quotient and remainder of polynomials given low-order-first."""
        num = [int(c) for c in num]
        den = [int(c) for c in den]
        while den and den[-1] == 0:
            den.pop()
        if not den:
            raise ZeroDivisionError("division by the zero polynomial")
        lead_inv = int(self.inv_table[den[-1]])
        quot = [0] * max(len(num) - len(den) + 1, 0)
        rem = num[:]
        for i in range(len(quot) - 1, -1, -1):
            c = int(self.mul_table[rem[i + len(den) - 1], lead_inv])
            quot[i] = c
            if c:
                for j, d in enumerate(den):
                    rem[i + j] ^= int(self.mul_table[c, d])
        return quot, rem[:len(den) - 1]

    def nullspace_vector(self, matrix):
        """A nonzero ``v`` with ``matrix @ v = 0``, or None if the kernel is trivial."""
        a = np.array(matrix, dtype=np.int64, copy=True)
        rows, cols = a.shape
        pivots = []
        r = 0
        for c in range(cols):
            if r == rows:
                break
            nz = np.nonzero(a[r:, c])[0]
            if nz.size == 0:
                continue
            p = r + int(nz[0])
            if p != r:
                a[[r, p]] = a[[p, r]]
            a[r] = self.mul_table[a[r], self.inv_table[a[r, c]]]
            factors = a[:, c].copy()
            factors[r] = 0
            a ^= self.mul_table[factors[:, None], a[r][None, :]]
            pivots.append(c)
            r += 1
        free = [c for c in range(cols) if c not in set(pivots)]
        if not free:
            return None
        f = free[0]
        v = np.zeros(cols, dtype=np.int64)
        v[f] = 1
        for i, c in enumerate(pivots):
            v[c] = a[i, f]  # char 2: -x == x
        return v
