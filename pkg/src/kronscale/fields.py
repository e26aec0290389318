"""Exact field arithmetic over prime fields and GF(2^w), plus seeded randomness.

Field elements are plain canonical ints (residue mod p, or a w-bit
polynomial bitmask); all operations go through a Field object so values
serialize bit-exactly.  The random generator is SplitMix64, a fixed,
versioned, splittable generator: identical seeds give identical streams
on every platform.
"""

from __future__ import annotations

from .errors import DivisionByZero, FieldMismatch, FieldTooSmall, ParseError

# Largest prime below 2^61 (Mersenne M61); leaves headroom for 128-bit
# intermediate products in Python ints and for int64 hosts downstream.
DEFAULT_PRIME = (1 << 61) - 1

# Low part of the fixed reduction polynomial x^w + low per width, from the
# standard table of low-weight irreducible binary polynomials.
REDUCTION_POLY_LOW = {
    8: 0x1B,    # x^8 + x^4 + x^3 + x + 1
    16: 0x2B,   # x^16 + x^5 + x^3 + x + 1
    32: 0x8D,   # x^32 + x^7 + x^3 + x^2 + 1
    64: 0x1B,   # x^64 + x^4 + x^3 + x + 1
}

_MASK64 = (1 << 64) - 1


def _is_probable_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class Rng:
    """SplitMix64: 64-bit seeded splittable generator (version 1)."""

    __slots__ = ("state",)

    GOLDEN = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + self.GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def split(self) -> "Rng":
        """Child generator with an independent stream; parent advances once."""
        return Rng(self.next_u64())

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        bits = (n - 1).bit_length()
        while True:
            v = self.next_u64() >> (64 - bits) if bits else 0
            if v < n:
                return v

    def randrange(self, lo: int, hi: int) -> int:
        return lo + self.below(hi - lo)

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def shuffle(self, seq: list) -> None:
        for i in range(len(seq) - 1, 0, -1):
            j = self.below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def sample(self, seq, k: int) -> list:
        pool = list(seq)
        self.shuffle(pool)
        return pool[:k]


class Field:
    """Common interface; concrete fields below."""

    kind = None

    def spec_string(self) -> str:
        raise NotImplementedError

    def __repr__(self):
        return f"<Field {self.spec_string()}>"

    def __eq__(self, other):
        return isinstance(other, Field) and self.spec_string() == other.spec_string()

    def __hash__(self):
        return hash(self.spec_string())


class PrimeField(Field):
    """Z_p for a prime p < 2^62; elements are ints in [0, p)."""

    kind = "prime"

    def __init__(self, p: int = DEFAULT_PRIME):
        if p >= (1 << 62) or not _is_probable_prime(p):
            raise ValueError(f"modulus must be a prime < 2^62, got {p}")
        self.p = p
        self.characteristic = p
        self.order = p
        self.zero = 0
        self.one = 1 % p

    def spec_string(self):
        return f"p={self.p}"

    def add(self, a, b):
        s = a + b
        p = self.p
        return s - p if s >= p else s

    def sub(self, a, b):
        d = a - b
        return d + self.p if d < 0 else d

    def neg(self, a):
        return self.p - a if a else 0

    def mul(self, a, b):
        return a * b % self.p

    def inv(self, a):
        if a == 0:
            raise DivisionByZero("inverse of zero")
        return pow(a, self.p - 2, self.p)

    def pow(self, a, e):
        if e < 0:
            return pow(self.inv(a), -e, self.p)
        return pow(a, e, self.p)

    def from_int(self, n: int):
        return n % self.p

    def random(self, rng: Rng, nonzero: bool = False):
        while True:
            v = rng.below(self.p)
            if v or not nonzero:
                return v

    def format_value(self, v):
        return str(v)

    def parse_value(self, s):
        v = int(s, 0)
        if not 0 <= v < self.p:
            raise ValueError(f"value {s} not reduced mod {self.p}")
        return v


def _clmul(a: int, b: int) -> int:
    r = 0
    while b:
        lsb = b & -b
        r ^= a * lsb
        b ^= lsb
    return r


class GF2Field(Field):
    """GF(2^w) for w in {8, 16, 32, 64} with a fixed reduction polynomial.

    Elements are w-bit ints.  Widths <= 16 use log/exp tables; width 32
    uses 8x8 carryless chunk tables; width 64 reduces directly.
    """

    kind = "gf2"

    def __init__(self, w: int):
        if w not in REDUCTION_POLY_LOW:
            raise ValueError(f"unsupported GF(2^w) width {w}")
        self.w = w
        self.poly_low = REDUCTION_POLY_LOW[w]
        self.poly = (1 << w) | self.poly_low
        self.mask = (1 << w) - 1
        self.characteristic = 2
        self.order = 1 << w
        self.zero = 0
        self.one = 1
        self._log = None
        self._exp = None
        self._cl8 = None
        if w <= 16:
            self._build_log_tables()
        elif w == 32:
            self._build_chunk_tables()

    def spec_string(self):
        return f"gf2 w={self.w}"

    def _reduce(self, x: int) -> int:
        w = self.w
        low = self.poly_low
        while x >> w:
            hi = x >> w
            x = (x & self.mask) ^ _clmul(hi, low)
        return x

    def _mul_slow(self, a, b):
        return self._reduce(_clmul(a, b))

    def _pow_slow(self, a, e):
        r = 1
        while e:
            if e & 1:
                r = self._mul_slow(r, a)
            a = self._mul_slow(a, a)
            e >>= 1
        return r

    def _find_generator(self):
        order = self.order - 1
        factors = []
        n = order
        d = 3
        while d * d <= n:
            if n % d == 0:
                factors.append(d)
                while n % d == 0:
                    n //= d
            d += 2
        if n > 1:
            factors.append(n)
        g = 2
        while True:
            if all(self._pow_slow(g, order // f) != 1 for f in factors):
                return g
            g += 1

    def _build_log_tables(self):
        order = self.order - 1
        gen = self._find_generator()
        exp = [0] * (2 * order)
        log = [0] * self.order
        x = 1
        for i in range(order):
            exp[i] = x
            exp[i + order] = x
            log[x] = i
            x = self._mul_slow(x, gen)
        assert x == 1
        self._exp = exp
        self._log = log

    def _build_chunk_tables(self):
        # cl8[a][b] = carryless 8x8 product (16 bits), for 32-bit multiply
        cl8 = []
        for a in range(256):
            row = [0] * 256
            for bit in range(8):
                if a >> bit & 1:
                    for b in range(256):
                        row[b] ^= b << bit
            cl8.append(row)
        self._cl8 = cl8

    def add(self, a, b):
        return a ^ b

    sub = add

    def neg(self, a):
        return a

    def mul(self, a, b):
        if self._log is not None:
            if a == 0 or b == 0:
                return 0
            return self._exp[self._log[a] + self._log[b]]
        if self._cl8 is not None:
            cl8 = self._cl8
            r = 0
            aa = a
            sh = 0
            while aa:
                row = cl8[aa & 0xFF]
                r ^= (row[b & 0xFF] ^ (row[(b >> 8) & 0xFF] << 8)
                      ^ (row[(b >> 16) & 0xFF] << 16) ^ (row[b >> 24] << 24)) << sh
                aa >>= 8
                sh += 8
            return self._reduce(r)
        return self._mul_slow(a, b)

    def inv(self, a):
        if a == 0:
            raise DivisionByZero("inverse of zero")
        if self._log is not None:
            return self._exp[self.order - 1 - self._log[a]]
        return self.pow(a, self.order - 2)

    def pow(self, a, e):
        if e < 0:
            a = self.inv(a)
            e = -e
        r = 1
        base = a
        while e:
            if e & 1:
                r = self.mul(r, base)
            base = self.mul(base, base)
            e >>= 1
        return r

    def from_int(self, n: int):
        return n & self.mask

    def random(self, rng: Rng, nonzero: bool = False):
        while True:
            v = rng.next_u64() & self.mask
            if v or not nonzero:
                return v

    def format_value(self, v):
        return f"0x{v:x}"

    def parse_value(self, s):
        v = int(s, 0)
        if v >> self.w:
            raise ValueError(f"value {s} wider than {self.w} bits")
        return v


_FIELD_CACHE: dict[str, Field] = {}


def parse_field_spec(spec: str) -> Field:
    """Parse the field spec grammar: ``p=<prime>`` or ``gf2 w=<8|16|32|64>``."""
    key = " ".join(spec.split())
    cached = _FIELD_CACHE.get(key)
    if cached is not None:
        return cached
    try:
        if key.startswith("p="):
            field = PrimeField(int(key[2:]))
        elif key.startswith("gf2 w="):
            field = GF2Field(int(key[6:]))
        else:
            raise ValueError(f"unrecognized field spec {spec!r}")
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    _FIELD_CACHE[key] = field
    return field


def prime_field(p: int = DEFAULT_PRIME) -> PrimeField:
    """Cached Z_p constructor."""
    return parse_field_spec(f"p={p}")


def gf2(w: int) -> GF2Field:
    """Cached GF(2^w) constructor (table builds are shared)."""
    return parse_field_spec(f"gf2 w={w}")


def field_arith(field: Field, op: str, a: int, b: int | None = None) -> int:
    """Single-operation entry point: op in {add, sub, mul, inv, pow}."""
    if op == "add":
        return field.add(a, b)
    if op == "sub":
        return field.sub(a, b)
    if op == "mul":
        return field.mul(a, b)
    if op == "inv":
        return field.inv(a)
    if op == "pow":
        return field.pow(a, b)
    raise ValueError(f"unknown field op {op!r}")


def random_element(field: Field, rng: Rng, nonzero: bool = False) -> int:
    if nonzero and field.order < 2:
        raise FieldTooSmall("nonzero draw needs |F| >= 2")
    return field.random(rng, nonzero=nonzero)
