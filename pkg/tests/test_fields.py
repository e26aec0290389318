import math

import pytest

from kronscale.errors import DivisionByZero, FieldTooSmall
from kronscale.fields import (
    DEFAULT_PRIME,
    REDUCTION_POLY_LOW,
    GF2Field,
    PrimeField,
    Rng,
    _clmul,
    field_arith,
    gf2,
    parse_field_spec,
    prime_field,
    random_element,
)


def _poly_divmod_gf2(a: int, b: int):
    # long division of binary polynomials
    q = 0
    db = b.bit_length()
    while a.bit_length() >= db:
        shift = a.bit_length() - db
        q ^= 1 << shift
        a ^= b << shift
    return q, a


def _poly_gcd_gf2(a: int, b: int) -> int:
    while b:
        a, b = b, _poly_divmod_gf2(a, b)[1]
    return a


def _ext_gcd(a: int, b: int):
    if b == 0:
        return a, 1, 0
    g, x, y = _ext_gcd(b, a % b)
    return g, y, x - (a // b) * y


def test_reduction_polys_are_irreducible():
    # f irreducible of degree w  <=>  x^(2^w) == x mod f and
    # gcd(x^(2^(w/p)) - x, f) == 1 for every prime p | w (here only p=2).
    for w, low in REDUCTION_POLY_LOW.items():
        f = (1 << w) | low
        field = GF2Field(w)
        x = 2
        frob = x
        for _ in range(w):
            frob = field._mul_slow(frob, frob)
        assert frob == x, f"x^(2^{w}) != x for width {w}"
        half = x
        for _ in range(w // 2):
            half = field._mul_slow(half, half)
        assert _poly_gcd_gf2(half ^ x, f) == 1, f"poly for width {w} not irreducible"


def test_default_prime():
    assert DEFAULT_PRIME == 2**61 - 1
    PrimeField(DEFAULT_PRIME)  # must not raise


def test_mul_mod_7():
    f = prime_field(7)
    assert field_arith(f, "mul", 3, 5) == 1  # 15 mod 7


def test_char2_self_cancel():
    g = gf2(8)
    a = 0xA7
    assert field_arith(g, "add", a, a) == 0


@pytest.mark.parametrize("spec", ["p=2305843009213693951", "p=101", "gf2 w=8", "gf2 w=32"])
def test_inverse_against_extended_euclid(spec):
    field = parse_field_spec(spec)
    rng = Rng(42)
    for _ in range(100):
        a = field.random(rng, nonzero=True)
        inv = field_arith(field, "inv", a)
        assert field.mul(inv, a) == field.one
        if field.kind == "prime":
            g, x, _ = _ext_gcd(a, field.p)
            assert g == 1 and x % field.p == inv
        else:
            # extended Euclid over GF(2)[x] as an independent oracle
            r0, r1 = field.poly, a
            s0, s1 = 0, 1
            while r1:
                q, rem = _poly_divmod_gf2(r0, r1)
                r0, r1 = r1, rem
                s0, s1 = s1, s0 ^ field._reduce(_clmul(q, s1))
            assert r0 == 1 and field._reduce(s0) == inv


def test_inv_zero_raises():
    with pytest.raises(DivisionByZero):
        prime_field(7).inv(0)
    with pytest.raises(DivisionByZero):
        gf2(16).inv(0)


def test_rng_determinism():
    f = prime_field()
    a = random_element(f, Rng(1))
    b = random_element(f, Rng(1))
    assert a == b
    s1 = [Rng(99).next_u64() for _ in range(4)]
    s2 = [Rng(99).next_u64() for _ in range(4)]
    assert s1 == s2


def test_uniformity_mod_5():
    f = prime_field(5)
    rng = Rng(2024)
    counts = [0] * 5
    n = 10_000
    for _ in range(n):
        counts[f.random(rng)] += 1
    expected = n / 5
    sigma = math.sqrt(n * (1 / 5) * (4 / 5))
    for c in counts:
        assert abs(c - expected) <= 5 * sigma


def test_nonzero_never_zero():
    g = gf2(8)
    rng = Rng(5)
    for _ in range(10_000):
        assert random_element(g, rng, nonzero=True) != 0
    with pytest.raises(FieldTooSmall):
        # synthetic: no field of order < 2 exists, exercise the guard directly
        class Tiny:
            order = 1
        random_element(Tiny(), rng, nonzero=True)


@pytest.mark.parametrize("spec", ["p=2305843009213693951", "p=5", "gf2 w=8", "gf2 w=16", "gf2 w=64"])
def test_field_axioms_random_triples(spec):
    field = parse_field_spec(spec)
    rng = Rng(7)
    for _ in range(1000):
        a, b, c = (field.random(rng) for _ in range(3))
        assert field.add(field.add(a, b), c) == field.add(a, field.add(b, c))
        assert field.mul(field.mul(a, b), c) == field.mul(a, field.mul(b, c))
        assert field.mul(a, field.add(b, c)) == field.add(field.mul(a, b), field.mul(a, c))
        assert field.add(a, field.neg(a)) == 0
        if a:
            assert field.mul(a, field.inv(a)) == field.one


@pytest.mark.parametrize("w", [8, 16, 32, 64])
def test_gf2_frobenius(w):
    g = gf2(w)
    rng = Rng(11)
    for _ in range(200):
        a, b = g.random(rng), g.random(rng)
        lhs = g.mul(g.add(a, b), g.add(a, b))
        rhs = g.add(g.mul(a, a), g.mul(b, b))
        assert lhs == rhs


def test_spec_string_roundtrip():
    for spec in ("p=101", "gf2 w=16"):
        assert parse_field_spec(spec).spec_string() == spec


def test_pow():
    f = prime_field(101)
    assert f.pow(3, 0) == 1
    assert f.pow(3, 5) == pow(3, 5, 101)
    assert f.pow(3, -1) == f.inv(3)
    g = gf2(16)
    a = 0x4321
    assert g.pow(a, 3) == g.mul(a, g.mul(a, a))
