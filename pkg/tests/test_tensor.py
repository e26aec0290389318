from itertools import combinations, permutations
from math import comb, factorial
from pathlib import Path

import pytest

from kronscale.circuit import mask_bits, mask_of
from kronscale.errors import GroundOverlap, ShapeError, TooLarge, UnassignedInput
from kronscale.fields import Rng, gf2, prime_field
from kronscale.tensor import (
    RankDecomposition,
    Tensor,
    generate_P,
    kron_power,
    kronecker,
    parse_decomposition,
    subtensor,
    tensor_eval,
    trivial_decomposition,
    verify_decomposition,
    write_decomposition,
)

F = prime_field(2**31 - 1)
FIXTURES = Path(__file__).parent / "fixtures"


def brute_tripartition_count(m, q):
    # enumeration oracle: choose A, then B from the rest
    count = 0
    for a in combinations(range(m), q):
        rest = [e for e in range(m) if e not in a]
        count += sum(1 for _ in combinations(rest, q))
    return count


def test_generate_P_counts():
    assert len(generate_P(1, field=F).entries) == 6  # 3! orderings
    assert len(generate_P(2, field=F).entries) == brute_tripartition_count(6, 2) == 90
    assert len(generate_P(3, field=F).entries) == factorial(9) // factorial(3) ** 3 == 1680


def test_generate_P_entry_shapes():
    t = generate_P(2, field=F)
    for (a, b, c) in t.entries:
        assert bin(a).count("1") == bin(b).count("1") == bin(c).count("1") == 2
        assert a & b == a & c == b & c == 0
        assert a | b | c == (1 << 6) - 1


def test_generate_P_too_large():
    with pytest.raises(TooLarge):
        generate_P(8, field=F)


def test_generate_P_permutation_symmetry():
    rng = Rng(1)
    for q in (1, 2, 3):
        t = generate_P(q, field=F)
        perm = list(range(3 * q))
        rng.shuffle(perm)

        def apply(mask):
            return mask_of(perm[e] for e in mask_bits(mask))

        mapped = {(apply(a), apply(b), apply(c)): v for (a, b, c), v in t.entries.items()}
        assert mapped == t.entries


def test_kronecker_unit():
    t = generate_P(2, field=F)
    unit = Tensor(F, (99,), {(1, 1, 1): F.one})  # single entry, coeff 1 on {99}
    # relabel element 99 to avoid overlap: grounds are (0..5) and (99,)
    prod = kronecker(t, unit)
    assert len(prod.entries) == len(t.entries)
    shift = t.ground_size
    for (a, b, c), v in t.entries.items():
        assert prod.entries[(a | 1 << shift, b | 1 << shift, c | 1 << shift)] == v


def test_kronecker_p1_p1():
    t1 = generate_P(1, field=F)
    t2 = Tensor(F, (10, 11, 12), dict(generate_P(1, field=F).entries))
    prod = kronecker(t1, t2)
    assert len(prod.entries) == 36


def test_kronecker_coefficients_exhaustive():
    rng = Rng(5)
    for _ in range(5):
        s = _random_tensor(rng, ground=(0, 1, 2), n_entries=4)
        t = _random_tensor(rng, ground=(3, 4, 5), n_entries=5)
        prod = kronecker(s, t)
        shift = 3
        # direct double loop over all pairs
        expected = {}
        for (a1, b1, c1), v1 in s.entries.items():
            for (a2, b2, c2), v2 in t.entries.items():
                expected[(a1 | a2 << shift, b1 | b2 << shift, c1 | c2 << shift)] = F.mul(v1, v2)
        assert prod.entries == expected


def test_kronecker_ground_overlap():
    t1 = generate_P(1, field=F)
    with pytest.raises(GroundOverlap):
        kronecker(t1, t1)


def _random_tensor(rng, ground, n_entries):
    m = len(ground)
    entries = {}
    while len(entries) < n_entries:
        a = rng.below(1 << m)
        b = rng.below(1 << m)
        c = rng.below(1 << m)
        entries[(a, b, c)] = F.random(rng, nonzero=True)
    return Tensor(F, tuple(ground), entries)


def test_kronecker_associative_up_to_relabel():
    rng = Rng(17)
    a = _random_tensor(rng, (0, 1), 3)
    b = _random_tensor(rng, (2, 3), 3)
    c = _random_tensor(rng, (4, 5), 3)
    left = kronecker(kronecker(a, b), c)
    right = kronecker(a, kronecker(b, c))
    assert left.entries == right.entries  # same ground order either way


def test_tensor_eval_examples():
    t = generate_P(1, field=F)
    ones = {m: F.one for m in range(8)}
    assert tensor_eval(t, ones, ones, ones) == 6
    (a, b, c) = sorted(t.entries)[0]
    ind_x = {m: F.one if m == a else F.zero for m in range(8)}
    ind_y = {m: F.one if m == b else F.zero for m in range(8)}
    ind_z = {m: F.one if m == c else F.zero for m in range(8)}
    assert tensor_eval(t, ind_x, ind_y, ind_z) == 1
    with pytest.raises(UnassignedInput):
        tensor_eval(t, {}, ones, ones)


def test_trivial_decomposition():
    t1 = generate_P(1, field=F)
    d1 = trivial_decomposition(t1)
    assert d1.rank == 6
    assert verify_decomposition(t1, d1) is None

    zero = Tensor(F, (0, 1, 2), {})
    assert trivial_decomposition(zero).rank == 0

    t2 = generate_P(2, field=F)
    d2 = trivial_decomposition(t2)
    assert d2.rank == 90
    assert verify_decomposition(t2, d2) is None


def test_diagonal_tensor_identity_decomposition():
    # <2>: sum_i x_i y_i z_i with i in {0,1} as singleton masks
    entries = {(1 << i, 1 << i, 1 << i): F.one for i in range(2)}
    t = Tensor(F, (0, 1), entries)
    sides = (1, 2)
    eye = ((F.one, F.zero), (F.zero, F.one))
    dec = RankDecomposition(F, 2, sides, sides, sides, eye, eye, eye)
    assert verify_decomposition(t, dec) is None


def test_verify_detects_counterexample():
    t = generate_P(1, field=F)
    dec = trivial_decomposition(t)
    broken = dict(t.entries)
    key = sorted(broken)[0]
    broken[key] = F.add(broken[key], F.one)
    t_bad = Tensor(F, t.ground, broken)
    assert verify_decomposition(t_bad, dec) == key


def test_strassen_mm2_fixture():
    text = (FIXTURES / "mm2_strassen.rankdec").read_text()
    dec = parse_decomposition(text)
    assert dec.rank == 7
    f = dec.field
    entries = {}
    for i in (1, 2):
        for j in (1, 2):
            for k in (1, 2):
                a = 1 << ((i - 1) * 2 + (j - 1))
                b = 1 << (4 + (j - 1) * 2 + (k - 1))
                c = 1 << (8 + (k - 1) * 2 + (i - 1))
                entries[(a, b, c)] = f.one
    mm2 = Tensor(f, tuple(range(12)), entries)
    assert verify_decomposition(mm2, dec) is None


def test_decomposition_file_roundtrip():
    t = generate_P(2, field=gf2(16))
    dec = trivial_decomposition(t)
    text = write_decomposition(dec)
    dec2 = parse_decomposition(text)
    assert dec2 == dec


def test_shape_error_on_uncovered_support():
    t = generate_P(1, field=F)
    dec = trivial_decomposition(t)
    bigger = dict(t.entries)
    bigger[(7, 7, 7)] = F.one  # support outside the side lists
    with pytest.raises(ShapeError):
        verify_decomposition(Tensor(F, t.ground, bigger), dec)


def test_kron_power_matches_repeated_kronecker():
    t = generate_P(1, field=F)
    p2 = kron_power(t, 2)
    assert len(p2.entries) == 36
    assert p2.ground == tuple(range(6))


def test_subtensor():
    t = generate_P(2, field=F)
    # force elements 4,5: one in A, one in B; strip them
    drop = 0b110000
    sub = subtensor(t, drop, 0b010000, 0b100000, 0)
    assert sub.ground_size == 4
    for (a, b, c) in sub.entries:
        assert bin(a).count("1") == 1 and bin(b).count("1") == 1 and bin(c).count("1") == 2
