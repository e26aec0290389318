import pytest

from conftest import random_skew_circuit
from kronscale.circuit import CircuitBuilder, evaluate
from kronscale.coeffx import (
    ExtractionRequest,
    extract_coeff_direct,
    extract_coeff_tripartition,
    extract_coefficient,
    pad_degree,
)
from kronscale.errors import NotSkew
from kronscale.fields import Rng, gf2, prime_field

from _symbolic import expand_circuit

F = prime_field(2**31 - 1)


def full_product_circuit(field, names):
    bld = CircuitBuilder(field)
    acc = bld.inp(names[0])
    for nm in names[1:]:
        acc = bld.mul(acc, bld.inp(nm))
    bld.set_outputs([acc])
    return bld.build()


def names_for(n):
    return [f"x:{{{i}}}" for i in range(n)]


def test_direct_full_product():
    names = names_for(6)
    c = full_product_circuit(F, names)
    out = extract_coefficient(c, names, "direct")
    assert evaluate(out, {}) == (1,)


def test_direct_square_coefficient():
    bld = CircuitBuilder(F)
    s = bld.add(bld.inp("x:{0}"), bld.inp("x:{1}"))
    bld.set_outputs([bld.mul(s, s)])
    out = extract_coefficient(bld.build(), ["x:{0}", "x:{1}"], "direct")
    assert evaluate(out, {}) == (2,)
    f2 = gf2(8)
    bld = CircuitBuilder(f2)
    s = bld.add(bld.inp("x:{0}"), bld.inp("x:{1}"))
    bld.set_outputs([bld.mul(s, s)])
    out = extract_coefficient(bld.build(), ["x:{0}", "x:{1}"], "direct")
    assert evaluate(out, {}) == (0,)  # char 2


def test_direct_matches_expansion_oracle():
    rng = Rng(314)
    for trial in range(10):
        n = 4 + rng.below(4)  # 4..7
        names = names_for(n)
        c = random_skew_circuit(F, rng, names, n_gates=25, force_degree=n)
        out = extract_coefficient(c, names, "direct")
        want = expand_circuit(c)[0].coefficient_of_full_monomial(names)
        assert evaluate(out, {}) == (want,)


def test_direct_with_carried_inputs():
    # non-extracted inputs stay inputs of the output circuit
    rng = Rng(9)
    bld = CircuitBuilder(F)
    x0, x1 = bld.inp("x:{0}"), bld.inp("x:{1}")
    w = bld.inp("v:w")
    bld.set_outputs([bld.mul(bld.mul(x0, w), x1)])
    out = extract_coefficient(bld.build(), ["x:{0}", "x:{1}"], "direct")
    for _ in range(5):
        v = F.random(rng)
        assert evaluate(out, {"v:w": v}) == (v,)


def test_direct_skew_cap():
    names = names_for(6)
    bld = CircuitBuilder(F)
    xs = [bld.inp(nm) for nm in names]
    left = bld.mul(bld.mul(xs[0], xs[1]), bld.mul(xs[2], xs[3]))  # 2-skew already
    right = bld.mul(xs[4], xs[5])
    bld.set_outputs([bld.mul(left, right)])  # min side degree 2
    with pytest.raises(NotSkew):
        extract_coefficient(bld.build(), names, "direct", skew_cap=1)
    out = extract_coefficient(bld.build(), names, "direct", skew_cap=4)
    assert evaluate(out, {}) == (1,)


def test_tripartition_product_blocks():
    # nine factors cycling three block sums: coefficient 6^3
    names = names_for(9)
    bld = CircuitBuilder(F)
    xs = [bld.inp(nm) for nm in names]
    acc = None
    for i in range(9):
        blk = (i % 3) * 3
        ssum = bld.add(xs[blk], xs[blk + 1], xs[blk + 2])
        acc = ssum if acc is None else bld.mul(acc, ssum)
    bld.set_outputs([acc])
    c = bld.build()
    direct = evaluate(extract_coefficient(c, names, "direct"), {})
    tri = evaluate(extract_coefficient(c, names, "tri"), {})
    assert direct == tri == (216,)


def test_tripartition_permanent_identity_n9():
    # permanent generating polynomial of the identity matrix: coefficient 1
    names = names_for(9)
    bld = CircuitBuilder(F)
    xs = [bld.inp(nm) for nm in names]
    acc = None
    for j in range(9):
        col = bld.add(*[bld.mul(xs[i], bld.const(F.one if i == j else F.zero))
                        for i in range(9)])
        acc = col if acc is None else bld.mul(acc, col)
    bld.set_outputs([acc])
    out = extract_coefficient(bld.build(), names, "tri")
    assert evaluate(out, {}) == (1,)


def test_cross_method_random_1skew():
    rng = Rng(1001)
    names = names_for(9)
    for trial in range(8):
        c = random_skew_circuit(F, rng, names, n_gates=30, force_degree=9)
        d = evaluate(extract_coefficient(c, names, "direct"), {})
        t = evaluate(extract_coefficient(c, names, "tri"), {})
        assert d == t
        want = expand_circuit(c, term_cap=500_000)[0].coefficient_of_full_monomial(names)
        assert d == (want,)


def test_tripartition_qskew_via_rewrite():
    # q = 2 circuit: product of (1 + x_i x_j) pairs, the set-partition shape
    names = names_for(9)
    bld = CircuitBuilder(F)
    xs = [bld.inp(nm) for nm in names]
    pairs = [(0, 1), (2, 3), (4, 5), (6, 7), (0, 8), (1, 2)]
    acc = None
    for i, j in pairs:
        term = bld.add(bld.one, bld.mul(xs[i], xs[j]))
        acc = term if acc is None else bld.mul(acc, term)
    # close the degree gap so the full monomial can appear
    for i in (3, 4, 5, 6, 7, 8):
        acc = bld.mul(acc, xs[i])
    bld.set_outputs([acc])
    c = bld.build()
    d = evaluate(extract_coefficient(c, names, "direct"), {})
    t = evaluate(extract_coefficient(c, names, "tri"), {})
    want = expand_circuit(c)[0].coefficient_of_full_monomial(names)
    assert d == t == (want,)


def test_pad_degree():
    names = names_for(7)
    c = full_product_circuit(F, names)
    padded, new_names = pad_degree(c, names)
    assert len(new_names) == 9
    assert new_names[:7] == tuple(names)
    out = extract_coefficient(padded, new_names, "direct")
    assert evaluate(out, {}) == (1,)
    # n = 9 unchanged
    names9 = names_for(9)
    c9 = full_product_circuit(F, names9)
    same, same_names = pad_degree(c9, names9)
    assert same is c9 and same_names == tuple(names9)


def test_padded_extraction_agrees():
    rng = Rng(77)
    names = names_for(7)
    for _ in range(4):
        c = random_skew_circuit(F, rng, names, n_gates=20, force_degree=7)
        d = evaluate(extract_coefficient(c, names, "direct"), {})
        t = evaluate(extract_coefficient(c, names, "tri"), {})  # pads to 9
        assert d == t


def test_tripartition_rejects_unpadded():
    names = names_for(7)
    c = full_product_circuit(F, names)
    with pytest.raises(NotSkew):
        extract_coeff_tripartition(ExtractionRequest(c, names, "tripartition"))


def test_table_size_reporting():
    names = names_for(9)
    c = full_product_circuit(F, names)
    direct = extract_coeff_direct(ExtractionRequest(c, names))
    assert direct.meta["table_entries"] <= len(c.gates) * 2 ** 9
    tri = extract_coefficient(c, names, "tri")
    assert tri.meta["s"] >= 1 and tri.meta["t"] >= 1
