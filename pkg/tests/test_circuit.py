import pytest

from conftest import random_skew_circuit
from kronscale.circuit import (
    OP_ADD,
    OP_CONST,
    OP_IN,
    OP_MUL,
    CircuitBuilder,
    analyze_skew,
    baur_strassen,
    dead_gate_elimination,
    evaluate,
    formal_degrees,
    homogenize,
    homogenize_size_bound,
    mask_bits,
    name_elements,
    parse,
    serialize,
    subset_name,
)
from kronscale.errors import (
    DegreeBound,
    ParseError,
    SingleOutputRequired,
    UnassignedInput,
)
from kronscale.fields import Rng, gf2, prime_field

from _symbolic import SparsePoly, expand_circuit

ZP = prime_field(2**31 - 1)


def naive_eval(circ, assignment):
    """Independent recursive evaluator (memoized descent from outputs)."""
    memo = {}

    def go(gid):
        if gid in memo:
            return memo[gid]
        op, payload = circ.gates[gid]
        if op == OP_IN:
            v = assignment[payload]
        elif op == OP_CONST:
            v = payload
        elif op == OP_ADD:
            v = circ.field.zero
            for a in payload:
                v = circ.field.add(v, go(a))
        else:
            v = circ.field.one
            for a in payload:
                v = circ.field.mul(v, go(a))
        memo[gid] = v
        return v

    return tuple(go(o) for o in circ.outputs)


def test_names():
    assert subset_name("x", [1, 5]) == "x:{1,5}"
    assert subset_name("x", 0b100010) == "x:{1,5}"
    assert name_elements("x:{1,5}") == [1, 5]
    assert name_elements("y:{}") == []
    assert mask_bits(0b1010) == [1, 3]


def test_single_mul():
    bld = CircuitBuilder(prime_field(7))
    x, y = bld.inp("v:x"), bld.inp("v:y")
    bld.set_outputs([bld.mul(x, y)])
    c = bld.build()
    assert evaluate(c, {"v:x": 2, "v:y": 3}) == (6,)


def test_char2_x_plus_x():
    bld = CircuitBuilder(gf2(8))
    x = bld.inp("v:x")
    bld.set_outputs([bld.add(x, x)])
    c = bld.build()
    assert evaluate(c, {"v:x": 0x53}) == (0,)


def test_missing_input():
    bld = CircuitBuilder(ZP)
    bld.set_outputs([bld.inp("v:x")])
    with pytest.raises(UnassignedInput):
        evaluate(bld.build(), {})


def test_random_circuits_match_expansion_oracle():
    rng = Rng(101)
    names = [f"v:x{i}" for i in range(5)]
    for trial in range(6):
        c = random_skew_circuit(ZP, rng, names, n_gates=50)
        poly = expand_circuit(c)[0]
        for _ in range(20):
            asg = {n: ZP.random(rng) for n in names}
            assert evaluate(c, asg)[0] == poly.evaluate(asg)


def test_evaluate_matches_naive_recursive():
    rng = Rng(55)
    names = [f"v:x{i}" for i in range(6)]
    for _ in range(10):
        c = random_skew_circuit(ZP, rng, names, n_gates=150)
        assert len(c.gates) <= 400
        asg = {n: ZP.random(rng) for n in names}
        assert evaluate(c, asg) == naive_eval(c, asg)


def test_formal_degrees_and_skew():
    bld = CircuitBuilder(ZP)
    x1, x2 = bld.inp("x:{1}"), bld.inp("x:{2}")
    s = bld.add(x1, x2)
    p = bld.mul(s, s)      # degree 2 times degree 2
    bld.set_outputs([p])
    c = bld.build()
    degs = formal_degrees(c)
    assert degs[s] == 1 and degs[p] == 2
    assert analyze_skew(c) == 1

    bld = CircuitBuilder(ZP)
    xs = [bld.inp(f"x:{{{i}}}") for i in range(4)]
    s1, s2 = bld.add(xs[0], xs[1]), bld.add(xs[2], xs[3])
    m1, m2 = bld.mul(s1, s1), bld.mul(s2, s2)
    bld.set_outputs([bld.mul(m1, m2)])
    assert analyze_skew(bld.build()) == 2


def test_skew_product_of_sums_is_one():
    # the 1-skew shape used by the permanent generating polynomial
    bld = CircuitBuilder(ZP)
    xs = [bld.inp(f"x:{{{i}}}") for i in range(4)]
    acc = bld.add(*xs)
    for _ in range(3):
        acc = bld.mul(acc, bld.add(*xs))
    bld.set_outputs([acc])
    assert analyze_skew(bld.build()) == 1


def test_fan_in_three_mul_not_skew():
    bld = CircuitBuilder(ZP)
    xs = [bld.inp(f"x:{{{i}}}") for i in range(3)]
    bld.set_outputs([bld.raw_mul(xs)])
    assert analyze_skew(bld.build()) is None


def test_skew_wrt_variable_subset():
    bld = CircuitBuilder(ZP)
    x, r = bld.inp("x:{1}"), bld.inp("v:label")
    bld.set_outputs([bld.mul(bld.mul(r, x), bld.mul(r, x))])
    c = bld.build()
    assert analyze_skew(c) == 2
    assert analyze_skew(c, variables={"x:{1}"}) == 1


def test_homogenize_components_example():
    # x1 + x1*x2 at d=2: components 0, x1, x1*x2
    bld = CircuitBuilder(ZP)
    x1, x2 = bld.inp("x:{1}"), bld.inp("x:{2}")
    bld.set_outputs([bld.add(x1, bld.mul(x1, x2))])
    h = homogenize(bld.build(), 2)
    assert len(h.outputs) == 3
    vals = evaluate(h, {"x:{1}": 3, "x:{2}": 5})
    assert vals == (0, 3, 15)


def test_homogenize_degree_bound():
    bld = CircuitBuilder(ZP)
    x = bld.inp("x:{1}")
    bld.set_outputs([bld.mul(x, bld.mul(x, x))])
    with pytest.raises(DegreeBound):
        homogenize(bld.build(), 2)


def test_homogenize_fixed_point_and_semantics():
    rng = Rng(9)
    names = [f"x:{{{i}}}" for i in range(6)]
    for _ in range(8):
        c = random_skew_circuit(ZP, rng, names, n_gates=40)
        d = formal_degrees(c)[c.outputs[0]]
        h = homogenize(c, d)
        assert h.size <= homogenize_size_bound(c, d)
        for _ in range(20):
            asg = {n: ZP.random(rng) for n in names}
            total = ZP.zero
            for v in evaluate(h, asg):
                total = ZP.add(total, v)
            assert total == evaluate(c, asg)[0]


def test_homogenize_component_scaling():
    # component k at t*x equals t^k times component at x
    rng = Rng(31)
    names = [f"x:{{{i}}}" for i in range(4)]
    c = random_skew_circuit(ZP, rng, names, n_gates=30)
    d = formal_degrees(c)[c.outputs[0]]
    h = homogenize(c, d)
    for _ in range(5):
        asg = {n: ZP.random(rng) for n in names}
        t = ZP.random(rng, nonzero=True)
        scaled = {n: ZP.mul(t, v) for n, v in asg.items()}
        base = evaluate(h, asg)
        up = evaluate(h, scaled)
        for k in range(d + 1):
            assert up[k] == ZP.mul(ZP.pow(t, k), base[k])


def test_homogenize_preserves_skew():
    rng = Rng(77)
    names = [f"x:{{{i}}}" for i in range(5)]
    for _ in range(5):
        c = random_skew_circuit(ZP, rng, names, n_gates=30)
        q = analyze_skew(c)
        d = formal_degrees(c)[c.outputs[0]]
        h = homogenize(c, d)
        assert analyze_skew(h) <= max(q, 0)


def test_baur_strassen_product():
    bld = CircuitBuilder(ZP)
    x1, x2 = bld.inp("x:{1}"), bld.inp("x:{2}")
    bld.set_outputs([bld.mul(x1, x2)])
    g = baur_strassen(bld.build(), ["x:{1}", "x:{2}"])
    assert evaluate(g, {"x:{1}": 11, "x:{2}": 13}) == (13, 11)


def test_baur_strassen_char2_square():
    f2 = gf2(8)
    bld = CircuitBuilder(f2)
    x = bld.inp("x:{1}")
    bld.set_outputs([bld.mul(x, x)])
    g = baur_strassen(bld.build(), ["x:{1}"])
    for v in (0x01, 0x53, 0xFF):
        assert evaluate(g, {"x:{1}": v}) == (0,)


def test_baur_strassen_multi_output_rejected():
    bld = CircuitBuilder(ZP)
    x = bld.inp("x:{1}")
    bld.set_outputs([x, x])
    with pytest.raises(SingleOutputRequired):
        baur_strassen(bld.build(), ["x:{1}"])


def test_baur_strassen_vs_symbolic_derivative():
    rng = Rng(2718)
    names = [f"x:{{{i}}}" for i in range(5)]
    for _ in range(8):
        c = random_skew_circuit(ZP, rng, names, n_gates=40)
        grad = baur_strassen(c, names)
        assert len(grad.outputs) == len(names)
        assert grad.size <= 4 * max(c.size, 1)
        poly = expand_circuit(c)[0]
        partials = [poly.derivative(n) for n in names]
        for _ in range(10):
            asg = {n: ZP.random(rng) for n in names}
            got = evaluate(grad, asg)
            for gv, p in zip(got, partials):
                assert gv == p.evaluate(asg)


def test_baur_strassen_linearity():
    # gradient of a sum equals sum of gradients
    rng = Rng(4242)
    names = [f"x:{{{i}}}" for i in range(4)]
    for _ in range(4):
        c1 = random_skew_circuit(ZP, rng, names, n_gates=25)
        c2 = random_skew_circuit(ZP, rng, names, n_gates=25)
        bld = CircuitBuilder(ZP)
        remap = {}
        merged_outs = []
        for c in (c1, c2):
            ids = {}
            for gid, (op, payload) in enumerate(c.gates):
                if op == OP_IN:
                    ids[gid] = bld.inp(payload)
                elif op == OP_CONST:
                    ids[gid] = bld.const(payload)
                elif op == OP_ADD:
                    ids[gid] = bld.add(*[ids[a] for a in payload])
                else:
                    ids[gid] = bld.mul(ids[payload[0]], ids[payload[1]])
            merged_outs.append(ids[c.outputs[0]])
        bld.set_outputs([bld.add(*merged_outs)])
        gsum = baur_strassen(bld.build(), names)
        g1 = baur_strassen(c1, names)
        g2 = baur_strassen(c2, names)
        for _ in range(5):
            asg = {n: ZP.random(rng) for n in names}
            vs = evaluate(gsum, asg)
            v1 = evaluate(g1, asg)
            v2 = evaluate(g2, asg)
            assert vs == tuple(ZP.add(a, b) for a, b in zip(v1, v2))


def test_serialize_roundtrip_empty_outputs():
    bld = CircuitBuilder(ZP)
    bld.inp("x:{1}")
    bld.set_outputs([])
    c = bld.build()
    assert parse(serialize(c)) == c


def test_serialize_gf64_bit_exact():
    f = gf2(64)
    bld = CircuitBuilder(f)
    x = bld.inp("x:{1}")
    c0 = bld.const(0xDEADBEEFCAFEF00D)
    bld.set_outputs([bld.mul(x, c0)])
    c = bld.build()
    c2 = parse(serialize(c))
    assert c2 == c
    v = 0x0123456789ABCDEF
    assert evaluate(c2, {"x:{1}": v}) == evaluate(c, {"x:{1}": v})


def test_serialize_large_circuit_roundtrip():
    rng = Rng(123)
    names = [f"x:{{{i}}}" for i in range(8)]
    bld = CircuitBuilder(ZP)
    xs = [bld.inp(n) for n in names]
    pool = list(xs)
    for _ in range(100_000):
        a = pool[rng.below(len(pool))]
        b = pool[rng.below(len(pool))]
        g = bld.add(a, b) if rng.below(2) else bld.mul(a, xs[rng.below(len(xs))])
        pool.append(g)
    bld.set_outputs([pool[-1]])
    c = bld.build()
    assert len(c.gates) >= 100_000
    c2 = parse(serialize(c))
    assert c2 == c
    asg = {n: ZP.random(rng) for n in names}
    assert evaluate(c2, asg) == evaluate(c, asg)


def test_parse_error_line_numbers():
    text = "circuit v1\nfield p=7\nin 0 x:{1}\nadd 1 0 5\nout 1\n"
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert "line 4" in str(exc.value)


def test_parse_comments_and_mul_arity():
    text = "# hello\ncircuit v1\nfield p=7\nin 0 v:a\nmul 1 0 0 0\nout 1\n"
    with pytest.raises(ParseError):
        parse(text)


def test_dead_gate_elimination():
    bld = CircuitBuilder(ZP)
    x = bld.inp("x:{1}")
    bld.mul(x, x)  # dead
    keep = bld.add(x, bld.const(3))
    bld.set_outputs([keep])
    c = bld.build()
    c2 = dead_gate_elimination(c)
    assert len(c2.gates) < len(c.gates)
    assert evaluate(c2, {"x:{1}": 9}) == evaluate(c, {"x:{1}": 9})
