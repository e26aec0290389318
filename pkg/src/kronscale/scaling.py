"""Kronecker-scaling decomposition of balanced tripartitioning tensors.

The ground [3n] is split into r = g*s blocks of size 3b; every balanced
tripartition gets an intersection type (per-block size triple), and each
type's slice embeds into a restriction of P_{d_eff}^{(x) s} after Steinitz
balancing groups the blocks and padding tops every part up to d_eff.

Padding is adaptive: d_eff = b*g + Delta where Delta is the largest
deviation the balancing actually achieved over all types and groups (the
worst-case constant would put d_eff = b*(g+36), far beyond desk scale; a
flag restores it for structural demonstrations).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

from .circuit import Circuit, CircuitBuilder, subset_name
from .errors import InternalError, ProviderError, TooLarge
from .fields import Field, prime_field
from .steinitz import VectorFamily, concentration_partition
from .tensor import (
    RankDecomposition,
    generate_P,
    trivial_decomposition,
    verify_decomposition,
)

DEFAULT_TYPE_BUDGET = 10 ** 8       # cap on (3b+1)^(3r)
DEFAULT_ARC_BUDGET = 20_000_000     # cap on materialized circuit arcs


@dataclass(frozen=True)
class BlockStructure:
    """Ground [3n] with n = b*g*s, split into r = g*s blocks of size 3b."""

    b: int
    g: int
    s: int

    def __post_init__(self):
        if min(self.b, self.g, self.s) < 1:
            raise ValueError("b, g, s must be positive")

    @property
    def n(self) -> int:
        return self.b * self.g * self.s

    @property
    def r(self) -> int:
        return self.g * self.s

    @property
    def ground_size(self) -> int:
        return 3 * self.n

    def block_elements(self, i: int) -> range:
        return range(3 * self.b * i, 3 * self.b * (i + 1))


@dataclass(frozen=True)
class IntersectionType:
    alpha: tuple
    beta: tuple
    gamma: tuple


def enumerate_types(bs: BlockStructure, budget: int = DEFAULT_TYPE_BUDGET):
    """All intersection types, lexicographically ordered on (alpha,beta,gamma).

    A type gives each block a triple summing to 3b, with every row summing
    to n across blocks.
    """
    if (3 * bs.b + 1) ** (3 * bs.r) > budget:
        raise TooLarge(f"(3b+1)^(3r) exceeds enumeration budget {budget}")
    cap = 3 * bs.b
    n = bs.n
    r = bs.r
    out = []
    alpha = [0] * r
    beta = [0] * r

    def rec(i, sum_a, sum_b):
        if i == r:
            if sum_a == n and sum_b == n:
                gamma = tuple(cap - alpha[t] - beta[t] for t in range(r))
                out.append(IntersectionType(tuple(alpha), tuple(beta), gamma))
            return
        remaining = (r - i - 1) * cap
        for a in range(cap + 1):
            if sum_a + a > n or sum_a + a + remaining < n:
                continue
            alpha[i] = a
            for b in range(cap + 1 - a):
                if sum_b + b > n or sum_b + b + remaining < n:
                    continue
                # gamma entry is cap-a-b; its row sum is forced once the
                # alpha and beta rows hit n, so no third check is needed
                beta[i] = b
                rec(i + 1, sum_a + a, sum_b + b)
    rec(0, 0, 0)
    return out


def classify_tripartition(bs: BlockStructure, amask: int, bmask: int, cmask: int):
    """Intersection type of a tripartition of [3n]."""
    alpha, beta, gamma = [], [], []
    for i in range(bs.r):
        block = 0
        for e in bs.block_elements(i):
            block |= 1 << e
        alpha.append(bin(amask & block).count("1"))
        beta.append(bin(bmask & block).count("1"))
        gamma.append(bin(cmask & block).count("1"))
    return IntersectionType(tuple(alpha), tuple(beta), tuple(gamma))


@dataclass(frozen=True)
class ScalingComponent:
    """One type's slice: Steinitz groups, padding split, restriction data."""

    tau: IntersectionType
    groups: tuple              # per factor j: tuple of block indices
    pad_sizes: tuple           # per factor j: (pad_a, pad_b, pad_c)
    factor_grounds: tuple      # per factor j: tuple of global element ids
    # per factor j and slot: dict local d_eff-subset mask -> original U-mask
    alive_x: tuple
    alive_y: tuple
    alive_z: tuple


@dataclass(frozen=True)
class ScalingDecomposition:
    bs: BlockStructure
    d_eff: int
    delta: int
    components: tuple


def _group_sums(tau: IntersectionType, group):
    sa = sum(tau.alpha[i] for i in group)
    sb = sum(tau.beta[i] for i in group)
    sc = sum(tau.gamma[i] for i in group)
    return sa, sb, sc


def decompose_P(bs: BlockStructure, paper_padding: bool = False,
                type_budget: int = DEFAULT_TYPE_BUDGET) -> ScalingDecomposition:
    """One component per intersection type, all sharing one effective part
    size d_eff; groups come from the Steinitz concentration partition of the
    normalized per-block count vectors."""
    types = enumerate_types(bs, budget=type_budget)
    b, g, s = bs.b, bs.g, bs.s
    groupings = []
    delta = 0
    for tau in types:
        vecs = [(Fraction(tau.alpha[i], 3 * b), Fraction(tau.beta[i], 3 * b),
                 Fraction(tau.gamma[i], 3 * b)) for i in range(bs.r)]
        part = concentration_partition(VectorFamily.from_vectors(vecs), (g,) * s)
        groupings.append(part.groups)
        for grp in part.groups:
            sa, sb, sc = _group_sums(tau, grp)
            delta = max(delta, abs(sa - b * g), abs(sb - b * g), abs(sc - b * g))
    if paper_padding:
        delta = 36 * b
    d_eff = b * g + delta
    pad_per_factor = 3 * delta
    n3 = bs.ground_size
    components = []
    for tau, groups in zip(types, groupings):
        pad_sizes = []
        grounds = []
        ax, ay, az = [], [], []
        for j, grp in enumerate(groups):
            sa, sb, sc = _group_sums(tau, grp)
            pa, pb, pc = d_eff - sa, d_eff - sb, d_eff - sc
            if min(pa, pb, pc) < 0 or pa + pb + pc != pad_per_factor:
                raise InternalError("negative or inconsistent padding")
            pad_sizes.append((pa, pb, pc))
            pads = [n3 + pad_per_factor * j + t for t in range(pad_per_factor)]
            ground = sorted(e for i in grp for e in bs.block_elements(i)) + pads
            grounds.append(tuple(ground))
            local = {e: t for t, e in enumerate(ground)}
            pad_local = [local[e] for e in pads]
            pad_a = sum(1 << pad_local[t] for t in range(pa))
            pad_b = sum(1 << pad_local[t] for t in range(pa, pa + pb))
            pad_c = sum(1 << pad_local[t] for t in range(pa + pb, pad_per_factor))
            for slot, counts, pad_mask, sink in (
                    ("x", tau.alpha, pad_a, ax), ("y", tau.beta, pad_b, ay),
                    ("z", tau.gamma, pad_c, az)):
                per_block = []
                for i in sorted(grp):
                    elems = list(bs.block_elements(i))
                    opts = []
                    for chosen in combinations(elems, counts[i]):
                        lmask = sum(1 << local[e] for e in chosen)
                        omask = sum(1 << e for e in chosen)
                        opts.append((lmask, omask))
                    per_block.append(opts)
                alive = {}
                for combo in product(*per_block):
                    lmask = pad_mask
                    omask = 0
                    for lm, om in combo:
                        lmask |= lm
                        omask |= om
                    alive[lmask] = omask
                sink.append(alive)
        components.append(ScalingComponent(
            tau, tuple(groups), tuple(pad_sizes), tuple(grounds),
            tuple(ax), tuple(ay), tuple(az)))
    return ScalingDecomposition(bs, d_eff, delta if not paper_padding else 36 * b,
                                tuple(components))


def verify_scaling(bs: BlockStructure, decomposition: ScalingDecomposition | None = None):
    """Check the scaling identity coefficient-by-coefficient.

    Enumerates each component's projected nonzero monomials from its
    restriction data and compares the multiset against the tripartitions
    of P_n; returns None when they agree with multiplicity one everywhere,
    else the first offending (A,B,C) monomial.
    """
    if bs.n > 5:
        raise TooLarge("verify_scaling is exhaustive; needs n <= 5")
    dec = decomposition or decompose_P(bs)
    seen: dict = {}
    for comp in dec.components:
        factor_triples = []
        for j in range(bs.s):
            triples = []
            full = (1 << len(comp.factor_grounds[j])) - 1
            for lx, ox in comp.alive_x[j].items():
                for ly, oy in comp.alive_y[j].items():
                    if lx & ly:
                        continue
                    lz = full ^ lx ^ ly
                    oz = comp.alive_z[j].get(lz)
                    if oz is not None:
                        triples.append((ox, oy, oz))
            factor_triples.append(triples)
        for combo in product(*factor_triples):
            a = b = c = 0
            for ox, oy, oz in combo:
                a |= ox
                b |= oy
                c |= oz
            key = (a, b, c)
            seen[key] = seen.get(key, 0) + 1
    expected = generate_P(bs.n, field=prime_field()).entries
    for key in sorted(set(seen) | set(expected)):
        if seen.get(key, 0) != (1 if key in expected else 0):
            return key
    return None


def trivial_dec_source(d: int, field: Field) -> RankDecomposition:
    """Default provider: the one-term-per-entry decomposition of P_d."""
    return trivial_decomposition(generate_P(d, field=field))


_VERIFIED_CACHE: dict = {}


def _provider_dec(dec_source, d: int, field: Field) -> RankDecomposition:
    key = (id(dec_source), d, field.spec_string())
    dec = _VERIFIED_CACHE.get(key)
    if dec is not None:
        return dec
    try:
        dec = dec_source(d, field)
    except TooLarge:
        raise
    except Exception as exc:
        raise ProviderError(f"decomposition provider failed for d={d}: {exc}") from exc
    bad = verify_decomposition(generate_P(d, field=field), dec)
    if bad is not None:
        raise ProviderError(f"provider decomposition for d={d} fails at {bad}")
    _VERIFIED_CACHE[key] = dec
    return dec


def _adjacency(mat, zero):
    return [tuple((l, v) for l, v in enumerate(row) if v != zero) for row in mat]


def _yates_transform(bld: CircuitBuilder, adj, s: int, inputs: dict,
                     arc_budget: int) -> dict:
    """Sparse layered Kronecker transform.

    inputs maps side-index tuples to gates; level u rewrites position u
    from a side index to a term index, accumulating coefficient-scaled
    sums.  Zero gates never materialize, so restrictions stay cheap.
    """
    cur = inputs
    for u in range(s):
        acc: dict = {}
        for key, gate in cur.items():
            head = key[:u]
            tail = key[u + 1:]
            for l, coeff in adj[key[u]]:
                nk = head + (l,) + tail
                term = bld.scale(coeff, gate)
                if bld.is_zero(term):
                    continue
                prev = acc.get(nk)
                if prev is None:
                    acc[nk] = term
                elif isinstance(prev, list):
                    prev.append(term)
                else:
                    acc[nk] = [prev, term]
        cur = {}
        for nk, val in acc.items():
            cur[nk] = bld.add(*val) if isinstance(val, list) else val
        if bld.arcs > arc_budget:
            raise TooLarge(f"transform exceeded arc budget {arc_budget}")
    return cur


def yates_circuit(dec: RankDecomposition, s: int,
                  gate_budget: int = 2_000_000,
                  arc_budget: int = DEFAULT_ARC_BUDGET) -> Circuit:
    """Kronecker-power evaluation circuit from a rank decomposition.

    Inputs are x/y/z over s-fold combined subset masks (copy j of the base
    ground shifted by j*ground_size); the single output computes the s-th
    Kronecker power applied to the inputs.
    """
    if dec.rank ** s > gate_budget:
        raise TooLarge(f"rank^s = {dec.rank ** s} exceeds budget {gate_budget}")
    field = dec.field
    bld = CircuitBuilder(field)
    m = dec.ground_size
    zero = field.zero
    hats = []
    for slot, side, mat in (("x", dec.side_x, dec.Umat), ("y", dec.side_y, dec.Vmat),
                            ("z", dec.side_z, dec.Wmat)):
        inputs = {}
        for key in product(range(len(side)), repeat=s):
            mask = 0
            for j, i in enumerate(key):
                mask |= side[i] << (j * m)
            inputs[key] = bld.inp(subset_name(slot, mask))
        hats.append(_yates_transform(bld, _adjacency(mat, zero), s, inputs, arc_budget))
    hx, hy, hz = hats
    terms = []
    for key, gx in hx.items():
        gy = hy.get(key)
        if gy is None:
            continue
        gz = hz.get(key)
        if gz is None:
            continue
        terms.append(bld.mul(bld.mul(gx, gy), gz))
    bld.set_outputs([bld.add(*terms) if terms else bld.zero])
    return bld.build()


class PScalingScheme:
    """Reusable builder for the P_n circuit of Theorem-style pipelines.

    Constructed once per (n, b, g, field, provider); instantiate() emits
    the per-type restricted Yates copies into any CircuitBuilder, wiring
    inputs through caller-supplied mask->gate maps (None kills an input).
    """

    def __init__(self, n: int, b: int, g: int, field: Field, dec_source=None,
                 paper_padding: bool = False,
                 type_budget: int = DEFAULT_TYPE_BUDGET,
                 arc_budget: int = DEFAULT_ARC_BUDGET):
        if n % (b * g) != 0:
            raise TooLarge(f"n={n} is not a multiple of b*g={b * g}")
        self.n = n
        self.field = field
        self.s = n // (b * g)
        self.bs = BlockStructure(b, g, self.s)
        self.arc_budget = arc_budget
        self.decomposition = decompose_P(self.bs, paper_padding=paper_padding,
                                         type_budget=type_budget)
        self.d_eff = self.decomposition.d_eff
        self.dec = _provider_dec(dec_source or trivial_dec_source, self.d_eff, field)
        self.adj = (_adjacency(self.dec.Umat, field.zero),
                    _adjacency(self.dec.Vmat, field.zero),
                    _adjacency(self.dec.Wmat, field.zero))
        self.side_index = ({m: i for i, m in enumerate(self.dec.side_x)},
                           {m: i for i, m in enumerate(self.dec.side_y)},
                           {m: i for i, m in enumerate(self.dec.side_z)})

    def instantiate(self, bld: CircuitBuilder, xwire, ywire, zwire) -> int:
        """Emit the full type sum; returns the output gate id."""
        wires = (xwire, ywire, zwire)
        type_outputs = []
        for comp in self.decomposition.components:
            hats = []
            for slot in range(3):
                alive = (comp.alive_x, comp.alive_y, comp.alive_z)[slot]
                index = self.side_index[slot]
                wire = wires[slot]
                per_factor = []
                for j in range(self.bs.s):
                    entries = []
                    for lmask, omask in alive[j].items():
                        entries.append((index[lmask], omask))
                    per_factor.append(entries)
                inputs = {}
                for combo in product(*per_factor):
                    key = tuple(i for i, _ in combo)
                    omask = 0
                    for _, om in combo:
                        omask |= om
                    gate = wire(omask)
                    if gate is not None and not bld.is_zero(gate):
                        inputs[key] = gate
                hats.append(_yates_transform(bld, self.adj[slot], self.bs.s,
                                             inputs, self.arc_budget))
            hx, hy, hz = hats
            terms = []
            for key, gx in hx.items():
                gy = hy.get(key)
                if gy is None:
                    continue
                gz = hz.get(key)
                if gz is None:
                    continue
                terms.append(bld.mul(bld.mul(gx, gy), gz))
            if terms:
                type_outputs.append(bld.add(*terms))
        return bld.add(*type_outputs) if type_outputs else bld.zero


_SCHEME_CACHE: dict = {}


def p_scheme(n: int, b: int, g: int, field: Field, dec_source=None,
             paper_padding: bool = False) -> PScalingScheme:
    """Cached PScalingScheme for the default provider path."""
    key = (n, b, g, field.spec_string(), id(dec_source), paper_padding)
    scheme = _SCHEME_CACHE.get(key)
    if scheme is None:
        scheme = PScalingScheme(n, b, g, field, dec_source=dec_source,
                                paper_padding=paper_padding)
        _SCHEME_CACHE[key] = scheme
    return scheme


def build_P_circuit(n: int, b: int, g: int, field: Field | None = None,
                    dec_source=None, paper_padding: bool = False) -> Circuit:
    """Circuit for P_n(x,y,z) with inputs over all n-subsets of [3n]."""
    field = field or prime_field()
    scheme = p_scheme(n, b, g, field, dec_source=dec_source,
                      paper_padding=paper_padding)
    bld = CircuitBuilder(field)
    gates = {"x": {}, "y": {}, "z": {}}
    for slot in ("x", "y", "z"):
        for elems in combinations(range(3 * n), n):
            mask = sum(1 << e for e in elems)
            gates[slot][mask] = bld.inp(subset_name(slot, mask))
    out = scheme.instantiate(bld, gates["x"].get, gates["y"].get, gates["z"].get)
    bld.set_outputs([out])
    return bld.build()
