"""Set-multilinear three-tensors over explicit grounds, Kronecker products,
balanced-tripartitioning generators, and rank-decomposition certificates.

Subsets of the ground are 64-bit masks over element positions; subsets are
ordered colexicographically, which for masks is plain integer order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .circuit import mask_bits, mask_of
from .errors import (
    GroundOverlap,
    ParseError,
    ShapeError,
    TooLarge,
    UnassignedInput,
)
from .fields import Field, parse_field_spec

MAX_GROUND = 63
MAX_P_GROUND = 21  # explicit-enumeration bound for generate_P


@dataclass(frozen=True)
class Tensor:
    """Coefficient map (A,B,C) -> value over a common ground.

    Only nonzero coefficients are stored.  Ground elements are arbitrary
    hashable labels; masks refer to positions in the ground tuple.
    """

    field: Field
    ground: tuple
    entries: dict

    def __post_init__(self):
        if len(self.ground) > MAX_GROUND:
            raise TooLarge(f"ground of {len(self.ground)} elements exceeds {MAX_GROUND}")

    @property
    def ground_size(self) -> int:
        return len(self.ground)

    def x_side(self) -> list[int]:
        return sorted({a for a, _, _ in self.entries})

    def y_side(self) -> list[int]:
        return sorted({b for _, b, _ in self.entries})

    def z_side(self) -> list[int]:
        return sorted({c for _, _, c in self.entries})


def generate_P(q: int, ground=None, field: Field | None = None) -> Tensor:
    """Balanced tripartitioning tensor: ordered partitions of the ground
    into three q-sets, all coefficients one."""
    from .fields import prime_field

    field = field or prime_field()
    if ground is None:
        ground = tuple(range(3 * q))
    ground = tuple(ground)
    if len(ground) != 3 * q:
        raise ShapeError(f"ground size {len(ground)} != 3q = {3 * q}")
    if len(ground) > MAX_P_GROUND:
        raise TooLarge(f"3q = {len(ground)} exceeds enumeration bound {MAX_P_GROUND}")
    m = len(ground)
    one = field.one
    entries = {}
    positions = range(m)
    for a_elems in combinations(positions, q):
        amask = mask_of(a_elems)
        rest = [p for p in positions if not (amask >> p) & 1]
        for b_elems in combinations(rest, q):
            bmask = mask_of(b_elems)
            cmask = ((1 << m) - 1) ^ amask ^ bmask
            entries[(amask, bmask, cmask)] = one
    return Tensor(field, ground, entries)


def kronecker(s: Tensor, t: Tensor) -> Tensor:
    """Kronecker product on the disjoint union of grounds."""
    if s.field != t.field:
        raise ShapeError("tensors over different fields")
    if set(s.ground) & set(t.ground):
        raise GroundOverlap("grounds must be disjoint")
    ground = s.ground + t.ground
    shift = len(s.ground)
    mul = s.field.mul
    entries = {}
    for (a1, b1, c1), v1 in s.entries.items():
        for (a2, b2, c2), v2 in t.entries.items():
            key = (a1 | (a2 << shift), b1 | (b2 << shift), c1 | (c2 << shift))
            entries[key] = mul(v1, v2)
    return Tensor(s.field, ground, entries)


def kron_power(t: Tensor, s: int) -> Tensor:
    """s-th Kronecker power on relabeled int grounds (copy j gets offset j*m)."""
    m = len(t.ground)
    acc = None
    for j in range(s):
        copy = Tensor(t.field, tuple(j * m + e for e in range(m)), dict(t.entries))
        acc = copy if acc is None else kronecker(acc, copy)
    return acc


def tensor_eval(t: Tensor, x: dict, y: dict, z: dict):
    """Direct summation oracle: sum of coeff * x_A * y_B * z_C."""
    f = t.field
    total = f.zero
    mul = f.mul
    try:
        for (a, b, c), coeff in t.entries.items():
            total = f.add(total, mul(mul(coeff, x[a]), mul(y[b], z[c])))
    except KeyError as exc:
        raise UnassignedInput(f"assignment missing mask {exc.args[0]}") from None
    return total


@dataclass(frozen=True)
class RankDecomposition:
    """Rank-r certificate: three side-by-r coefficient matrices.

    side_* list the subset masks indexing each slot (colex order for
    generated decompositions); row i of Umat holds the coefficients of
    x_{side_x[i]} across the r rank-one terms.
    """

    field: Field
    ground_size: int
    side_x: tuple
    side_y: tuple
    side_z: tuple
    Umat: tuple
    Vmat: tuple
    Wmat: tuple

    @property
    def rank(self) -> int:
        return len(self.Umat[0]) if self.Umat else 0

    def nonzero_columns(self):
        """Per term l: lists of (side index, coeff) with nonzero coefficient."""
        r = self.rank
        cols_x = [[] for _ in range(r)]
        cols_y = [[] for _ in range(r)]
        cols_z = [[] for _ in range(r)]
        zero = self.field.zero
        for mat, cols in ((self.Umat, cols_x), (self.Vmat, cols_y), (self.Wmat, cols_z)):
            for i, row in enumerate(mat):
                for l, v in enumerate(row):
                    if v != zero:
                        cols[l].append((i, v))
        return cols_x, cols_y, cols_z


def _check_shapes(dec: RankDecomposition):
    r = dec.rank
    for side, mat, label in ((dec.side_x, dec.Umat, "U"), (dec.side_y, dec.Vmat, "V"),
                             (dec.side_z, dec.Wmat, "W")):
        if len(mat) != len(side):
            raise ShapeError(f"{label} has {len(mat)} rows for {len(side)} side entries")
        for row in mat:
            if len(row) != r:
                raise ShapeError(f"{label} row width {len(row)} != rank {r}")


def verify_decomposition(t: Tensor, dec: RankDecomposition):
    """None when the decomposition reproduces the tensor exactly, else the
    first failing (A,B,C) triple in colex order."""
    _check_shapes(dec)
    if dec.field != t.field:
        raise ShapeError("decomposition field differs from tensor field")
    sx, sy, sz = set(dec.side_x), set(dec.side_y), set(dec.side_z)
    for (a, b, c) in t.entries:
        if a not in sx or b not in sy or c not in sz:
            raise ShapeError("side index lists do not cover the tensor support")
    f = t.field
    mul = f.mul
    acc: dict = {}
    cols_x, cols_y, cols_z = dec.nonzero_columns()
    for l in range(dec.rank):
        for i, u in cols_x[l]:
            a = dec.side_x[i]
            for j, v in cols_y[l]:
                uv = mul(u, v)
                b = dec.side_y[j]
                for k, w in cols_z[l]:
                    key = (a, b, dec.side_z[k])
                    prev = acc.get(key, f.zero)
                    s = f.add(prev, mul(uv, w))
                    if s == f.zero:
                        acc.pop(key, None)
                    else:
                        acc[key] = s
    keys = set(acc) | set(t.entries)
    for key in sorted(keys):
        if acc.get(key, f.zero) != t.entries.get(key, f.zero):
            return key
    return None


def trivial_decomposition(t: Tensor) -> RankDecomposition:
    """One rank-one term per nonzero entry; always verifies."""
    side_x = t.x_side()
    side_y = t.y_side()
    side_z = t.z_side()
    ix = {m: i for i, m in enumerate(side_x)}
    iy = {m: i for i, m in enumerate(side_y)}
    iz = {m: i for i, m in enumerate(side_z)}
    terms = sorted(t.entries.items())
    r = len(terms)
    zero, one = t.field.zero, t.field.one
    U = [[zero] * r for _ in side_x]
    V = [[zero] * r for _ in side_y]
    W = [[zero] * r for _ in side_z]
    for l, ((a, b, c), coeff) in enumerate(terms):
        U[ix[a]][l] = coeff
        V[iy[b]][l] = one
        W[iz[c]][l] = one
    return RankDecomposition(t.field, len(t.ground), tuple(side_x), tuple(side_y),
                             tuple(side_z), tuple(map(tuple, U)), tuple(map(tuple, V)),
                             tuple(map(tuple, W)))


def subtensor(t: Tensor, drop_mask: int, x_req: int, y_req: int, z_req: int) -> Tensor:
    """Restrict to entries matching the required pattern on the dropped
    elements, then strip those elements from the ground."""
    keep_positions = [p for p in range(len(t.ground)) if not (drop_mask >> p) & 1]
    ground = tuple(t.ground[p] for p in keep_positions)
    squeeze = {p: i for i, p in enumerate(keep_positions)}

    def compress(mask):
        out = 0
        for p in mask_bits(mask & ~drop_mask):
            out |= 1 << squeeze[p]
        return out

    entries = {}
    for (a, b, c), v in t.entries.items():
        if (a & drop_mask) == x_req and (b & drop_mask) == y_req and (c & drop_mask) == z_req:
            entries[(compress(a), compress(b), compress(c))] = v
    return Tensor(t.field, ground, entries)


def _fmt_mask(mask: int) -> str:
    return "{" + ",".join(str(e) for e in mask_bits(mask)) + "}"


def _parse_mask(tok: str, lineno: int) -> int:
    tok = tok.strip()
    if not (tok.startswith("{") and tok.endswith("}")):
        raise ParseError(f"bad subset token {tok!r}", lineno)
    body = tok[1:-1]
    return mask_of(int(t) for t in body.split(",")) if body else 0


def write_decomposition(dec: RankDecomposition) -> str:
    """Rank-decomposition file v1."""
    lines = ["rankdec v1", f"field {dec.field.spec_string()}", f"r={dec.rank}"]
    for label, side in (("xside", dec.side_x), ("yside", dec.side_y), ("zside", dec.side_z)):
        lines.append(f"{label}:")
        lines.extend(_fmt_mask(m) for m in side)
    fmt = dec.field.format_value
    for label, mat in (("U", dec.Umat), ("V", dec.Vmat), ("W", dec.Wmat)):
        lines.append(f"{label}:")
        lines.extend(" ".join(fmt(v) for v in row) for row in mat)
    return "\n".join(lines) + "\n"


def parse_decomposition(text: str) -> RankDecomposition:
    field = None
    r = None
    sides = {"xside": [], "yside": [], "zside": []}
    mats = {"U": [], "V": [], "W": []}
    section = None
    saw_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not saw_header:
            if line != "rankdec v1":
                raise ParseError("expected 'rankdec v1' header", lineno)
            saw_header = True
            continue
        if line.startswith("field "):
            field = parse_field_spec(line[6:])
            continue
        if line.startswith("r="):
            r = int(line[2:])
            continue
        if line.rstrip(":") in ("xside", "yside", "zside", "U", "V", "W") and line.endswith(":"):
            section = line[:-1]
            continue
        if section in sides:
            sides[section].append(_parse_mask(line, lineno))
        elif section in mats:
            if field is None:
                raise ParseError("matrix block before field declaration", lineno)
            try:
                mats[section].append(tuple(field.parse_value(t) for t in line.split()))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
        else:
            raise ParseError(f"unexpected content {line!r}", lineno)
    if field is None or r is None:
        raise ParseError("missing field or r declaration")
    ground_size = 0
    for side in sides.values():
        for m in side:
            if m:
                ground_size = max(ground_size, m.bit_length())
    dec = RankDecomposition(field, ground_size,
                            tuple(sides["xside"]), tuple(sides["yside"]), tuple(sides["zside"]),
                            tuple(mats["U"]), tuple(mats["V"]), tuple(mats["W"]))
    _check_shapes(dec)
    if dec.rank != r:
        raise ParseError(f"declared r={r} but matrices have {dec.rank} columns")
    return dec
