import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from kronscale.circuit import CircuitBuilder
from kronscale.fields import Rng


def random_skew_circuit(field, rng: Rng, var_names, n_gates=40, q=1, force_degree=None):
    """Random q-skew circuit over the given variables.

    Gates mix adds and muls; every mul keeps one side of formal degree <= q.
    When force_degree is set, the output is multiplied up to at least that
    formal degree using degree-1 factors.
    """
    bld = CircuitBuilder(field)
    xs = [bld.inp(name) for name in var_names]
    degs = {x: 1 for x in xs}
    low_pool = list(xs)
    for x in xs:
        c = field.random(rng, nonzero=True)
        g = bld.add(bld.mul(bld.const(c), x), bld.const(field.random(rng)))
        degs[g] = 1
        low_pool.append(g)
    for _ in range((q - 1) * len(xs)):
        a = rng.choice([g for g in low_pool if degs[g] < q])
        b = rng.choice(xs)
        g = bld.mul(a, b)
        degs[g] = degs[a] + 1
        low_pool.append(g)
    pool = list(low_pool)
    for _ in range(n_gates):
        if rng.below(2):
            a, b = rng.choice(pool), rng.choice(pool)
            g = bld.add(a, b)
            degs[g] = max(degs[a], degs[b])
        else:
            a = rng.choice(pool)
            b = rng.choice(low_pool)
            g = bld.mul(a, b)
            degs[g] = degs[a] + degs[b]
        pool.append(g)
    out = pool[-1]
    if force_degree is not None:
        while degs[out] < force_degree:
            b = rng.choice(xs)
            new = bld.mul(out, b)
            degs[new] = degs[out] + 1
            out = new
    bld.set_outputs([out])
    return bld.build()
