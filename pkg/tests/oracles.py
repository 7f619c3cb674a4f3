"""Independent reference computations used only by the tests.

Nothing here imports the algorithms under test; they work from the raw
transition structure or from plain arithmetic.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def post(ts, s):
    return {t for _, _, t in ts.edges[s]}


def close(a, b, delta):
    return max((abs(Fraction(x) - Fraction(y)) for x, y in zip(a, b)), default=0) <= Fraction(delta)


def relation_bruteforce(concrete, abstract, eps_hat):
    """Largest relation satisfying every InitSOP clause, by enumerating all subsets of R0.

    Returns ``None`` when no subset (not even the empty one) satisfies the
    initial-state clauses. Subsets are encoded as bitmasks and checked in
    vectorized form.
    """
    r0 = [(z, zh) for z in range(len(concrete)) for zh in range(len(abstract))
          if close(concrete.outputs[z], abstract.outputs[zh], eps_hat)]
    k = len(r0)
    assert k <= 16, "oracle limited to small candidate sets"
    masks = np.arange(1 << k, dtype=np.int64)
    member = np.array([(masks >> b) & 1 for b in range(k)], dtype=bool)  # (k, 2^k)
    pos = {p: b for b, p in enumerate(r0)}

    def any_of(pairs):
        bits = [pos[p] for p in pairs if p in pos]
        if not bits:
            return np.zeros(1 << k, dtype=bool)
        return member[bits].any(axis=0)

    ok = np.ones(1 << k, dtype=bool)
    for b, (z, zh) in enumerate(r0):
        cond = np.ones(1 << k, dtype=bool)
        for z2 in post(concrete, z):
            cond &= any_of([(z2, a) for a in post(abstract, zh)])
        for zh2 in post(abstract, zh):
            cond &= any_of([(c, zh2) for c in post(concrete, z)])
        ok &= ~member[b] | cond
    for z in concrete.initial & concrete.secret:
        ok &= any_of([(z, a) for a in abstract.initial & abstract.secret])
    for zh in abstract.initial - abstract.secret:
        ok &= any_of([(c, zh) for c in concrete.initial - concrete.secret])
    valid = masks[ok]
    if valid.size == 0:
        return None
    union = int(np.bitwise_or.reduce(valid))
    return frozenset(p for b, p in enumerate(r0) if union >> b & 1)


def opaque_by_runs(ts, delta, depth):
    """Opacity by explicit enumeration of secret runs and cover runs up to ``depth``.

    Feasible only for tiny systems; exhaustive over state sequences.
    """
    n = len(ts)
    secret_init = sorted(ts.initial & ts.secret)
    cover_init = ts.initial - ts.secret
    for z0 in secret_init:
        frontier = [(z0,)]
        for _ in range(depth + 1):
            nxt = []
            for run in frontier:
                covers = {s for s in cover_init if close(ts.outputs[run[0]], ts.outputs[s], delta)}
                for z in run[1:]:
                    covers = {t for s in covers for t in post(ts, s) if close(ts.outputs[z], ts.outputs[t], delta)}
                if not covers:
                    return False
                nxt.extend(run + (t,) for t in sorted(post(ts, run[-1])))
            frontier = nxt
            if len(frontier) > 20000:
                break
    return True


def cycle_products(slopes: dict):
    """Products of slopes along every elementary cycle, via brute-force permutations."""
    nodes = sorted({a for a, _ in slopes} | {b for _, b in slopes})
    seen, out = set(), {}
    for r in range(2, len(nodes) + 1):
        for perm in itertools.permutations(nodes, r):
            if perm[0] != min(perm):
                continue
            edges = [(perm[k], perm[(k + 1) % r]) for k in range(r)]
            if all(e in slopes for e in edges):
                key = perm
                if key not in seen:
                    seen.add(key)
                    out[key] = math.prod(slopes[e] for e in edges)
    return out


def aggregate_slopes(kappas, rho, gamma, eps, k_d):
    """Hand formulas for linear certificates."""
    kbar = max(k ** ((eps - 1) / eps) for k in kappas)
    rbar = max(k ** (-k_d / eps) * rho for k in kappas)
    ghat = max(k ** (-k_d / eps) * gamma for k in kappas)
    return kbar, rbar, ghat


def dec(v) -> str:
    """Decimal text of a rational grid value, e.g. Fraction(1, 5) -> '0.2'."""
    from decimal import Decimal

    v = Fraction(v)
    return format(Decimal(v.numerator) / Decimal(v.denominator), "f")


def local_symbol_map(symbols: dict) -> dict:
    return {(x, mode, counter): name for name, (x, mode, counter) in symbols.items()}


def local_state_key(ts, s):
    lab = ts.states[s]
    return (dec(ts.coordinates(s)[0]), lab.mode, lab.counter)


def labeled_edges(ts, names):
    """Local edges as (from, mode, w, to) with golden symbol names."""
    return {(names[local_state_key(ts, s)], u, dec(w[0]), names[local_state_key(ts, t)])
            for s in range(len(ts)) for u, w, t in ts.edges[s]}


def z_names(net, parts, q_symbols, z_symbols):
    """Golden network symbol of every composed state, via the local symbols."""
    q = local_symbol_map({k: tuple(v) for k, v in q_symbols.items()})
    z = {tuple(v): k for k, v in z_symbols.items()}
    return {s: z[tuple(q[local_state_key(p, p.index[l])] for p, l in zip(parts, lab))]
            for s, lab in enumerate(net.states)}


def relation_instances(count, max_r0=16):
    """Seeded (seed, concrete, abstract, eps_hat) quadruples whose initial candidate set R0 is small."""
    from netopacity.bundled import random_fts

    found, seed = [], 0
    while len(found) < count:
        c = random_fts(seed, max_states=4)
        a = random_fts(seed + 50_000, max_states=4)
        eps = Fraction(seed % 3, 2)
        r0 = sum(1 for z in range(len(c)) for zh in range(len(a))
                 if abs(c.outputs[z][0] - a.outputs[zh][0]) <= eps)
        if r0 <= max_r0:
            found.append((seed, c, a, eps))
        seed += 1
    return found
