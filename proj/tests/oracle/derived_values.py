#!/usr/bin/env python3
"""Independent recomputation of the reference values frozen in the unit tests.

Uses only the standard library and re-derives every table from the model
definitions rather than calling into the C++ code. Run it and compare with the
constants in tests/unit/*.cpp.
"""
import math
import statistics
from fractions import Fraction


def spectra_pmf(levels, q, r, i):
    """Stay with q, drop d>=1 positions with weight r^(d-1), renormalised."""
    p = [Fraction(0)] * len(levels)
    if i == 0:
        p[0] = Fraction(1)
        return p
    p[i] = q
    norm = sum(r ** (d - 1) for d in range(1, i + 1))
    for d in range(1, i + 1):
        p[i - d] = (1 - q) * r ** (d - 1) / norm
    return p


def quantise(mean, sigma, n):
    mass = {}

    def put(pos, w):
        if w <= 0:
            return
        k = min(max(int(pos), 0), n - 1)
        mass[k] = mass.get(k, 0.0) + w

    if sigma > 0:
        c = round(mean)
        d = mean - c
        s2 = sigma * sigma
        up, down, mid = 0.5 * (s2 + d * d + d), 0.5 * (s2 + d * d - d), 1 - s2 - d * d
        if min(up, down, mid) >= 0:
            put(c - 1, down), put(c, mid), put(c + 1, up)
            return mass
    lo = math.floor(mean)
    w = mean - lo
    put(lo, 1 - w), put(lo + 1, w)
    return mass


def fixture(x_levels, target, drift, k_long, k_fast, sigma, interior, q, r, n_z, fast_set, alpha, beta, delta, gamma):
    levels = [0.0] + interior + [1.0]
    ns, nb = len(levels), n_z + 2
    actions = [("noop", 0)] + [("long", 1)] + [("fast", h) for h in fast_set]
    idx = lambda xi, si, b: (xi * ns + si) * nb + b
    n = x_levels * ns * nb
    P, R, avail = {}, {}, {}
    for xi in range(x_levels):
        for si in range(ns):
            for b in range(nb):
                y = idx(xi, si, b)
                budget = b - 1
                for a, (kind, h) in enumerate(actions):
                    masked = kind == "long" and si > 0
                    avail[y, a] = not masked
                    eff_kind = "noop" if masked else kind
                    base = -(xi - target) ** 2 - (alpha if kind == "long" else 0) - (beta * h * h if kind == "fast" else 0)
                    R[y, a] = -delta if budget < 0 else base
                    if budget < 0:
                        P[y, a] = {y: 1.0}
                        continue
                    eff = 1.0 if eff_kind == "long" else levels[si]
                    hh = h if eff_kind == "fast" else 0
                    mean = xi + drift - k_long * eff - k_fast * hh
                    es = spectra_pmf(levels, Fraction(q).limit_denominator(), Fraction(r).limit_denominator(),
                                     ns - 1 if eff_kind == "long" else si)
                    nxt = b - (0 if eff_kind == "noop" else 1)
                    row = {}
                    for xt, px in quantise(mean, sigma, x_levels).items():
                        for sj in range(ns):
                            if es[sj] > 0:
                                row[idx(xt, sj, nxt)] = row.get(idx(xt, sj, nxt), 0.0) + px * float(es[sj])
                    P[y, a] = row
    return n, actions, P, R, avail


def value_iteration(n, actions, P, R, avail, gamma, sweeps=4000):
    v = [0.0] * n
    for _ in range(sweeps):
        v = [max(R[y, a] + gamma * sum(p * v[t] for t, p in P[y, a].items())
                 for a in range(len(actions)) if avail[y, a]) for y in range(n)]
    return v


def main():
    # spectra
    E = [0, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), 1]
    p = spectra_pmf(E, Fraction(3, 5), Fraction(1, 2), 2)
    print("pmf from 0.5 (q=.6,r=.5):", [float(x) for x in p[:3]], "sum", sum(p))
    std = [0, Fraction(1, 5), Fraction(2, 5), Fraction(3, 5), Fraction(4, 5), 1]
    p = spectra_pmf(std, Fraction(3, 5), Fraction(1, 2), 5)
    print("pmf from 1 (standard):", [repr(float(x)) for x in p])
    p = spectra_pmf(std, Fraction(3, 5), Fraction(1, 2), 1)
    print("pmf from e_1:", [float(x) for x in p[:2]])

    # constraints and rewards
    print("admissible 120:", 120 - 125 / 2 - 0, " 100,50:", 100 - 125 / 2 - 50)
    print("zone 181:", int(abs(181 - 125) - 55 > 0))
    print("base X=M Fast(2) b=.1:", -0.1 * 4, " X=M+10 Long a=1:", -100 - 1)

    # tiny fixture
    n, actions, P, R, avail = fixture(2, 0, 1, 2, 2, 0.0, [], 0.6, 0.5, 1, [1.0], 1, 1, 10, 0.5)
    v = value_iteration(n, actions, P, R, avail, 0.5)
    print("tiny states:", n, " v* =", [repr(x) for x in v])

    # small fixture
    n, actions, P, R, avail = fixture(10, 4.5, 0.5, 1.5, 1.0, 0.5, [0.25, 0.5, 0.75], 0.6, 0.5, 3, [1.0, 2.0],
                                      1, 0.5, 100, 0.9)
    print("small states:", n, " actions:", len(actions))
    v = value_iteration(n, actions, P, R, avail, 0.9, sweeps=600)
    print("small v*[0], min, max:", repr(v[0]), repr(min(v)), repr(max(v)))

    # single-term operator checks on a 3-level fixture with gamma 0
    print("M_long at x=2, v=0, a=1:", -4 - 1, " M_fast at x=2, b=.1:", -4 - 0.1)

    # two-state hand fixture, gamma .9: noop loop -4/(1-g) vs one fast step -5 then 0 forever
    g = 0.9
    print("two-state v(1):", max(-4 / (1 - g), -5.0), " v(0):", 0.0)

    # glucose
    print("A^F after 20 steps from 2:", repr(2 * 0.85 ** 20), " drift G=50:", 0.03 * 50)

    # metrics
    print("std {80,90}:", repr(statistics.stdev([80, 90])))
    tir = [86.5, 89.2, 76.2, 91.0, 83.3]
    print("five-seed mean/std:", repr(statistics.mean(tir)), repr(statistics.stdev(tir)))


if __name__ == "__main__":
    main()
