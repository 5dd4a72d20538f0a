"""Independent oracle for frozen constants used in test_qfield.py / test_rootdata.py.

Computes the expected values with sympy (no imports from qmac) and prints
them; the literals in the tests were copied from this script's output.

Run:  python3 tests/oracles/gen_scalar_values.py
"""

from fractions import Fraction
from itertools import product

import sympy as sp

q = sp.Symbol("q")


def q_int(n):
    return sp.cancel((q**n - q**-n) / (q - q**-1))


def q_fact(n):
    out = sp.Integer(1)
    for i in range(1, n + 1):
        out *= q_int(i)
    return sp.cancel(out)


def main():
    print("[-2]_q =", sp.expand(q_int(-2)))
    print("[3]_q  =", sp.expand(q_int(3)))
    print("binom(4,2) =", sp.expand(sp.cancel(q_fact(4) / (q_fact(2) * q_fact(2)))))
    print("binom(5,2) =", sp.expand(sp.cancel(q_fact(5) / (q_fact(2) * q_fact(3)))))

    # chi for sl2, k=1: 1 - q^{-2<a,la>}; at <a,la> = -2 the exponent is +4
    print("chi(<a,la>=-2) =", sp.expand(1 - q**4))

    # A2 Killing form on fundamental weights: B = d_i a_ij, Lambda = B^{-1}-ish
    A = sp.Matrix([[2, -1], [-1, 2]])
    B = A  # d = (1,1)
    # Lambda_j = sum_i (A^{-1})_ij alpha_i ; <L1,L1> = (A^{-1} row) B (A^{-1} row)^T
    Ainv = A.inv()
    l1 = Ainv[:, 0]
    print("A2 <L1,L1> =", (l1.T * B * l1)[0, 0])

    # B2 positive roots by reflection closure (alpha-basis, cartan [[2,-2],[-1,2]])
    cart = [[2, -2], [-1, 2]]

    def refl(i, v):
        w = list(v)
        w[i] -= sum(cart[i][j] * v[j] for j in range(2))
        return tuple(w)

    roots = {(1, 0), (0, 1)}
    frontier = set(roots)
    while frontier:
        nxt = set()
        for v in frontier:
            for i in range(2):
                r = refl(i, v)
                if all(c >= 0 for c in r) and r not in roots:
                    nxt.add(r)
        roots |= nxt
        frontier = nxt
    print("B2 positive roots:", sorted(roots), "count =", len(roots))

    # A2 support box for k_alpha = 1 on all three positive roots
    pos = [(1, 0), (0, 1), (1, 1)]
    box = set()
    for ms in product(range(2), repeat=3):
        v = tuple(sum(m * r[c] for m, r in zip(ms, pos)) for c in range(2))
        box.add(v)
    print("A2 k=1 box:", sorted(box), "count =", len(box))

    # Kostant partition A2, mu = a1+a2: number of N-combinations of pos roots
    count = 0
    for ms in product(range(3), repeat=3):
        v = tuple(sum(m * r[c] for m, r in zip(ms, pos)) for c in range(2))
        if v == (1, 1):
            count += 1
    print("A2 Par(a1+a2) =", count)

    # A1 shifted action: s1.(mu) = s1(mu+rho)-rho with rho = a/2, s1(a) = -a
    mu = Fraction(0)
    rho = Fraction(1, 2)
    print("A1 s1.rho-shifted 0 =", -(mu + rho) - rho, "* alpha")

    # Laurent expansions under q = exp(eps)
    eps = sp.Symbol("eps")
    for name, expr in [
        ("[2]_q", 2 * sp.cosh(eps)),
        ("1/(q-1/q)", 1 / (2 * sp.sinh(eps))),
        ("q^(1/2)", sp.exp(eps / 2)),
    ]:
        print("eps-series of %s:" % name, sp.series(expr, eps, 0, 5))


if __name__ == "__main__":
    main()
