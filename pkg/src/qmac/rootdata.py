"""Root systems, Weyl groups and lattice combinatorics for finite-type Cartan data.

All weight and root vectors in this package are tuples of ``Fraction`` in
simple-root coordinates unless a method name says otherwise.  The stored
bilinear form is ``<alpha_i, alpha_j> = d_i a_ij`` with symmetrizers ``d_i``,
so ``<Lambda_i, alpha_j> = delta_ij d_j``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product

F0 = Fraction(0)
F1 = Fraction(1)

_WEYL_CAP = 10_000


class NotFiniteType(ValueError):
    """The given Cartan matrix is not of finite type.

    Carries the order and determinant of the first non-positive leading
    principal minor of the symmetrized matrix.
    """

    def __init__(self, message, minor_order, minor_det):
        super().__init__(message)
        self.minor_order = minor_order
        self.minor_det = minor_det


def _label_cartan(label):
    label = label.strip().upper()
    family, rank = label[0], label[1:]
    if not rank.isdigit():
        raise ValueError("unrecognized root-system label %r" % label)
    r = int(rank)
    if family == "A" and r >= 1:
        a = [[0] * r for _ in range(r)]
        for i in range(r):
            a[i][i] = 2
            if i + 1 < r:
                a[i][i + 1] = -1
                a[i + 1][i] = -1
        return a
    if family == "B" and r == 2:
        return [[2, -2], [-1, 2]]
    if family == "G" and r == 2:
        return [[2, -1], [-3, 2]]
    raise ValueError("unsupported root-system label %r" % label)


def _symmetrizers(a):
    r = len(a)
    d = [None] * r
    for start in range(r):
        if d[start] is not None:
            continue
        d[start] = F1
        stack = [start]
        while stack:
            i = stack.pop()
            for j in range(r):
                if i != j and a[i][j] != 0:
                    dj = d[i] * Fraction(a[i][j], a[j][i])
                    if d[j] is None:
                        d[j] = dj
                        stack.append(j)
                    elif d[j] != dj:
                        raise NotFiniteType("Cartan matrix is not symmetrizable")
    # scale to coprime positive integers
    from math import gcd, lcm
    L = 1
    for x in d:
        L = lcm(L, x.denominator)
    ints = [int(x * L) for x in d]
    g = 0
    for x in ints:
        g = gcd(g, x)
    return tuple(x // g for x in ints)


class WeylElement:
    """A Weyl-group element: reduced word, action matrix on simple-root
    coordinates, and length."""

    __slots__ = ("word", "matrix", "length")

    def __init__(self, word, matrix, length):
        self.word = word
        self.matrix = matrix
        self.length = length

    def action(self, mu):
        return tuple(sum(row[j] * mu[j] for j in range(len(mu))) for row in self.matrix)

    def __repr__(self):
        return "w[%s]" % ".".join(str(i + 1) for i in self.word) if self.word else "w[e]"

    def __eq__(self, other):
        return isinstance(other, WeylElement) and self.matrix == other.matrix

    def __hash__(self):
        return hash(self.matrix)


class RootSystem:
    """Finite-type root-system data built from a Cartan matrix or a label."""

    def __init__(self, cartan, d=None):
        if isinstance(cartan, str):
            cartan = _label_cartan(cartan)
        a = [[int(x) for x in row] for row in cartan]
        r = len(a)
        for i, row in enumerate(a):
            if len(row) != r or row[i] != 2:
                raise ValueError("malformed Cartan matrix")
            for j in range(r):
                if i != j and (row[j] > 0 or (a[i][j] == 0) != (a[j][i] == 0)):
                    raise ValueError("malformed Cartan matrix")
        self.rank = r
        self.cartan = tuple(tuple(row) for row in a)
        self.d = tuple(int(x) for x in d) if d is not None else _symmetrizers(a)
        self.form = tuple(tuple(Fraction(self.d[i] * a[i][j]) for j in range(r))
                          for i in range(r))
        self._check_finite_type()
        self.fund_in_alpha = self._invert_cartan()
        self.rho = tuple(sum(self.fund_in_alpha[j][i] for j in range(r))
                         for i in range(r))
        self.positive_roots = self._positive_roots()
        self._weyl = None
        self._par_cache = {}

    # -- construction checks ---------------------------------------------------

    def _check_finite_type(self):
        r = self.rank
        for k in range(1, r + 1):
            minor = [[self.form[i][j] for j in range(k)] for i in range(k)]
            det = _det_fraction(minor)
            if det <= 0:
                raise NotFiniteType(
                    "symmetrized Cartan matrix is not positive definite: "
                    "leading principal minor %d has determinant %s" % (k, det),
                    k, det)

    def _invert_cartan(self):
        """Rows j give the fundamental weight Lambda_j in simple-root coordinates."""
        r = self.rank
        aug = [[Fraction(self.cartan[i][j]) for j in range(r)] +
               [F1 if i == j else F0 for j in range(r)] for i in range(r)]
        for col in range(r):
            piv = next(i for i in range(col, r) if aug[i][col])
            aug[col], aug[piv] = aug[piv], aug[col]
            pv = aug[col][col]
            aug[col] = [x / pv for x in aug[col]]
            for i in range(r):
                if i != col and aug[i][col]:
                    f = aug[i][col]
                    aug[i] = [x - f * y for x, y in zip(aug[i], aug[col])]
        inv = [[aug[i][r + j] for j in range(r)] for i in range(r)]
        # Lambda_j = sum_i inv[i][j] alpha_i
        return tuple(tuple(inv[i][j] for i in range(r)) for j in range(r))

    def _positive_roots(self):
        roots = {tuple(F1 if j == i else F0 for j in range(self.rank))
                 for i in range(self.rank)}
        frontier = set(roots)
        while frontier:
            new = set()
            for beta in frontier:
                for i in range(self.rank):
                    img = self.simple_reflection(i, beta)
                    if img not in roots and all(x >= 0 for x in img):
                        new.add(img)
            roots |= new
            frontier = new
        return tuple(sorted(roots, key=lambda v: (sum(v), v)))

    # -- basic geometry ----------------------------------------------------------

    def alpha(self, i):
        return tuple(F1 if j == i else F0 for j in range(self.rank))

    def fund_weight(self, j):
        return self.fund_in_alpha[j]

    def pairing_alpha(self, mu, nu):
        """Killing pairing of two vectors in simple-root coordinates."""
        acc = F0
        for i, mi in enumerate(mu):
            if mi:
                row = self.form[i]
                acc += mi * sum(row[j] * nu[j] for j in range(self.rank) if nu[j])
        return acc

    def alpha_from_fund(self, coords):
        """Convert fundamental-weight coordinates to simple-root coordinates."""
        coords = [Fraction(x) for x in coords]
        return tuple(sum(self.fund_in_alpha[j][i] * coords[j] for j in range(self.rank))
                     for i in range(self.rank))

    def fund_from_alpha(self, mu):
        """Coordinates ``<mu, alpha_j^vee>`` in the fundamental-weight basis."""
        return tuple(sum(Fraction(self.cartan[j][i]) * mu[i] for i in range(self.rank))
                     for j in range(self.rank))

    def simple_reflection(self, i, mu):
        ci = sum(Fraction(self.cartan[i][j]) * mu[j] for j in range(self.rank))
        return tuple(x - ci if j == i else x for j, x in enumerate(mu))

    def height(self, mu):
        return sum(mu)

    def is_dominant(self, mu):
        return all(x >= 0 for x in self.fund_from_alpha(mu))

    def in_positive_cone(self, mu):
        """True when mu is a nonnegative integer combination of simple roots."""
        return all(x >= 0 and Fraction(x).denominator == 1 for x in mu)

    # -- Weyl group ---------------------------------------------------------------

    def weyl_elements(self):
        """All Weyl-group elements with reduced words and lengths (BFS order)."""
        if self._weyl is not None:
            return self._weyl
        r = self.rank
        refl = []
        for i in range(r):
            mat = tuple(tuple((F1 if k == j else F0) - (Fraction(self.cartan[i][j]) if k == i else F0)
                              for j in range(r)) for k in range(r))
            refl.append(mat)
        ident = tuple(tuple(F1 if i == j else F0 for j in range(r)) for i in range(r))
        seen = {ident: ((), 0)}
        order = [WeylElement((), ident, 0)]
        frontier = [ident]
        while frontier:
            nxt = []
            for mat in frontier:
                word, length = seen[mat]
                for i in range(r):
                    newmat = _mat_mul(refl[i], mat)
                    if newmat not in seen:
                        seen[newmat] = ((i,) + word, length + 1)
                        order.append(WeylElement((i,) + word, newmat, length + 1))
                        nxt.append(newmat)
                        if len(seen) > _WEYL_CAP:
                            raise NotFiniteType("Weyl group exceeds the configured cap")
            frontier = nxt
        self._weyl = tuple(order)
        return self._weyl

    def longest_element(self):
        return self.weyl_elements()[-1]

    def shifted_action(self, w, mu):
        """The rho-shifted action ``w . mu = w(mu + rho) - rho``."""
        shifted = tuple(x + y for x, y in zip(mu, self.rho))
        img = w.action(shifted)
        return tuple(x - y for x, y in zip(img, self.rho))

    # -- lattice combinatorics -------------------------------------------------------

    def kostant_partition(self, mu):
        """Number of ways to write mu as a nonnegative integer combination of
        positive roots (0 when mu is outside the positive root lattice)."""
        mu = tuple(Fraction(x) for x in mu)
        if not self.in_positive_cone(mu):
            return 0
        return self._par(mu, 0)

    def _par(self, mu, idx):
        if not any(mu):
            return 1
        if idx >= len(self.positive_roots):
            return 0
        key = (mu, idx)
        hit = self._par_cache.get(key)
        if hit is not None:
            return hit
        beta = self.positive_roots[idx]
        total = 0
        cur = mu
        while all(x >= 0 for x in cur):
            total += self._par(cur, idx + 1)
            cur = tuple(x - y for x, y in zip(cur, beta))
        self._par_cache[key] = total
        return total

    def support_box(self, k_map):
        """The set ``{ sum m_a a : 0 <= m_a <= k_a }`` over positive roots,
        together with its top element Theta = ``sum k_a a``."""
        roots = self.positive_roots
        ks = [int(k_map[beta]) for beta in roots]
        box = set()
        for combo in product(*[range(k + 1) for k in ks]):
            vec = tuple(sum(c * beta[i] for c, beta in zip(combo, roots))
                        for i in range(self.rank))
            box.add(vec)
        theta = tuple(sum(k * beta[i] for k, beta in zip(ks, roots))
                      for i in range(self.rank))
        return tuple(sorted(box, key=lambda v: (sum(v), v))), theta

    # -- rendering ---------------------------------------------------------------

    def label_guess(self):
        """The built-in label that reproduces this Cartan data, else ``rank-N``."""
        for family in "ABG":
            label = "%s%d" % (family, self.rank)
            try:
                cand = _label_cartan(label)
            except ValueError:
                continue
            if (tuple(tuple(row) for row in cand) == self.cartan
                    and _symmetrizers(cand) == self.d):
                return label
        return "rank-%d" % self.rank

    def json_obj(self):
        return {"cartan": [list(map(int, row)) for row in self.cartan],
                "d": list(self.d)}

    def __repr__(self):
        return "RootSystem(cartan=%s, d=%s)" % (self.cartan, self.d)


def _mat_mul(a, b):
    n = len(a)
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n))
                 for i in range(n))


def _det_fraction(m):
    m = [row[:] for row in m]
    n = len(m)
    det = F1
    for col in range(n):
        piv = next((i for i in range(col, n) if m[i][col]), None)
        if piv is None:
            return F0
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        inv = 1 / m[col][col]
        for i in range(col + 1, n):
            if m[i][col]:
                f = m[i][col] * inv
                m[i] = [x - f * y for x, y in zip(m[i], m[col])]
    return det


@lru_cache(maxsize=None)
def root_system(label):
    """Cached root systems for plain labels."""
    return RootSystem(label)
