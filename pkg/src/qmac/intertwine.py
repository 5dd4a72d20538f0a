"""Singular vectors, intertwining maps, and their weighted-trace series.

Given a finite module U with a nonzero zero-weight space U[0], each u in U[0]
determines a vector phi in the (weight-completed) tensor product of a generic
Verma module with U that every Delta(E_i) kills.  Its coefficients are
rational in the q^{<alpha_i, lambda>}; multiplying through by the scalar
product chi(lambda) of wall factors clears every denominator.  Tracing the
resulting map against the weight projections of the Verma module produces an
End(U[0])-valued series whose coefficients B_mu(lambda) are again polynomial.

Conventions used throughout:
  * Verma vectors are F-words acting on the highest-weight vector; module
    vectors are indexed by position in ``module.basis``.
  * omega sends the word F_{i_1}...F_{i_l} to (-1)^l E_{i_1}...E_{i_l}.
  * All linear algebra runs on denominator-cleared Shapovalov matrices; a
    single division by the cleared determinant happens at the end and must be
    exact (otherwise the construction itself is broken, which is reported as
    an InvariantViolation rather than silently tolerated).
"""

import hashlib
import json
import os
from fractions import Fraction
from itertools import product

# Numeric sampling spends nearly all its time on rational arithmetic; gmpy2
# rationals are several times faster than Fraction but semantically identical
# here, so fall back silently when unavailable.
try:
    from gmpy2 import mpq as _mpq
except ImportError:          # pragma: no cover
    _mpq = Fraction

from .linalg import SingularMatrix, bareiss_adjugate, bareiss_solve
from .qfield import (InexactDivision, LambdaPoly, QMatrix, QScalar,
                     exact_div, qs_zero)
from .uqg import VermaVector

__all__ = [
    "InvariantViolation", "SingularVector", "PsiSeries", "BFactor",
    "chi", "singular_vector", "singular_system", "normalize",
    "intertwiner_image", "check_annihilated", "partial_trace",
    "psi_series", "factor_B", "iter_cone_weights",
]


class InvariantViolation(RuntimeError):
    """An identity the construction guarantees failed to hold exactly."""


def iter_cone_weights(rank, depth):
    """Nonnegative integer alpha-coordinate vectors of height <= depth.

    Deterministic order: by height, then lexicographically.
    """
    def rec(prefix, budget):
        if len(prefix) == rank - 1:
            yield prefix + (budget,)
            return
        for c in range(budget + 1):
            yield from rec(prefix + (c,), budget - c)

    for h in range(depth + 1):
        yield from sorted(rec((), h))


def chi(module):
    """Product of wall factors, one per positive root alpha and 1 <= n <= k_alpha.

    The factor is 1 - q^{-2<alpha,lambda+rho> + n<alpha,alpha>}, stored with the
    rho-part folded into the coefficient of the key -2*alpha.
    """
    rs = module.rs
    out = LambdaPoly.one(rs.rank)
    for alpha in rs.positive_roots:
        aa = rs.pairing_alpha(alpha, alpha)
        ar = rs.pairing_alpha(alpha, rs.rho)
        key = tuple(-2 * Fraction(a) for a in alpha)
        for n in range(1, module.k_alpha[alpha] + 1):
            fac = LambdaPoly(rs.rank, {
                (Fraction(0),) * rs.rank: QScalar.q_power(0),
                key: -QScalar.q_power(n * aa - 2 * ar),
            })
            out = out * fac
    return out


class SingularVector:
    """A Delta(E_i)-annihilated vector in (completed) M_lambda tensor U.

    ``pieces`` maps a weight mu (integer alpha-coordinates, in the positive
    cone) to a dict with keys

      words: the Verma basis words at weight mu,
      cols:  the module basis indices at module weight mu,
      num:   matrix of LambdaPoly, rows = words, cols = cols,
      den:   scalar LambdaPoly (== 1 once normalized),

    representing sum_{i,c} num[i][c]/den * (word_i acting on the highest
    weight vector) tensor basis_c.
    """

    def __init__(self, module, u_index, pieces, normalized):
        self.module = module
        self.rs = module.rs
        self.u_index = u_index
        self.pieces = pieces
        self.normalized = normalized

    def as_terms(self):
        """Flatten to {(word, module index): coefficient LambdaPoly}.

        Only valid for a normalized vector (no denominators left).
        """
        if not self.normalized:
            raise ValueError("flattening requires a normalized vector")
        out = {}
        for piece in self.pieces.values():
            for i, w in enumerate(piece["words"]):
                for j, c in enumerate(piece["cols"]):
                    poly = piece["num"][i][j]
                    if poly:
                        out[(w, c)] = poly
        return out

    def coefficient(self, word, col):
        """num/den pair for one (Verma word, module index) slot."""
        rank = self.rs.rank
        mu = tuple(int(x) for x in word_weight_int(rank, word))
        piece = self.pieces.get(mu)
        if piece is None:
            return LambdaPoly.zero(rank), LambdaPoly.one(rank)
        try:
            i = piece["words"].index(word)
            j = piece["cols"].index(col)
        except ValueError:
            return LambdaPoly.zero(rank), piece["den"]
        return piece["num"][i][j], piece["den"]


def word_weight_int(rank, word):
    counts = [0] * rank
    for i in word:
        counts[i] += 1
    return tuple(counts)


def _module_cone_weights(module):
    """Module weights lying in the positive cone, as integer tuples, by height."""
    rs = module.rs
    out = []
    for mu in module.weights:
        if all(c >= 0 and c.denominator == 1 for c in mu):
            out.append(tuple(int(c) for c in mu))
    out.sort(key=lambda m: (sum(m), m))
    return out


def _omega_on_u(module, word, u_index):
    """Coordinates of (-1)^len E_{i_1}...E_{i_l} applied to basis vector u."""
    vec = [qs_zero()] * module.dim
    vec[u_index] = QScalar.q_power(0)
    for i in reversed(word):
        rows = module.e_mats[i].rows
        vec = [sum((rows[m][c] * vec[c] for c in range(module.dim) if vec[c]),
                   qs_zero()) for m in range(module.dim)]
    if len(word) % 2:
        vec = [-x for x in vec]
    return vec


def singular_vector(module, u_index):
    """The canonical annihilated vector attached to zero-weight basis vector u.

    For each module weight mu in the positive cone the coefficient block is
    d_mu * adj(cleared F_mu) * Omega / det(cleared F_mu), where Omega collects
    the omega-images of the basis words on u.
    """
    if u_index not in module.u0:
        raise ValueError("input vector must have weight zero")
    uq, rs = module.uq, module.rs
    rank = rs.rank
    one = LambdaPoly.one(rank)

    pieces = {}
    zero = (0,) * rank
    pieces[zero] = {"words": ((),), "cols": (u_index,),
                    "num": [[one]], "den": one}

    for mu in _module_cone_weights(module):
        if mu == zero:
            continue
        mu_f = tuple(Fraction(c) for c in mu)
        cols = tuple(c for c in range(module.dim)
                     if module.weight_of(c) == mu_f)
        shap = uq.shapovalov_matrix(mu)
        words = shap.basis
        adj, det = bareiss_adjugate(shap.cleared)
        omega = [_omega_on_u(module, w, u_index) for w in words]
        m = len(words)
        num = []
        for i in range(m):
            row = []
            for c in cols:
                acc = LambdaPoly.zero(rank)
                for j in range(m):
                    coeff = omega[j][c]
                    if coeff:
                        acc = acc + adj[i][j].scale_right(shap.d_mu * coeff)
                row.append(acc)
            num.append(row)
        pieces[mu] = {"words": words, "cols": cols, "num": num, "den": det}

    return SingularVector(module, u_index, pieces, normalized=False)


def singular_system(module):
    """Normalized singular vectors for every zero-weight basis vector, in order."""
    return tuple(normalize(singular_vector(module, n)) for n in module.u0)


def normalize(phi):
    """Multiply through by chi(lambda) and clear every denominator.

    The result must be polynomial with lambda-support inside the weight box of
    the module's wall data; both failures raise InvariantViolation.
    """
    if phi.normalized:
        return phi
    module = phi.module
    rs = module.rs
    chi_poly = chi(module)
    box, _ = rs.support_box(module.k_alpha)
    allowed = {tuple(-2 * Fraction(c) for c in pt) for pt in box}
    one = LambdaPoly.one(rs.rank)

    pieces = {}
    for mu, piece in phi.pieces.items():
        num = []
        for row in piece["num"]:
            out_row = []
            for entry in row:
                try:
                    cleared = exact_div(chi_poly * entry, piece["den"])
                except InexactDivision as exc:
                    raise InvariantViolation(
                        "denominator failed to clear at weight %r" % (mu,)
                    ) from exc
                bad = [k for k in cleared.support() if k not in allowed]
                if bad:
                    raise InvariantViolation(
                        "normalized coefficient at weight %r has support "
                        "outside the weight box: %r" % (mu, bad))
                out_row.append(cleared)
            num.append(out_row)
        pieces[mu] = {"words": piece["words"], "cols": piece["cols"],
                      "num": num, "den": one}
    return SingularVector(module, phi.u_index, pieces, normalized=True)


def _delta_f_apply(module, i, terms):
    """Apply Delta(F_i) = F_i tensor K_i^{-1} + 1 tensor F_i to a term dict."""
    rs = module.rs
    frows = module.f_mats[i].rows
    alpha_i = rs.alpha(i)
    out = {}

    def acc(key, poly):
        cur = out.get(key)
        if cur is None:
            if poly:
                out[key] = poly
        else:
            cur = cur + poly
            if cur:
                out[key] = cur
            else:
                del out[key]

    for (w, c), poly in terms.items():
        kfac = QScalar.q_power(-rs.pairing_alpha(alpha_i, module.weight_of(c)))
        acc(((i,) + w, c), poly.scale_right(kfac))
        for m in range(module.dim):
            entry = frows[m][c]
            if entry:
                acc((w, m), poly.scale_right(entry))
    return out


def intertwiner_image(phi, word):
    """Image of (word acting on the highest-weight vector) under the map.

    Returns {(Verma word, module index): LambdaPoly}; the input word's letters
    are applied through the coproduct, rightmost letter first.
    """
    terms = phi.as_terms()
    for i in reversed(word):
        terms = _delta_f_apply(phi.module, i, terms)
    return terms


def check_annihilated(phi):
    """Exact check that Delta(E_i) = E_i tensor 1 + K_i tensor E_i kills phi.

    Word vectors are linearly dependent, so vanishing is tested through the
    contravariant pairing against a weight basis.  Raises InvariantViolation.
    """
    module = phi.module
    uq, rs = module.uq, module.rs
    rank = rs.rank
    terms = phi.as_terms() if phi.normalized else normalize(phi).as_terms()
    for i in range(rank):
        alpha_i = rs.alpha(i)
        erows = module.e_mats[i].rows
        image = {}

        def acc(key, poly):
            cur = image.get(key)
            if cur is None:
                if poly:
                    image[key] = poly
            else:
                cur = cur + poly
                if cur:
                    image[key] = cur
                else:
                    del image[key]

        for (w, c), poly in terms.items():
            ev = uq.apply_e(i, VermaVector.word(rank, w))
            for w2, cpoly in ev.terms.items():
                acc((w2, c), poly * cpoly)
            mu_w = word_weight_int(rank, w)
            kpoly = LambdaPoly.monomial(
                rank, tuple(Fraction(a) for a in alpha_i),
                QScalar.q_power(-rs.pairing_alpha(alpha_i, mu_w)))
            for m in range(module.dim):
                entry = erows[m][c]
                if entry:
                    acc((w, m), (poly * kpoly).scale_right(entry))

        by_weight = {}
        for (w, c), poly in image.items():
            by_weight.setdefault(word_weight_int(rank, w), []).append((w, c, poly))
        for mu, items in by_weight.items():
            for b in uq.weight_basis(mu):
                residues = {}
                for w, c, poly in items:
                    pairing = uq._pair_cleared(b, w)
                    if not pairing:
                        continue
                    cur = residues.get(c)
                    prod = poly * pairing
                    residues[c] = prod if cur is None else cur + prod
                for c, res in residues.items():
                    if res:
                        raise InvariantViolation(
                            "raising operator %d does not kill the vector: "
                            "weight %r, module index %d" % (i, mu, c))


def partial_trace(phis, mu):
    """Trace of the maps through the weight-(lambda - mu) projection.

    ``phis`` is the tuple from singular_system (one normalized vector per
    zero-weight basis vector).  Returns a matrix-valued LambdaPoly over the
    zero-weight space; entry [r][s] takes input column s to output row r.
    Denominators must cancel exactly.

    The diagonal coordinates are obtained from one cleared solve per weight:
    the distinct Verma words appearing in the images form the right-hand
    side, so every image coefficient (a small polynomial) multiplies an
    already-reduced coordinate rather than an adjugate-times-Gram product.
    """
    module = phis[0].module
    uq, rs = module.uq, module.rs
    rank = rs.rank
    u0 = module.u0
    dim0 = len(u0)
    mu = tuple(int(c) for c in mu)

    shap = uq.shapovalov_matrix(mu)
    basis = shap.basis

    contrib = {}
    for col, phi in enumerate(phis):
        suffix_images = {(): phi.as_terms()}

        def image_of(word):
            hit = suffix_images.get(word)
            if hit is None:
                hit = _delta_f_apply(module, word[0], image_of(word[1:]))
                suffix_images[word] = hit
            return hit

        for s, b_s in enumerate(basis):
            for (w, c), poly in image_of(b_s).items():
                if c in u0:
                    contrib.setdefault(w, []).append((s, col, c, poly))

    zero = LambdaPoly.zero(rank)
    if not contrib:
        return _matrix_poly(rank, dim0, [[zero] * dim0 for _ in range(dim0)])

    words = sorted(contrib)
    prows = [[uq._pair_cleared(b, w) for w in words] for b in basis]
    xnum, den = bareiss_solve(shap.cleared, prows)

    row_of = {c: r for r, c in enumerate(u0)}
    numerators = [[zero] * dim0 for _ in range(dim0)]
    for widx, w in enumerate(words):
        for s, col, c, poly in contrib[w]:
            x = xnum[s][widx]
            if x:
                r = row_of[c]
                numerators[r][col] = numerators[r][col] + poly * x

    entries = [[None] * dim0 for _ in range(dim0)]
    for r in range(dim0):
        for col in range(dim0):
            try:
                entries[r][col] = exact_div(numerators[r][col], den)
            except InexactDivision as exc:
                raise InvariantViolation(
                    "trace denominator failed to cancel at weight %r" % (mu,)
                ) from exc

    return _matrix_poly(rank, dim0, entries)


def _matrix_poly(rank, dim, entries):
    """Assemble scalar LambdaPoly entries into one QMatrix-valued LambdaPoly."""
    keys = set()
    for row in entries:
        for e in row:
            keys.update(e.support())
    terms = {}
    for k in keys:
        rows = [[entries[r][c].coeff(k) or qs_zero() for c in range(dim)]
                for r in range(dim)]
        terms[k] = QMatrix(rows)
    return LambdaPoly(rank, terms, normalized=True)


# -- evaluated trace path ---------------------------------------------------------
#
# Generic-weight elimination is exponential in the weight height, so deep
# series are computed by sampling: the whole trace pipeline runs at numeric
# highest weights AND numeric rational q, where every intermediate is a
# single Fraction.  The lambda-dependence of each B_mu is a polynomial in
# the monomials q^{-2<alpha_i, lambda>} supported on the weight box, so it
# is recovered by a tensor-grid fit (per q node); the q-dependence of each
# fitted coefficient is Laurent, so it is recovered from a window of q
# nodes.  Sample weights are anti-dominant (every <alpha, kappa + rho>
# strictly negative, while determinant walls need positive integer values),
# so no sample can degenerate.  Every fit is over-determined and checked:
# one extra grid layer per axis, extra q nodes, and a support bound; any
# mismatch raises InvariantViolation.  Results are exact; no floating point
# is involved.


def _grid_ranges(rs, k_alpha):
    """Per-axis fitted exponent ranges: box coordinate maxima plus a margin.

    The margin keeps one fitted degree beyond the box on each axis, so a
    support violation shows up in the fitted coefficients (and is rejected
    by the box check) before the extra grid layer is even consulted.
    """
    box, _ = rs.support_box(k_alpha)
    cmax = [max(int(p[i]) for p in box) for i in range(rs.rank)]
    return [c + 1 for c in cmax]


def _grid_kappa(rs, u):
    """The weight (simple-root coordinates) with <alpha_i, kappa> = u_i."""
    return tuple(sum(Fraction(u[j]) / rs.d[j] * rs.fund_in_alpha[j][i]
                     for j in range(rs.rank)) for i in range(rs.rank))


class _NumericContext:
    """Everything about one module needed to run the trace at numeric (q, kappa).

    Pure rational arithmetic: the big polynomial intermediates that make the
    symbolic elimination expensive collapse to single numbers here.  Data that
    depends on kappa alone (pairing exponents, evaluated coefficients of the
    normalized vectors) or on q alone (powers, sparse lowering-matrix columns)
    is cached and shared across the sample grid.
    """

    def __init__(self, phis):
        self.phis = phis
        self.module = phis[0].module
        self.uq = self.module.uq
        self.rs = self.module.rs
        rs, module = self.rs, self.module
        self.kexp = [[-_exact_int(rs.pairing_alpha(rs.alpha(i),
                                                   module.weight_of(c)))
                      for c in range(module.dim)] for i in range(rs.rank)]
        # module weight only decreases along the coproduct lowering action,
        # so components outside the positive cone can never return to the
        # zero-weight space and are dropped at generation time
        self.alive = [all(x >= 0 for x in module.weight_of(c))
                      for c in range(module.dim)]
        self.basis_choice = {}
        self._phi_at = {}
        self._qpow = {}
        self._f_sparse = {}
        self._words = {}

    def phi_terms(self, kappa):
        hit = self._phi_at.get(kappa)
        if hit is None:
            rs = self.rs
            hit = []
            for phi in self.phis:
                terms = {}
                for key, poly in phi.as_terms().items():
                    v = poly.evaluate(rs, kappa)
                    if v:
                        terms[key] = v
                hit.append(terms)
            self._phi_at[kappa] = hit
        return hit

    def qpow_for(self, q_val):
        """Shared power cache q -> (e -> q^e); exponents must be integers."""
        hit = self._qpow.get(q_val)
        if hit is None:
            cache = {}

            def qpow(e, _c=cache, _q=q_val):
                v = _c.get(e)
                if v is None:
                    if e.__class__ is not int:
                        if e.denominator != 1:
                            raise ValueError(
                                "fractional q-exponent at numeric q")
                        e = int(e)
                    _c[e] = v = _q ** e
                return v

            self._qpow[q_val] = hit = qpow
        return hit

    def f_sparse(self, q_val):
        """Columns of the lowering matrices at numeric q: [i][c] -> ((m, value), ...).

        Rows whose module weight left the positive cone are dropped (see
        ``alive``); the zero-weight trace never sees them.
        """
        hit = self._f_sparse.get(q_val)
        if hit is None:
            qpow = self.qpow_for(q_val)
            module = self.module
            hit = []
            for mat in module.f_mats:
                cols = []
                for c in range(module.dim):
                    cols.append(tuple(
                        (m, _num_eval(mat.rows[m][c], qpow))
                        for m in range(module.dim)
                        if self.alive[m] and mat.rows[m][c]))
                hit.append(cols)
            self._f_sparse[q_val] = hit
        return hit

    def words(self, mu):
        hit = self._words.get(mu)
        if hit is None:
            self._words[mu] = hit = self.uq.words_of_weight(mu)
        return hit


def _exact_int(x):
    xi = int(x)
    if xi != x:
        raise ValueError("non-integer pairing at a sample weight")
    return xi


def _num_pair_cleared(paa, pth, qpow, w1, w2, memo):
    """Denominator-cleared contravariant pairing at numeric (q, kappa).

    ``paa[i][j]`` is the pairing of simple roots, ``pth[i]`` the pairing of
    alpha_i with the sample highest weight; both integer tables.
    """
    if not w1:
        return 1
    key = (w1, w2)
    hit = memo.get(key)
    if hit is not None:
        return hit
    i, rest = w1[0], w1[1:]
    row = paa[i]
    acc = 0
    pair_ai_nu = 0
    contribs = []
    for p in range(len(w2) - 1, -1, -1):
        j = w2[p]
        if j == i:
            lam_nu = pth[i] - pair_ai_nu
            contribs.append((w2[:p] + w2[p + 1:],
                             qpow(lam_nu) - qpow(-lam_nu)))
        pair_ai_nu += row[j]
    if contribs:
        kfac = qpow(-(pth[i] - sum(row[j] for j in w2) + row[i]))
        for rest_word, factor in contribs:
            sub = _num_pair_cleared(paa, pth, qpow, rest, rest_word, memo)
            if sub:
                acc += kfac * factor * sub
    memo[key] = acc
    return acc


def _num_eval(x, qpow):
    """A QScalar's value, with powers of q drawn from the shared cache."""
    num = 0
    for e, c in x.num.items():
        num += c * qpow(e)
    den = 0
    for e, c in x.den.items():
        den += c * qpow(e)
    return num / den


def _principal_subset(m, target):
    """Indices of a nonsingular target-by-target principal submatrix.

    Symmetric pivoting: 1x1 pivots on nonzero diagonals and, when every
    remaining diagonal vanishes, 2x2 pivots on a nonzero off-diagonal pair
    (determinant -a^2 != 0).  For a symmetric matrix of rank target this
    always succeeds; the simple in-order greedy cannot (a rank-two matrix
    with zero diagonal defeats nested one-by-one extension).
    """
    m = [list(row) for row in m]
    avail = list(range(len(m)))
    chosen = []
    while len(chosen) < target:
        piv = next((i for i in avail if m[i][i]), None)
        if piv is not None:
            chosen.append(piv)
            avail.remove(piv)
            d = m[piv][piv]
            rp = m[piv]
            for a in avail:
                fa = m[a][piv]
                if fa:
                    fa = fa / d
                    ra = m[a]
                    for b in avail:
                        if rp[b]:
                            ra[b] = ra[b] - fa * rp[b]
            continue
        hit = next(((i, j) for i in avail for j in avail
                    if i < j and m[i][j]), None)
        if hit is None or len(chosen) + 2 > target:
            return None
        i, j = hit
        chosen.extend(hit)
        avail.remove(i)
        avail.remove(j)
        a = m[i][j]
        ri, rj = m[i], m[j]
        for x in avail:
            vi, vj = m[x][i] / a, m[x][j] / a
            if vi or vj:
                rx = m[x]
                for y in avail:
                    rx[y] = rx[y] - vi * rj[y] - vj * ri[y]
    return sorted(chosen)


def _num_series_point(ctx, depth, kappa, q_val):
    """Every trace matrix B_mu(kappa) at numeric q; {mu: rows of Fraction}.

    Raises SingularMatrix when a weight space degenerates at the sample
    (cannot happen for anti-dominant kappa and q not 0 or +-1, but checked).
    """
    module, rs = ctx.module, ctx.rs
    rank = rs.rank
    u0 = module.u0
    dim0 = len(u0)
    row_of = {c: r for r, c in enumerate(u0)}
    q_val = _mpq(q_val.numerator, q_val.denominator)
    zero = _mpq(0)

    qpow = ctx.qpow_for(q_val)
    paa = [[_exact_int(x) for x in row] for row in rs.form]
    pth = [_exact_int(rs.pairing_alpha(rs.alpha(i), kappa))
           for i in range(rank)]
    pair_memo = {}

    def pair(w1, w2):
        return _num_pair_cleared(paa, pth, qpow, w1, w2, pair_memo)

    fcols = ctx.f_sparse(q_val)
    kfacs = [[qpow(e) for e in row] for row in ctx.kexp]

    images = []
    for terms in ctx.phi_terms(kappa):
        base = {}
        for key, v in terms.items():
            nv = _num_eval(v, qpow)
            if nv:
                base[key] = nv
        images.append({(): base})

    def image_of(col, word):
        cache = images[col]
        hit = cache.get(word)
        if hit is None:
            i = word[0]
            prev = image_of(col, word[1:])
            fc = fcols[i]
            ki = kfacs[i]
            out = {}
            for (w, c), val in prev.items():
                key = ((i,) + w, c)
                cur = out.get(key)
                add = val * ki[c]
                if cur is None:
                    if add:
                        out[key] = add
                else:
                    cur = cur + add
                    if cur:
                        out[key] = cur
                    else:
                        del out[key]
                for m, entry in fc[c]:
                    key = (w, m)
                    cur = out.get(key)
                    add = val * entry
                    if cur is None:
                        out[key] = add
                    else:
                        cur = cur + add
                        if cur:
                            out[key] = cur
                        else:
                            del out[key]
            cache[word] = hit = out
        return hit

    def select_basis(mu, target):
        chosen = []
        gram = []
        for w in ctx.words(mu):
            row = [pair(b, w) for b in chosen]
            diag = pair(w, w)
            # Schur complement of the candidate against the (nonsingular)
            # Gram of the vectors chosen so far; the pairing is symmetric.
            if chosen:
                y = _fraction_solve(gram, [[v] for v in row])
                schur = diag - sum(r * y[i][0] for i, r in enumerate(row))
            else:
                schur = diag
            if not schur:
                continue
            for g, r in zip(gram, row):
                g.append(r)
            gram.append(row + [diag])
            chosen.append(w)
            if len(chosen) == target:
                break
        if len(chosen) != target:
            # in-order extension can strand a full-rank Gram behind zero
            # diagonals; retry with symmetric pivoting over the full matrix
            words = ctx.words(mu)
            full = [[pair(a, b) for b in words] for a in words]
            sel = _principal_subset(full, target)
            if sel is None:
                raise SingularMatrix(
                    "weight space degenerate at sample weight, mu=%r" % (mu,))
            chosen = [words[s] for s in sel]
            gram = [[full[a][b] for b in sel] for a in sel]
        return tuple(chosen), gram

    out = {}
    for mu in iter_cone_weights(rank, depth):
        target = rs.kostant_partition(mu)
        chosen = ctx.basis_choice.get(mu)
        if chosen is None:
            fresh = True
            chosen, gram = select_basis(mu, target)
            ctx.basis_choice[mu] = chosen
        else:
            # a selection made at one sample is almost always a basis at the
            # next; rebuild its Gram and fall back to reselection if not
            fresh = False
            gram = [[pair(a, b) for b in chosen] for a in chosen]

        rows = [[zero] * dim0 for _ in range(dim0)]
        while True:
            contrib = {}
            for col in range(dim0):
                for s, b_s in enumerate(chosen):
                    for (w, c), val in image_of(col, b_s).items():
                        if c in u0:
                            contrib.setdefault(w, []).append((s, col, c, val))
            if not contrib:
                break
            words = sorted(contrib)
            prows = [[pair(b, w) for w in words] for b in chosen]
            try:
                x = _fraction_solve(gram, prows)
            except SingularMatrix:
                if fresh:
                    raise
                fresh = True
                chosen, gram = select_basis(mu, target)
                ctx.basis_choice[mu] = chosen
                continue
            for widx, w in enumerate(words):
                for s, col, c, val in contrib[w]:
                    xv = x[s][widx]
                    if xv:
                        r = row_of[c]
                        rows[r][col] += val * xv
            break
        out[mu] = rows
    return out


def _fraction_solve(a_rows, b_rows):
    """Gauss-Jordan solve of A·X = B over exact rationals; raises SingularMatrix."""
    n = len(a_rows)
    width = len(b_rows[0]) if b_rows else 0
    m = [list(ar) + list(br) for ar, br in zip(a_rows, b_rows)]
    for k in range(n):
        i0 = next((i for i in range(k, n) if m[i][k]), None)
        if i0 is None:
            raise SingularMatrix("no pivot in column %d" % k)
        m[k], m[i0] = m[i0], m[k]
        inv = _mpq(1) / m[k][k]       # exact: the entries are never floats
        m[k] = [x * inv for x in m[k]]
        for i in range(n):
            if i == k:
                continue
            f = m[i][k]
            if f:
                mk = m[k]
                m[i] = [x - f * y for x, y in zip(m[i], mk)]
    return [row[n:] for row in m]


def _window_guess(rs, depth, k_alpha, big_theta):
    """Initial q-exponent window for the reconstructed trace coefficients.

    Observed supports reach -2*kmax*depth minus one wall-length step on the
    low side and roughly double the wall height on the high side; the guess
    pads each by one unit, and the caller widens on a failed verification.
    """
    kmax = max(k_alpha.values(), default=0)
    ht = int(sum(big_theta))
    dmax = max((int(rs.pairing_alpha(a, a)) // 2
                for a, k in k_alpha.items() if k), default=1)
    return -2 * (kmax * depth + dmax) - 2, 2 * ht + 2


def _fit_node(ctx, depth, q_val, shape, off, cols, svecs):
    """All fitted grid coefficients of every B_mu entry at one numeric q.

    Runs the trace at each grid weight, peels the tensor fit one axis at a
    time, undoes the grid offset, and checks the extra grid layer against
    the fit before returning {(svec index, column index): value} with zeros
    dropped.
    """
    module, rs = ctx.module, ctx.rs
    rank = rs.rank
    qpow = ctx.qpow_for(q_val)

    grid = {}
    for jvec in product(*(range(n + 1) for n in shape)):
        kappa = _grid_kappa(rs, [-(j + o) for j, o in zip(jvec, off)])
        grid[jvec] = _num_series_point(ctx, depth, kappa, q_val)

    def flat(vec):
        idx = 0
        for i in range(rank):
            idx = idx * shape[i] + vec[i]
        return idx

    size = 1
    for n in shape:
        size *= n
    data = [None] * size
    for jvec in product(*(range(n) for n in shape)):
        vals = grid[jvec]
        data[flat(jvec)] = [vals[mu][r][c] for mu, r, c in cols]

    # peel one axis at a time: the nodes q^{2j} are distinct for rational
    # q outside {0, +-1}, so each one-dimensional Vandermonde is invertible
    for a in range(rank):
        n_a = shape[a]
        vand = [[qpow(2 * s * j) for s in range(n_a)] for j in range(n_a)]
        others = [range(shape[i]) if i != a else (0,) for i in range(rank)]
        for base in product(*others):
            vec = list(base)
            rows = []
            for j in range(n_a):
                vec[a] = j
                rows.append(data[flat(vec)])
            sol = _fraction_solve(vand, rows)
            for s in range(n_a):
                vec[a] = s
                data[flat(vec)] = sol[s]

    coeffs = {}
    for si, svec in enumerate(svecs):
        # undo the grid offset: the fit used q^{2(j + o)} in place of q^{2j}
        fold = qpow(-2 * sum(s * o for s, o in zip(svec, off)))
        row = data[flat(svec)]
        for ci in range(len(cols)):
            v = row[ci]
            if v:
                coeffs[si, ci] = v * fold

    for jvec, vals in grid.items():
        if all(j < n for j, n in zip(jvec, shape)):
            continue
        u = [-(j + o) for j, o in zip(jvec, off)]
        fits = {}
        for (si, ci), v in coeffs.items():
            svec = svecs[si]
            term = v * qpow(-2 * sum(s * ui for s, ui in zip(svec, u)))
            fits[ci] = fits.get(ci, 0) + term
        for ci, (mu, r, c) in enumerate(cols):
            if fits.get(ci, 0) != vals[mu][r][c]:
                raise InvariantViolation(
                    "trace coefficient at weight %r does not lie in the "
                    "candidate support span" % (mu,))
    return coeffs


def _interpolate_series(phis, depth):
    """Fit every B_mu from trace samples at numeric weights and numeric q.

    Stage one fits the lambda-dependence on a tensor grid separately at each
    q node; stage two recovers each coefficient's q-dependence from a window
    of nodes.  Three kinds of failure raise InvariantViolation: a sample off
    the fitted span (extra grid layer per axis), a reconstruction that new q
    nodes contradict, and fitted support outside the weight box.
    """
    module = phis[0].module
    rs = module.rs
    rank = rs.rank
    dim0 = len(module.u0)
    shape = _grid_ranges(rs, module.k_alpha)
    box, _ = rs.support_box(module.k_alpha)
    box_set = {tuple(int(c) for c in p) for p in box}
    # Anti-dominant integer samples: with <alpha_i, kappa> = -(j_i + d_i + 1)
    # every <alpha, kappa + rho> is strictly negative while determinant walls
    # sit at positive values, so no sample weight can degenerate at any depth
    # and no integer q >= 2 can hit a wall either.
    off = [d + 1 for d in rs.d]
    ctx = _NumericContext(phis)

    mus = list(iter_cone_weights(rank, depth))
    cols = [(mu, r, c) for mu in mus for r in range(dim0) for c in range(dim0)]
    svecs = list(product(*(range(n) for n in shape)))

    pool = []          # (q value, fitted coefficient dict) in node order
    next_q = 2

    def extend_pool(n):
        nonlocal next_q
        while len(pool) < n:
            q_val = _mpq(next_q)
            next_q += 1
            pool.append((q_val, _fit_node(ctx, depth, q_val, shape, off,
                                          cols, svecs)))

    lo, hi = _window_guess(rs, depth, module.k_alpha, module.big_theta)
    n_verify = 3
    recon = None
    for _round in range(5):
        n_fit = hi - lo + 1
        extend_pool(n_fit + n_verify)
        active = sorted({key for _, c in pool for key in c})
        vand = [[pool[t][0] ** (lo + e) for e in range(n_fit)]
                for t in range(n_fit)]
        rhs = [[pool[t][1].get(key, 0) for key in active]
               for t in range(n_fit)]
        sol = _fraction_solve(vand, rhs)
        ok = True
        for t in range(n_fit, n_fit + n_verify):
            q_val, cmap = pool[t]
            powers = [q_val ** (lo + e) for e in range(n_fit)]
            for k, key in enumerate(active):
                pred = sum(powers[e] * sol[e][k] for e in range(n_fit)
                           if sol[e][k])
                if pred != cmap.get(key, 0):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            recon = (active, sol, lo, n_fit)
            break
        lo -= 2 * (depth + 1)
        hi += 4
    if recon is None:
        raise InvariantViolation(
            "trace coefficients are not Laurent in q on any tried window")
    active, sol, lo, n_fit = recon

    polys = {}
    for k, key in enumerate(active):
        num = {}
        for e in range(n_fit):
            v = sol[e][k]
            if v:
                num[lo + e] = v
        if num:
            polys[key] = QScalar.laurent(num)

    bad = sorted({svecs[si] for (si, ci) in polys if svecs[si] not in box_set})
    if bad:
        raise InvariantViolation(
            "trace coefficients have support outside the weight box: %r"
            % ([tuple(-2 * s for s in svec) for svec in bad],))

    si_of = {svec: si for si, svec in enumerate(svecs)}
    out = {}
    for mi, mu in enumerate(mus):
        terms = {}
        for svec in box_set:
            si = si_of[svec]
            rows = [[polys.get((si, (mi * dim0 + r) * dim0 + c)) or qs_zero()
                     for c in range(dim0)] for r in range(dim0)]
            if any(v for row in rows for v in row):
                terms[tuple(-2 * s for s in svec)] = QMatrix(rows)
        out[mu] = LambdaPoly(rank, terms, normalized=True)
    return out


class PsiSeries:
    """Truncated weighted-trace series of a module's intertwining maps.

    ``terms`` maps mu (integer alpha-coordinates, height <= depth) to the
    matrix-valued LambdaPoly B_mu(lambda) over the zero-weight space; the
    series itself is sum_mu B_mu(lambda) e^{<lambda - mu, x>}.
    """

    def __init__(self, module, depth, terms):
        self.module = module
        self.rs = module.rs
        self.depth = depth
        self.terms = terms
        self.chi_poly = chi(module)
        self.k_alpha = dict(module.k_alpha)
        self.big_theta = tuple(int(c) for c in module.big_theta)
        self.u0_dim = len(module.u0)

    def b(self, mu):
        mu = tuple(int(c) for c in mu)
        hit = self.terms.get(mu)
        if hit is not None:
            return hit
        if any(c < 0 for c in mu):
            return LambdaPoly.zero(self.rs.rank)
        if sum(mu) > self.depth:
            raise KeyError("weight %r beyond computed depth %d" % (mu, self.depth))
        return LambdaPoly.zero(self.rs.rank)

    def dual_view(self):
        """Collect x-series by lambda-exponent: {mu in the weight box: {nu: QMatrix}}.

        The series rewrites as sum over box points mu of
        q^{-2<mu,lambda+rho>} P_mu(x); the returned coefficients have the rho
        part folded in, i.e. P_mu = q^{2<mu,rho>} * (raw key -2*mu collection).
        """
        rs = self.rs
        out = {}
        for nu, poly in self.terms.items():
            for key, mat in poly.terms.items():
                mu = tuple(Fraction(-k, 2) for k in key)
                fold = QScalar.q_power(2 * rs.pairing_alpha(mu, rs.rho))
                if all(c.denominator == 1 for c in mu):
                    mu = tuple(int(c) for c in mu)
                out.setdefault(mu, {})[nu] = mat * fold
        return out

    def json_obj(self):
        items = []
        for mu in sorted(self.terms, key=lambda m: (sum(m), m)):
            poly = self.terms[mu]
            dim = self.u0_dim
            rows = [[str(_entry_poly(poly, r, c)) for c in range(dim)]
                    for r in range(dim)]
            items.append({"mu": list(mu), "B": rows})
        return {
            "root_system": self.rs.label_guess(),
            "theta": [str(c) for c in self.module.theta_fund],
            "depth": self.depth,
            "terms": items,
        }


def _entry_poly(poly, r, c):
    rank = poly.rank
    terms = {}
    for k, mat in poly.terms.items():
        v = mat.rows[r][c]
        if v:
            terms[k] = v
    return LambdaPoly(rank, terms, normalized=True)


# -- caching -------------------------------------------------------------------

_SCHEMA = 1


def _source_fingerprint():
    h = hashlib.sha256()
    base = os.path.dirname(__file__)
    for name in ("qfield.py", "rootdata.py", "linalg.py", "uqg.py",
                 "intertwine.py"):
        with open(os.path.join(base, name), "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()[:16]


def _cache_key(module, depth):
    ident = json.dumps({
        "schema": _SCHEMA,
        "cartan": [[int(x) for x in row] for row in module.rs.cartan],
        "d": list(module.rs.d),
        "theta": [str(c) for c in module.theta_fund],
        "depth": depth,
        "code": _source_fingerprint(),
    }, sort_keys=True)
    return hashlib.sha256(ident.encode()).hexdigest()[:24]


def _qs_data(x):
    return [[[str(e), str(c)] for e, c in sorted(x.num.items())],
            [[str(e), str(c)] for e, c in sorted(x.den.items())]]


def _qs_load(data):
    num = {Fraction(e): Fraction(c) for e, c in data[0]}
    den = {Fraction(e): Fraction(c) for e, c in data[1]}
    return QScalar(num, den, reduced=True)


def _poly_data(poly):
    out = []
    for k, mat in sorted(poly.terms.items()):
        rows = [[_qs_data(v) for v in row] for row in mat.rows]
        out.append([[str(x) for x in k], rows])
    return out


def _poly_load(rank, data):
    terms = {}
    for key, rows in data:
        k = tuple(Fraction(x) for x in key)
        terms[k] = QMatrix([[_qs_load(v) for v in row] for row in rows])
    return LambdaPoly(rank, terms, normalized=True)


def psi_series(module, depth=None, cache_dir=None, method="interp"):
    """All trace coefficients B_mu for height(mu) <= depth.

    depth defaults to height(Theta) + 4.  ``method`` picks the evaluated
    Vandermonde fit ("interp", the default; exact, with its own support
    checks) or generic-weight elimination ("exact", exponential in depth but
    free of any support assumption).  When a cache directory is given (or the
    QMAC_CACHE_DIR environment variable is set) results are stored there
    keyed by root data, module, depth, and a fingerprint of the source code.
    """
    rs = module.rs
    if depth is None:
        depth = int(sum(module.big_theta)) + 4
    if cache_dir is None:
        cache_dir = os.environ.get("QMAC_CACHE_DIR")

    path = None
    if cache_dir:
        path = os.path.join(cache_dir, "psi-%s.json" % _cache_key(module, depth))
        if os.path.exists(path):
            with open(path) as fh:
                data = json.load(fh)
            terms = {tuple(int(x) for x in item["mu"]):
                     _poly_load(rs.rank, item["terms"])
                     for item in data["terms"]}
            return PsiSeries(module, depth, terms)

    phis = singular_system(module)
    if method == "interp":
        terms = _interpolate_series(phis, depth)
    elif method == "exact":
        terms = {mu: partial_trace(phis, mu)
                 for mu in iter_cone_weights(rs.rank, depth)}
    else:
        raise ValueError("unknown method %r" % (method,))

    series = PsiSeries(module, depth, terms)
    if path:
        os.makedirs(cache_dir, exist_ok=True)
        data = {"terms": [{"mu": list(mu), "terms": _poly_data(terms[mu])}
                          for mu in sorted(terms, key=lambda m: (sum(m), m))]}
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(data, fh)
        os.replace(tmp, path)
    return series


# -- quasi-invariance factors ---------------------------------------------------

class BFactor:
    """Right factor relating the series at lambda and at lambda - n*alpha.

    On the wall <alpha, lambda + rho> = n<alpha,alpha>/2 the series factors as
    (shifted series) * (num/den + higher x-order corrections).  ``higher``
    holds the nonzero corrections N_kappa (scaled by den^{height(kappa)+1});
    ``failed_zero`` lists weights nu with nu - n*alpha outside the positive
    cone whose restricted coefficient did not vanish.
    """

    def __init__(self, alpha, n, num, den, higher, failed_zero, depth):
        self.alpha = alpha
        self.n = n
        self.num = num
        self.den = den
        self.higher = higher
        self.failed_zero = failed_zero
        self.depth = depth

    @property
    def residual_ok(self):
        return not self.failed_zero

    @property
    def x_independent(self):
        return not self.higher

    def scalar_value(self):
        """If num == c * den * Id for a single monomial c, return c, else None."""
        from .qfield import unit_monomial_ratio
        dim = None
        for mat in self.num.terms.values():
            dim = mat.dim
            break
        if dim is None:
            return None
        probe = None
        for r in range(dim):
            for c in range(dim):
                entry = _entry_poly(self.num, r, c)
                if r == c:
                    hit = unit_monomial_ratio(entry, self.den)
                    if hit is None:
                        return None
                    key, unit = hit
                    if any(key) or not unit.is_monomial():
                        return None
                    if probe is None:
                        probe = unit
                    elif probe != unit:
                        return None
                elif entry:
                    return None
        return probe


def factor_B(psi, alpha, n, depth=None):
    """Solve for the factor tying the series to its shift across one wall.

    alpha is a positive root in alpha-coordinates, 1 <= n <= k_alpha.  The
    lambda-restriction is the linear substitution <alpha, lambda> =
    n<alpha,alpha>/2 - <alpha,rho>.  Works order by order in the x-grading;
    every weight nu with nu - n*alpha outside the positive cone yields a
    vanishing check instead of an equation.
    """
    rs = psi.rs
    rank = rs.rank
    alpha = tuple(Fraction(c) for c in alpha)
    if alpha not in rs.positive_roots:
        raise ValueError("alpha must be a positive root")
    k = psi.k_alpha[alpha]
    if not 1 <= n <= k:
        raise ValueError("n must lie in 1..k_alpha")
    if depth is None:
        depth = psi.depth - n * int(rs.height(alpha))

    value = Fraction(n) * rs.pairing_alpha(alpha, alpha) / 2 \
        - rs.pairing_alpha(alpha, rs.rho)
    pivot = next(i for i, c in enumerate(alpha) if c)

    def restrict(poly):
        return poly.restricted(alpha, value, pivot)

    shift = tuple(-n * c for c in alpha)
    na = tuple(int(n * c) for c in alpha)

    def b_here(nu):
        return restrict(psi.b(nu))

    def b_shifted(nu):
        return restrict(psi.b(nu).shifted(rs, shift))

    den = restrict(psi.chi_poly.shifted(rs, shift))
    nums = {}
    failed = []
    for nu in iter_cone_weights(rank, depth):
        kappa = tuple(a - b for a, b in zip(nu, na))
        if any(c < 0 for c in kappa):
            if b_here(nu):
                failed.append(nu)
            continue
        h = sum(kappa)
        acc = b_here(nu)
        for _ in range(h):
            acc = acc * den
        for kp in iter_cone_weights(rank, h):
            if kp == (0,) * rank or any(a < b for a, b in zip(kappa, kp)):
                continue
            rest = tuple(a - b for a, b in zip(kappa, kp))
            term = b_shifted(kp) * nums[rest]
            hp = sum(kp)
            for _ in range(hp - 1):
                term = term * den
            acc = acc - term
        nums[kappa] = acc

    zero = (0,) * rank
    num = nums.pop(zero, LambdaPoly.zero(rank))
    higher = {kp: poly for kp, poly in nums.items() if poly}
    return BFactor(alpha, n, num, den, higher, failed, depth)
