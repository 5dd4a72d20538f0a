"""Quantum-group engine: Verma modules, the contravariant form, finite modules.

Vectors in a Verma module are stored against *F-words*: a word ``(i1,...,il)``
(a tuple of simple-root indices) stands for ``F_{i1}...F_{il}`` applied to the
highest-weight vector.  The weight of a word, as an element of the positive
root lattice, is just its letter histogram, so all words of weight ``mu`` are
the multiset permutations of ``mu``.

``Uq`` carries the per-root-system caches: raising-operator images, the
contravariant pairing (generic in the formal weight, or specialized at a
concrete one), chosen weight-space bases, and Shapovalov matrices.
"""

from fractions import Fraction

from .linalg import bareiss_det, bareiss_rank, field_inverse, field_rank
from .qfield import (
    LambdaPoly,
    QMatrix,
    QScalar,
    q_binomial,
    q_factorial,
    q_integer,
    qs_one,
    qs_zero,
    unit_monomial_ratio,
)


class DimensionCapExceeded(RuntimeError):
    """A finite module came out larger than the configured cap."""


def word_weight(rank, word):
    counts = [0] * rank
    for i in word:
        counts[i] += 1
    return tuple(Fraction(c) for c in counts)


def _multiset_permutations(counts):
    """All words with the given letter histogram, in lexicographic order."""
    if not any(counts):
        yield ()
        return
    for i, c in enumerate(counts):
        if not c:
            continue
        rest = list(counts)
        rest[i] -= 1
        for tail in _multiset_permutations(rest):
            yield (i,) + tail


class VermaVector:
    """A finite combination of F-words with LambdaPoly coefficients."""

    __slots__ = ("rank", "terms")

    def __init__(self, rank, terms):
        self.rank = rank
        self.terms = {w: c for w, c in terms.items() if c}

    @classmethod
    def highest_weight(cls, rank):
        return cls(rank, {(): LambdaPoly.one(rank)})

    @classmethod
    def word(cls, rank, w, coeff=None):
        return cls(rank, {tuple(w): coeff if coeff is not None
                          else LambdaPoly.one(rank)})

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if not isinstance(other, VermaVector):
            return NotImplemented
        return self.terms == other.terms

    def __add__(self, other):
        out = dict(self.terms)
        for w, c in other.terms.items():
            s = out.get(w)
            out[w] = c if s is None else s + c
        return VermaVector(self.rank, out)

    def __neg__(self):
        return VermaVector(self.rank, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return VermaVector(self.rank, {w: cv * c for w, cv in self.terms.items()})

    def weight(self):
        """Common weight of all words; None for the zero vector."""
        if not self.terms:
            return None
        weights = {word_weight(self.rank, w) for w in self.terms}
        if len(weights) > 1:
            raise ValueError("mixed-weight vector")
        return weights.pop()

    def __repr__(self):
        return "VermaVector(%r)" % (self.terms,)


class ShapovalovMatrix:
    """Gram matrix of the contravariant form on one Verma weight space.

    ``entries`` hold the true pairings; ``cleared`` holds the same matrix
    scaled by ``d_mu`` (the weight's pairing denominator), which keeps every
    coefficient a Laurent polynomial and is the right object to eliminate on.
    """

    __slots__ = ("mu", "basis", "entries", "cleared", "d_mu", "_det")

    def __init__(self, mu, basis, entries, cleared, d_mu):
        self.mu = mu
        self.basis = basis
        self.entries = entries
        self.cleared = cleared
        self.d_mu = d_mu
        self._det = None

    @property
    def size(self):
        return len(self.basis)

    def det(self):
        if self._det is None:
            scale = (self.d_mu ** self.size).inverse()
            self._det = bareiss_det(self.cleared).scale_left(scale)
        return self._det


class Uq:
    """The quantum group attached to a root system, with its Verma caches."""

    def __init__(self, rs):
        self.rs = rs
        self._e_memo = {}
        self._ke_memo = {}
        self._pair_memo = {}
        self._spec_memo = {}
        self._basis_memo = {}
        self._shap_memo = {}

    # -- generator actions on F-words ---------------------------------------

    def _q_i(self, i):
        return self.rs.d[i]

    def _e_word(self, i, word):
        """E_i applied to an F-word, as a word->LambdaPoly map."""
        key = (i, word)
        hit = self._e_memo.get(key)
        if hit is not None:
            return hit
        rs = self.rs
        rank = rs.rank
        ai = rs.alpha(i)
        di = self._q_i(i)
        denom = QScalar.q_power(di) - QScalar.q_power(-di)
        out = {}
        # pair_ai_nu = <a_i, weight of the letters strictly after position p>
        pair_ai_nu = Fraction(0)
        for p in range(len(word) - 1, -1, -1):
            j = word[p]
            if j == i:
                rest = word[:p] + word[p + 1:]
                # (K_i - K_i^{-1})/(q_i - q_i^{-1}) at weight la - nu
                c_plus = QScalar.q_power(-pair_ai_nu) / denom
                c_minus = -(QScalar.q_power(pair_ai_nu) / denom)
                contrib = LambdaPoly(rank, {tuple(ai): c_plus,
                                            tuple(-a for a in ai): c_minus})
                s = out.get(rest)
                out[rest] = contrib if s is None else s + contrib
            pair_ai_nu += rs.pairing_alpha(ai, rs.alpha(j))
        out = {w: c for w, c in out.items() if c}
        self._e_memo[key] = out
        return out

    def _ke_word_cleared(self, i, word):
        """(q_i - q_i^{-1})·K_i^{-1}E_i on an F-word (word->LambdaPoly).

        The cleared form keeps every coefficient a Laurent polynomial, which
        is what makes the pairing recursion cheap; the denominators are
        reinstated once per public pairing call.
        """
        key = (i, word)
        hit = self._ke_memo.get(key)
        if hit is not None:
            return hit
        rs = self.rs
        rank = rs.rank
        ai = rs.alpha(i)
        neg_ai = tuple(-a for a in ai)
        out = {}
        pair_ai_nu = Fraction(0)
        for p in range(len(word) - 1, -1, -1):
            j = word[p]
            if j == i:
                rest = word[:p] + word[p + 1:]
                contrib = LambdaPoly(rank, {
                    tuple(ai): QScalar.q_power(-pair_ai_nu),
                    neg_ai: -QScalar.q_power(pair_ai_nu),
                })
                s = out.get(rest)
                out[rest] = contrib if s is None else s + contrib
            pair_ai_nu += rs.pairing_alpha(ai, rs.alpha(j))
        if out:
            mu_word = word_weight(rank, word)
            kfac = QScalar.q_power(
                rs.pairing_alpha(ai, mu_word) - rs.pairing_alpha(ai, ai))
            out = {w: c.mul_key(neg_ai, kfac) for w, c in out.items() if c}
        self._ke_memo[key] = out
        return out

    def pairing_denominator(self, mu):
        """The cleared-pairing scale at weight mu: prod_i (q_i-q_i^{-1})^mu_i."""
        d = qs_one()
        for i, m in enumerate(mu):
            di = self._q_i(i)
            step = QScalar.q_power(di) - QScalar.q_power(-di)
            for _ in range(int(m)):
                d = d * step
        return d

    def apply_e(self, i, v):
        """E_i on a VermaVector."""
        rank = self.rs.rank
        out = {}
        for word, coeff in v.terms.items():
            for w, c in self._e_word(i, word).items():
                s = out.get(w)
                t = c * coeff
                out[w] = t if s is None else s + t
        return VermaVector(rank, out)

    def apply_f(self, i, v):
        """F_i on a VermaVector (prepends a letter to every word)."""
        return VermaVector(self.rs.rank,
                           {(i,) + w: c for w, c in v.terms.items()})

    def apply_k(self, i, v, power=1):
        """K_i^power on a VermaVector (diagonal on each weight)."""
        rs = self.rs
        ai = rs.alpha(i)
        out = {}
        for word, coeff in v.terms.items():
            nu = word_weight(rs.rank, word)
            shift = tuple(power * a for a in ai)
            out[word] = coeff.mul_key(
                shift, QScalar.q_power(-power * rs.pairing_alpha(ai, nu)))
        return VermaVector(rs.rank, out)

    # -- contravariant form ---------------------------------------------------

    def contravariant_pairing(self, w1, w2):
        """F(w1 v, w2 v) as a LambdaPoly in the formal highest weight."""
        w1, w2 = tuple(w1), tuple(w2)
        rank = self.rs.rank
        mu = word_weight(rank, w1)
        if mu != word_weight(rank, w2):
            return LambdaPoly.zero(rank)
        cleared = self._pair_cleared(w1, w2)
        return cleared.scale_left(self.pairing_denominator(mu).inverse())

    def _pair_cleared(self, w1, w2):
        """pairing_denominator(weight) times the contravariant pairing."""
        if not w1:
            return LambdaPoly.one(self.rs.rank)
        key = (w1, w2)
        hit = self._pair_memo.get(key)
        if hit is not None:
            return hit
        i, rest = w1[0], w1[1:]
        acc = LambdaPoly.zero(self.rs.rank)
        for w, c in self._ke_word_cleared(i, w2).items():
            acc = acc + c * self._pair_cleared(rest, w)
        self._pair_memo[key] = acc
        return acc

    def pairing_at(self, theta, w1, w2):
        """The contravariant pairing with the highest weight specialized."""
        w1, w2 = tuple(w1), tuple(w2)
        rank = self.rs.rank
        mu = word_weight(rank, w1)
        if mu != word_weight(rank, w2):
            return qs_zero()
        cleared = self._spec_pair_cleared(
            tuple(Fraction(c) for c in theta), w1, w2)
        return cleared / self.pairing_denominator(mu)

    def _spec_pair_cleared(self, theta, w1, w2):
        if not w1:
            return qs_one()
        key = (theta, w1, w2)
        hit = self._spec_memo.get(key)
        if hit is not None:
            return hit
        rs = self.rs
        i, rest = w1[0], w1[1:]
        ai = rs.alpha(i)
        acc = qs_zero()
        # inline cleared K_i^{-1} E_i with the weight made numeric
        word = w2
        pair_ai_nu = Fraction(0)
        contribs = []
        for p in range(len(word) - 1, -1, -1):
            j = word[p]
            if j == i:
                rest_word = word[:p] + word[p + 1:]
                lam_nu = rs.pairing_alpha(ai, theta) - pair_ai_nu
                factor = QScalar.q_power(lam_nu) - QScalar.q_power(-lam_nu)
                contribs.append((rest_word, factor))
            pair_ai_nu += rs.pairing_alpha(ai, rs.alpha(j))
        if contribs:
            # K_i^{-1} acts at weight theta - (mu(word) - a_i)
            mu_word = word_weight(rs.rank, word)
            kfac = QScalar.q_power(
                -(rs.pairing_alpha(ai, theta)
                  - rs.pairing_alpha(ai, mu_word)
                  + rs.pairing_alpha(ai, ai)))
            for rest_word, factor in contribs:
                acc = acc + kfac * factor * self._spec_pair_cleared(
                    theta, rest, rest_word)
        self._spec_memo[key] = acc
        return acc

    # -- weight spaces ---------------------------------------------------------

    def words_of_weight(self, mu):
        counts = [int(c) for c in mu]
        if any(Fraction(c) != Fraction(m) for c, m in zip(counts, mu)) or min(
                counts, default=0) < 0:
            raise ValueError("weight must be a nonnegative integer vector")
        return tuple(_multiset_permutations(counts))

    def weight_basis(self, mu):
        """Deterministic basis words of the Verma weight space at ``la - mu``."""
        mu = tuple(Fraction(c) for c in mu)
        hit = self._basis_memo.get(mu)
        if hit is not None:
            return hit
        target = self.rs.kostant_partition(mu)
        chosen = []
        gram = []
        for w in self.words_of_weight(mu):
            row = [self._pair_cleared(b, w) for b in chosen]
            diag = self._pair_cleared(w, w)
            cand = [gram[i] + [row[i]] for i in range(len(chosen))]
            cand.append(row + [diag])
            if bareiss_rank(cand) == len(cand):
                chosen.append(w)
                gram = cand
                if len(chosen) == target:
                    break
        if len(chosen) != target:
            raise AssertionError(
                "weight space rank %d < partition count %d at %s"
                % (len(chosen), target, mu))
        out = tuple(chosen)
        self._basis_memo[mu] = out
        return out

    def generic_weight_rank(self, mu):
        """Rank of the full Gram matrix over all words of weight ``mu``."""
        words = self.words_of_weight(mu)
        gram = [[self._pair_cleared(a, b) for b in words] for a in words]
        return bareiss_rank(gram)

    def shapovalov_matrix(self, mu):
        mu = tuple(Fraction(c) for c in mu)
        hit = self._shap_memo.get(mu)
        if hit is not None:
            return hit
        basis = self.weight_basis(mu)
        cleared = [[self._pair_cleared(a, b) for b in basis] for a in basis]
        d_mu = self.pairing_denominator(mu)
        dinv = d_mu.inverse()
        entries = [[c.scale_left(dinv) for c in row] for row in cleared]
        out = ShapovalovMatrix(mu, basis, entries, cleared, d_mu)
        self._shap_memo[mu] = out
        return out

    def predicted_determinant(self, mu):
        """Product-formula determinant, normalized with constant 1.

        Comparisons against an actual Shapovalov determinant must allow a
        basis-dependent unit times a single monomial in the formal weight.
        """
        rs = self.rs
        mu = tuple(Fraction(c) for c in mu)
        out = LambdaPoly.one(rs.rank)
        for alpha in rs.positive_roots:
            norm = rs.pairing_alpha(alpha, alpha)
            rho_pair = rs.pairing_alpha(alpha, rs.rho)
            n = 1
            while True:
                rest = tuple(m - n * a for m, a in zip(mu, alpha))
                if any(r < 0 for r in rest):
                    break
                par = rs.kostant_partition(rest)
                factor = LambdaPoly(rs.rank, {
                    (0,) * rs.rank: qs_one(),
                    tuple(-2 * a for a in alpha):
                        -QScalar.q_power(-2 * rho_pair + n * norm),
                })
                for _ in range(par):
                    out = out * factor
                n += 1
        return out


# ---------------------------------------------------------------------------
# finite-dimensional irreducible modules


class FiniteModule:
    """An irreducible finite-dimensional module, built as a Verma quotient.

    Basis vectors are images of F-words; the action matrices are dim x dim
    with column j holding the image of basis vector j.
    """

    def __init__(self, uq, fund_coords, dim_cap=64):
        rs = uq.rs
        self.uq = uq
        self.rs = rs
        fund = tuple(Fraction(c) for c in fund_coords)
        if any(c < 0 or c.denominator != 1 for c in fund):
            raise ValueError("highest weight must be dominant integral")
        self.theta_fund = fund
        self.theta = rs.alpha_from_fund(fund)

        w0 = rs.longest_element()
        lowest = w0.action(self.theta)
        span = tuple(t - l for t, l in zip(self.theta, lowest))
        if any(s.denominator != 1 for s in span):
            raise ValueError("weight span is not integral")

        weyl_dim = self._weyl_dimension()
        if weyl_dim > dim_cap:
            raise DimensionCapExceeded(
                "module dimension %d exceeds cap %d" % (weyl_dim, dim_cap))

        # enumerate candidate drops beta in the box [0, span], by height
        cands = []
        self._iter_box(span, (), cands)
        cands.sort(key=lambda b: (rs.height(b), b))

        self.weights = []          # alpha-coordinates of each weight, in order
        self.weight_words = {}     # beta -> chosen basis words
        self.weight_gram_inv = {}  # beta -> inverse of specialized Gram
        basis = []
        for beta in cands:
            words = uq.words_of_weight(beta)
            chosen, gram = self._select_words(words)
            if not chosen:
                continue
            beta_f = tuple(Fraction(b) for b in beta)
            self.weight_words[beta_f] = chosen
            self.weight_gram_inv[beta_f] = field_inverse(gram)
            mu = tuple(t - b for t, b in zip(self.theta, beta_f))
            self.weights.append(mu)
            for w in chosen:
                basis.append((beta_f, w))
        self.basis = tuple(basis)
        self.dim = len(basis)
        if self.dim != weyl_dim:
            raise AssertionError(
                "constructed dimension %d does not match the Weyl formula %d"
                % (self.dim, weyl_dim))

        self._index = {bw: n for n, bw in enumerate(self.basis)}
        self._expand_memo = {}
        self.e_mats = [self._matrix_e(i) for i in range(rs.rank)]
        self.f_mats = [self._matrix_f(i) for i in range(rs.rank)]
        self.k_diag = [self._diag_k(i) for i in range(rs.rank)]

        self.u0 = tuple(n for n, (beta, _) in enumerate(self.basis)
                        if all(c == 0 for c in self._mu_of(beta)))
        self.k_alpha = {}
        for alpha in rs.positive_roots:
            n = 0
            while self.dim_of_weight(tuple((n + 1) * a for a in alpha)):
                n += 1
            self.k_alpha[alpha] = n
        self.big_theta = tuple(
            sum(self.k_alpha[a] * a[i] for a in rs.positive_roots)
            for i in range(rs.rank))

        self._verify()

    # -- construction helpers -------------------------------------------------

    def _mu_of(self, beta):
        return tuple(t - b for t, b in zip(self.theta, beta))

    def _iter_box(self, span, prefix, out):
        if len(prefix) == len(span):
            out.append(prefix)
            return
        top = int(span[len(prefix)])
        for c in range(top + 1):
            self._iter_box(span, prefix + (c,), out)

    def _select_words(self, words):
        uq = self.uq
        theta = self.theta
        chosen = []
        gram = []
        for w in words:
            row = [uq._spec_pair_cleared(theta, b, w) for b in chosen]
            diag = uq._spec_pair_cleared(theta, w, w)
            cand = [gram[i] + [row[i]] for i in range(len(chosen))]
            cand.append(row + [diag])
            if field_rank(cand) == len(cand):
                chosen.append(w)
                gram = cand
        return chosen, gram

    def _dim_at_drop(self, mu):
        beta = tuple(t - m for t, m in zip(self.theta, mu))
        words = self.weight_words.get(tuple(Fraction(b) for b in beta))
        return len(words) if words else 0

    def _expand(self, word):
        """Coordinates of an arbitrary F-word image in the chosen basis."""
        hit = self._expand_memo.get(word)
        if hit is not None:
            return hit
        beta = word_weight(self.rs.rank, word)
        chosen = self.weight_words.get(beta)
        out = []
        if chosen:
            ginv = self.weight_gram_inv[beta]
            p = [self.uq._spec_pair_cleared(self.theta, b, word)
                 for b in chosen]
            coords = [sum((ginv[r][s] * p[s] for s in range(len(p))),
                          qs_zero()) for r in range(len(p))]
            out = [(self._index[(beta, b)], c)
                   for b, c in zip(chosen, coords) if c]
        self._expand_memo[word] = out
        return out

    def _matrix_f(self, i):
        dim = self.dim
        rows = [[qs_zero()] * dim for _ in range(dim)]
        for n, (beta, w) in enumerate(self.basis):
            for m, c in self._expand((i,) + w):
                rows[m][n] = c
        return QMatrix(rows)

    def _matrix_e(self, i):
        dim = self.dim
        rs = self.rs
        rows = [[qs_zero()] * dim for _ in range(dim)]
        for n, (beta, w) in enumerate(self.basis):
            for image_word, coeff in self.uq._e_word(i, w).items():
                cval = coeff.evaluate(rs, self.theta)
                for m, c in self._expand(image_word):
                    rows[m][n] = rows[m][n] + cval * c
        return QMatrix(rows)

    def _diag_k(self, i):
        rs = self.rs
        return [QScalar.q_power(rs.pairing_alpha(rs.alpha(i), self._mu_of(beta)))
                for beta, _ in self.basis]

    def _weyl_dimension(self):
        rs = self.rs
        num, den = Fraction(1), Fraction(1)
        shifted = tuple(t + r for t, r in zip(self.theta, rs.rho))
        for alpha in rs.positive_roots:
            num *= rs.pairing_alpha(shifted, alpha)
            den *= rs.pairing_alpha(rs.rho, alpha)
        d = num / den
        if d.denominator != 1:
            raise AssertionError("Weyl dimension formula gave a fraction")
        return int(d)

    # -- public API -------------------------------------------------------------

    def k_matrix(self, i, power=1):
        dim = self.dim
        return QMatrix([[self.k_diag[i][r] ** power if r == c else qs_zero()
                         for c in range(dim)] for r in range(dim)])

    def weight_of(self, n):
        return self._mu_of(self.basis[n][0])

    def dim_of_weight(self, mu):
        return self._dim_at_drop(tuple(Fraction(c) for c in mu))

    def fe_power_action(self, i, n):
        """Matrix of F_i^n E_i^n restricted to the zero-weight subspace."""
        dim = self.dim
        op = QMatrix.identity(dim)
        for _ in range(n):
            op = self.e_mats[i] * op
        for _ in range(n):
            op = self.f_mats[i] * op
        return QMatrix([[op.rows[r][c] for c in self.u0] for r in self.u0])

    def json_obj(self):
        return {
            "theta": [str(c) for c in self.theta_fund],
            "dim": self.dim,
            "weights": [[str(c) for c in mu] for mu in self.weights],
            "weight_dims": [len(self.weight_words[tuple(
                t - m for t, m in zip(self.theta, mu))]) for mu in self.weights],
            "e": [m.json_obj() for m in self.e_mats],
            "f": [m.json_obj() for m in self.f_mats],
            "k": [[str(x) for x in d] for d in self.k_diag],
        }

    # -- construction-time checks ------------------------------------------------

    def _verify(self):
        rs = self.rs
        dim = self.dim
        for i in range(rs.rank):
            ki = self.k_matrix(i)
            ki_inv = self.k_matrix(i, -1)
            di = rs.d[i]
            coef = (QScalar.q_power(di) - QScalar.q_power(-di)).inverse()
            for j in range(rs.rank):
                lhs = self.e_mats[i] * self.f_mats[j] - self.f_mats[j] * self.e_mats[i]
                rhs = (ki - ki_inv) * coef if i == j else QMatrix.zero(dim)
                if lhs != rhs:
                    raise AssertionError(
                        "defining relation fails for (E_%d, F_%d)" % (i, j))
            # K E K^{-1} = q^{<a_i,a_j>} E
            for j in range(rs.rank):
                scale = QScalar.q_power(rs.pairing_alpha(rs.alpha(i), rs.alpha(j)))
                if ki * self.e_mats[j] * ki_inv != self.e_mats[j] * scale:
                    raise AssertionError("K-E relation fails (%d,%d)" % (i, j))
        self._verify_serre(self.e_mats)
        self._verify_serre(self.f_mats)

    def _verify_serre(self, mats):
        rs = self.rs
        dim = self.dim
        for i in range(rs.rank):
            for j in range(rs.rank):
                if i == j:
                    continue
                n = 1 - rs.cartan[i][j]
                acc = QMatrix.zero(dim)
                for m in range(n + 1):
                    term = QMatrix.identity(dim)
                    for _ in range(m):
                        term = mats[i] * term
                    term = mats[j] * term
                    for _ in range(n - m):
                        term = mats[i] * term
                    coeff = q_binomial(n, m, rs.d[i])
                    if m % 2:
                        coeff = -coeff
                    acc = acc + term * coeff
                if acc != QMatrix.zero(dim):
                    raise AssertionError("Serre relation fails (%d,%d)" % (i, j))


def build_finite_module(uq, fund_coords, dim_cap=64):
    return FiniteModule(uq, fund_coords, dim_cap=dim_cap)
