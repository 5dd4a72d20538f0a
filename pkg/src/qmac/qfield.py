"""Exact scalar arithmetic for the ground field and for formal-weight exponentials.

Two layers live here:

* ``QScalar`` — an element of the field of rational functions in ``q``,
  allowing rational exponents (roots of ``q`` are adjoined on demand).  Values
  are kept as reduced fractions of sparse exponent->coefficient maps; equality
  of canonical forms is plain equality of the stored maps.

* ``LambdaPoly`` — a finite sum  ``sum_mu a_mu q^{<mu,lambda>}``  in a formal
  weight ``lambda``, with exponent vectors ``mu`` written in simple-root
  coordinates and coefficients that are ``QScalar`` or square ``QMatrix``
  blocks.  The Killing form enters only through explicit root-system arguments
  at evaluation/shift/restriction boundaries, so this module stays below the
  root-system layer.

Both types are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm

F0 = 0
F1 = 1


def _intify(x):
    """Collapse integral Fractions to plain ints (cheap hashing/arithmetic)."""
    return x.numerator if x.denominator == 1 else x

_ONE_DEN = {F0: F1}


class InexactDivision(ArithmeticError):
    """Raised when a division that must be exact leaves a remainder."""


# ---------------------------------------------------------------------------
# dense helpers for normalization (internal)
# ---------------------------------------------------------------------------


def _zcontent(a):
    c = 0
    for x in a:
        c = gcd(c, x)
        if c == 1:
            return 1
    return c or 1


def _zprimitive(a):
    """Make an integer coefficient list primitive with positive leading coefficient."""
    c = _zcontent(a)
    if a and a[-1] < 0:
        c = -c
    if c != 1:
        a = [x // c for x in a]
    return a


def _ztrim(a):
    while a and a[-1] == 0:
        a.pop()
    return a


def _zpseudo_rem(a, b):
    """Pseudo-remainder of dense integer polynomials ``a`` mod ``b``."""
    a = list(a)
    db = len(b) - 1
    lb = b[-1]
    while len(a) - 1 >= db and a:
        da = len(a) - 1
        la = a[-1]
        a = [x * lb for x in a]
        for i, bx in enumerate(b):
            a[da - db + i] -= la * bx
        _ztrim(a)
    return a


def _zgcd_poly(a, b):
    """Gcd of dense integer polynomial coefficient lists (primitive PRS)."""
    a = _zprimitive(_ztrim(list(a)))
    b = _zprimitive(_ztrim(list(b)))
    if len(a) < len(b):
        a, b = b, a
    while b:
        r = _zprimitive(_zpseudo_rem(a, b))
        a, b = b, r
    return a


def _dense_divexact(a, g):
    """Exact division of dense Fraction lists; the remainder must vanish."""
    a = list(a)
    dg = len(g) - 1
    lg = g[-1]
    out = [F0] * (len(a) - dg)
    for i in range(len(a) - 1, dg - 1, -1):
        c = a[i] / lg
        out[i - dg] = c
        if c:
            for j, gx in enumerate(g):
                a[i - dg + j] -= c * gx
    if any(a):
        raise InexactDivision("polynomial division left a remainder")
    return out


def _reduce_fraction(num, den):
    """Canonicalize ``num/den`` maps: gcd-reduced, denominator anchored at
    exponent 0 with trailing coefficient 1, monomial slack folded into num."""
    if not num:
        return {}, dict(_ONE_DEN)
    L = 1
    for e in num:
        L = lcm(L, e.denominator)
    for e in den:
        L = lcm(L, e.denominator)
    mn = min(num)
    mx = max(num)
    md = min(den)
    xd = max(den)
    N = [F0] * (int((mx - mn) * L) + 1)
    for e, c in num.items():
        N[int((e - mn) * L)] = c
    D = [F0] * (int((xd - md) * L) + 1)
    for e, c in den.items():
        D[int((e - md) * L)] = c
    # scale to integer lists
    cn = 1
    for c in N:
        cn = lcm(cn, c.denominator)
    cd = 1
    for c in D:
        cd = lcm(cd, c.denominator)
    Ni = [int(c * cn) for c in N]
    Di = [int(c * cd) for c in D]
    g = _zgcd_poly(Ni, Di)
    if len(g) > 1:
        gf = [Fraction(x) for x in g]
        N = _dense_divexact([Fraction(x) for x in Ni], gf)
        D = _dense_divexact([Fraction(x) for x in Di], gf)
    else:
        N = [Fraction(x) for x in Ni]
        D = [Fraction(x) for x in Di]
    scale = Fraction(cd, cn) / D[0]
    shift = mn - md
    num_out = {}
    for i, c in enumerate(N):
        if c:
            num_out[_intify(Fraction(i, L) + shift)] = _intify(c * scale)
    den_out = {}
    d0 = D[0]
    for i, c in enumerate(D):
        if c:
            den_out[_intify(Fraction(i, L))] = _intify(c / d0)
    return num_out, den_out


def _coeff_div(a, b):
    """a / b for int-or-Fraction coefficients, staying int when possible."""
    if a.__class__ is int and b.__class__ is int:
        r, rem = divmod(a, b)
        if not rem:
            return r
    r = Fraction(a) / b
    return r.numerator if r.denominator == 1 else r


def _sparse_divexact(num, den):
    """Exact Laurent division of exponent->coefficient maps, or None.

    Sparse long division from the top exponent; cost scales with the term
    counts, not the exponent range (unlike the dense gcd machinery), which is
    what makes fraction-free elimination on evaluated scalars viable.
    """
    if not den:
        raise ZeroDivisionError("division by zero polynomial")
    if not num:
        return {}
    dlead = max(den)
    dlow = min(den)
    dc = den[dlead]
    floor = min(num) - dlow
    rest = [(e, c) for e, c in den.items() if e != dlead]
    rem = dict(num)
    quot = {}
    while rem:
        lead = max(rem)
        qe = lead - dlead
        if qe < floor:
            return None
        qc = _coeff_div(rem.pop(lead), dc)
        quot[qe] = qc
        for e, c in rest:
            ne = qe + e
            if ne.__class__ is not int and ne.denominator == 1:
                ne = ne.numerator
            val = qc * c
            cur = rem.get(ne)
            if cur is None:
                rem[ne] = -val
            else:
                cur = cur - val
                if cur:
                    rem[ne] = cur
                else:
                    del rem[ne]
    return quot


def qs_divexact(a, b):
    """``a / b`` when ``b`` is a Laurent scalar dividing ``a`` exactly.

    Only the numerator is divided, so no gcd runs; raises InexactDivision
    when ``b`` does not divide, and ValueError when ``b`` has a denominator.
    """
    if not b.is_laurent():
        raise ValueError("divisor must be a Laurent scalar")
    if not a.num:
        return _ZERO
    quot = _sparse_divexact(a.num, b.num)
    if quot is None:
        raise InexactDivision("scalar division left a remainder")
    quot = {_intify(Fraction(e)) if e.__class__ is not int else e:
            _intify(c) if c.__class__ is not int else c
            for e, c in quot.items()}
    return QScalar(quot, dict(a.den), reduced=True)


# ---------------------------------------------------------------------------
# sparse map primitives
# ---------------------------------------------------------------------------


def _dadd(a, b):
    out = dict(a)
    for e, c in b.items():
        s = out.get(e)
        if s is None:
            out[e] = c
        else:
            s = s + c
            if s:
                out[e] = s
            else:
                del out[e]
    return out


def _dmul(a, b):
    if len(a) > len(b):
        a, b = b, a
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = ea + eb
            if e.__class__ is not int and e.denominator == 1:
                e = e.numerator
            c = ca * cb
            if c.__class__ is not int and c.denominator == 1:
                c = c.numerator
            s = out.get(e)
            if s is None:
                out[e] = c
            else:
                s = s + c
                if s:
                    out[e] = s
                else:
                    del out[e]
    return out


def _dneg(a):
    return {e: -c for e, c in a.items()}


class QScalar:
    """A rational function of ``q`` with rational exponents, stored canonically.

    Use the module helpers (``q_integer`` etc.) or the constructors
    ``QScalar.from_fraction`` / ``QScalar.q_power`` / ``QScalar.laurent``
    rather than building exponent maps by hand.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num, den=None, reduced=False):
        if den is None:
            den = dict(_ONE_DEN)
        if not reduced:
            if not den:
                raise ZeroDivisionError("zero denominator")
            num = {_intify(Fraction(e)): _intify(Fraction(c))
                   for e, c in num.items() if c}
            den = {_intify(Fraction(e)): _intify(Fraction(c))
                   for e, c in den.items() if c}
            num, den = _reduce_fraction(num, den)
        self.num = num
        self.den = den
        self._hash = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_fraction(cls, c):
        c = _intify(Fraction(c))
        if not c:
            return _ZERO
        return cls({F0: c}, dict(_ONE_DEN), reduced=True)

    @classmethod
    def q_power(cls, e):
        """The monomial ``q^e`` for a rational exponent ``e``."""
        return cls({_intify(Fraction(e)): F1}, dict(_ONE_DEN), reduced=True)

    @classmethod
    def laurent(cls, terms):
        """A Laurent polynomial in ``q`` from an exponent->coefficient map."""
        out = {}
        for e, c in terms.items():
            c = Fraction(c)
            if c:
                out[_intify(Fraction(e))] = _intify(c)
        return cls(out, dict(_ONE_DEN), reduced=True)

    # -- predicates ----------------------------------------------------------

    def __bool__(self):
        return bool(self.num)

    def is_one(self):
        return self.num == _ONE_DEN and self.den == _ONE_DEN

    def is_laurent(self):
        """True when the denominator is trivial."""
        return self.den == _ONE_DEN

    def is_monomial(self):
        return len(self.num) == 1 and self.den == _ONE_DEN

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = _as_qscalar(other)
        if other is NotImplemented:
            return NotImplemented
        if self.den == _ONE_DEN and other.den == _ONE_DEN:
            return QScalar(_dadd(self.num, other.num), dict(_ONE_DEN), reduced=True)
        num = _dadd(_dmul(self.num, other.den), _dmul(other.num, self.den))
        return QScalar(num, _dmul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self):
        return QScalar(_dneg(self.num), dict(self.den), reduced=True)

    def __sub__(self, other):
        other = _as_qscalar(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _as_qscalar(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _as_qscalar(other)
        if other is NotImplemented:
            return NotImplemented
        if not self.num or not other.num:
            return _ZERO
        if self.den == _ONE_DEN and other.den == _ONE_DEN:
            return QScalar(_dmul(self.num, other.num), dict(_ONE_DEN), reduced=True)
        return QScalar(_dmul(self.num, other.num), _dmul(self.den, other.den))

    __rmul__ = __mul__

    def inverse(self):
        if not self.num:
            raise ZeroDivisionError("inverse of zero")
        return QScalar(dict(self.den), dict(self.num))

    def __truediv__(self, other):
        other = _as_qscalar(other)
        if other is NotImplemented:
            return NotImplemented
        if not other.num:
            raise ZeroDivisionError("division by zero")
        if not self.num:
            return _ZERO
        return QScalar(_dmul(self.num, other.den), _dmul(self.den, other.num))

    def __rtruediv__(self, other):
        other = _as_qscalar(other)
        if other is NotImplemented:
            return NotImplemented
        return other / self

    def __pow__(self, n):
        if not isinstance(n, int):
            return NotImplemented
        if n == 0:
            return _ONE
        base = self if n > 0 else self.inverse()
        out = base
        for _ in range(abs(n) - 1):
            out = out * base
        return out

    def bar(self):
        """The involution ``q -> q^{-1}``."""
        return QScalar({-e: c for e, c in self.num.items()},
                       {-e: c for e, c in self.den.items()})

    # -- comparisons ----------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = QScalar.from_fraction(other)
        if not isinstance(other, QScalar):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((tuple(sorted(self.num.items())),
                               tuple(sorted(self.den.items()))))
        return self._hash

    # -- specializations ------------------------------------------------------

    def evaluate(self, q_val):
        """Substitute a concrete rational ``q`` (integer exponents only)."""
        q_val = Fraction(q_val)

        def ev(terms):
            s = F0
            for e, c in terms.items():
                if e.denominator != 1:
                    raise ValueError("rational exponent needs a compatible q value")
                s += c * q_val ** int(e)
            return s

        d = ev(self.den)
        if not d:
            raise ZeroDivisionError("denominator vanishes at this q")
        return ev(self.num) / d

    def eps_series(self, order):
        """Expansion under ``q = exp(eps)`` as a Laurent series in ``eps``.

        Returns ``(v, coeffs)`` with ``coeffs[m]`` the coefficient of
        ``eps^(v+m)``; ``len(coeffs) == order + 1``.
        """
        if not self.num:
            return 0, [F0] * (order + 1)

        def taylor(terms, n):
            out = [F0] * (n + 1)
            for e, c in terms.items():
                p = Fraction(1)
                e = Fraction(e)
                for m in range(n + 1):
                    out[m] += c * p
                    p = p * e / (m + 1)
            return out

        span_d = int(max(self.den) - min(self.den)) + 1
        span_n_exp = max(self.num) - min(self.num)
        span_n = int(span_n_exp) + 2
        n_work = order + span_d + span_n + 1
        dt = taylor(self.den, n_work)
        vd = next(i for i, c in enumerate(dt) if c)
        nt = taylor(self.num, n_work)
        vn = next((i for i, c in enumerate(nt) if c), None)
        if vn is None:
            raise ArithmeticError("expansion order too small to see the numerator")
        # divide the shifted series
        a = nt[vn:vn + order + 1]
        b = dt[vd:vd + order + 1]
        a += [F0] * (order + 1 - len(a))
        b += [F0] * (order + 1 - len(b))
        out = [F0] * (order + 1)
        for m in range(order + 1):
            acc = a[m]
            for j in range(m):
                acc -= out[j] * b[m - j]
            out[m] = acc / b[0]
        return vn - vd, out

    # -- rendering ------------------------------------------------------------

    def __str__(self):
        ns = _poly_str(self.num)
        if self.den == _ONE_DEN:
            return ns
        return "(%s)/(%s)" % (ns, _poly_str(self.den))

    __repr__ = __str__

    def json_obj(self):
        return {"num": _poly_str(self.num), "den": _poly_str(self.den)}


def _poly_str(terms):
    if not terms:
        return "0"
    parts = []
    for e in sorted(terms, reverse=True):
        c = terms[e]
        if e == 0:
            body = str(c)
        else:
            if e == 1:
                mono = "q"
            elif e.denominator == 1:
                mono = "q^%d" % e if e > 0 else "q^(%d)" % e
            else:
                mono = "q^(%s)" % e
            if c == 1:
                body = mono
            elif c == -1:
                body = "-" + mono
            else:
                body = "%s*%s" % (c, mono)
        parts.append(body)
    out = parts[0]
    for p in parts[1:]:
        out += " - " + p[1:] if p.startswith("-") else " + " + p
    return out


def _as_qscalar(x):
    if isinstance(x, QScalar):
        return x
    if isinstance(x, (int, Fraction)):
        return QScalar.from_fraction(x)
    return NotImplemented


_ZERO = QScalar({}, dict(_ONE_DEN), reduced=True)
_ONE = QScalar({F0: F1}, dict(_ONE_DEN), reduced=True)


def qs_zero():
    return _ZERO


def qs_one():
    return _ONE


# ---------------------------------------------------------------------------
# q-integers and their combinatorics
# ---------------------------------------------------------------------------


def q_integer(n, d=1):
    """The balanced q-integer ``(q^{dn} - q^{-dn}) / (q^d - q^{-d})``."""
    if n == 0:
        return _ZERO
    sign = 1
    if n < 0:
        n = -n
        sign = -1
    terms = {}
    for j in range(n):
        terms[Fraction(d * (n - 1 - 2 * j))] = Fraction(sign)
    return QScalar.laurent(terms)


def q_factorial(n, d=1):
    """Product ``[1][2]...[n]`` of balanced q-integers in base ``q^d``."""
    if n < 0:
        raise ValueError("factorial of a negative integer")
    out = _ONE
    for m in range(2, n + 1):
        out = out * q_integer(m, d)
    return out


def q_binomial(n, k, d=1):
    """Gauss binomial ``[n choose k]`` in base ``q^d``, for any integer ``n``."""
    if k < 0:
        return _ZERO
    out = _ONE
    for i in range(1, k + 1):
        out = out * q_integer(n - k + i, d) / q_integer(i, d)
    return out


# ---------------------------------------------------------------------------
# matrices of scalars
# ---------------------------------------------------------------------------


class QMatrix:
    """A small immutable square matrix of ``QScalar`` entries."""

    __slots__ = ("dim", "rows")

    def __init__(self, rows):
        rows = tuple(tuple(_require_qscalar(x) for x in r) for r in rows)
        self.dim = len(rows)
        for r in rows:
            if len(r) != self.dim:
                raise ValueError("matrix must be square")
        self.rows = rows

    @classmethod
    def identity(cls, dim):
        return cls([[(_ONE if i == j else _ZERO) for j in range(dim)] for i in range(dim)])

    @classmethod
    def zero(cls, dim):
        return cls([[_ZERO] * dim for _ in range(dim)])

    def __bool__(self):
        return any(any(x for x in r) for r in self.rows)

    def __eq__(self, other):
        if not isinstance(other, QMatrix):
            return NotImplemented
        return self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __add__(self, other):
        if not isinstance(other, QMatrix):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return QMatrix([[a + b for a, b in zip(r1, r2)]
                        for r1, r2 in zip(self.rows, other.rows)])

    def __sub__(self, other):
        if not isinstance(other, QMatrix):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return QMatrix([[a - b for a, b in zip(r1, r2)]
                        for r1, r2 in zip(self.rows, other.rows)])

    def __neg__(self):
        return QMatrix([[-a for a in r] for r in self.rows])

    def __mul__(self, other):
        if isinstance(other, QMatrix):
            n = self.dim
            if other.dim != n:
                raise ValueError("dimension mismatch")
            cols = list(zip(*other.rows))
            return QMatrix([[_dot(r, c) for c in cols] for r in self.rows])
        other = _as_qscalar(other)
        if other is NotImplemented:
            return NotImplemented
        return QMatrix([[a * other for a in r] for r in self.rows])

    def __rmul__(self, other):
        other = _as_qscalar(other)
        if other is NotImplemented:
            return NotImplemented
        return QMatrix([[other * a for a in r] for r in self.rows])

    def __truediv__(self, other):
        other = _as_qscalar(other)
        if other is NotImplemented:
            return NotImplemented
        inv = other.inverse()
        return QMatrix([[a * inv for a in r] for r in self.rows])

    def trace(self):
        t = _ZERO
        for i in range(self.dim):
            t = t + self.rows[i][i]
        return t

    def __str__(self):
        return "[" + "; ".join(", ".join(str(x) for x in r) for r in self.rows) + "]"

    __repr__ = __str__

    def json_obj(self):
        return [[x.json_obj() for x in r] for r in self.rows]


def _dot(r, c):
    acc = _ZERO
    for a, b in zip(r, c):
        if a and b:
            acc = acc + a * b
    return acc


def _require_qscalar(x):
    q = _as_qscalar(x)
    if q is NotImplemented:
        raise TypeError("expected a scalar, got %r" % (x,))
    return q


# ---------------------------------------------------------------------------
# exponential polynomials in the formal weight
# ---------------------------------------------------------------------------


class LambdaPoly:
    """Finite sum  ``sum_mu a_mu q^{<mu,lambda>}``  in a formal weight.

    ``terms`` maps exponent vectors (tuples of Fractions, simple-root
    coordinates) to coefficients.  Coefficients are ``QScalar`` throughout or
    ``QMatrix`` of one fixed dimension throughout; the two kinds may not mix
    inside one value.
    """

    __slots__ = ("rank", "terms")

    def __init__(self, rank, terms, normalized=False):
        self.rank = rank
        if normalized:
            self.terms = terms
        else:
            out = {}
            for k, v in terms.items():
                key = tuple(_intify(Fraction(x)) for x in k)
                if len(key) != rank:
                    raise ValueError("exponent vector of wrong rank")
                if v:
                    out[key] = v
            self.terms = out

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, rank):
        return cls(rank, {}, normalized=True)

    @classmethod
    def monomial(cls, rank, key, coeff=None):
        if coeff is None:
            coeff = _ONE
        else:
            coeff = _require_qscalar(coeff) if not isinstance(coeff, QMatrix) else coeff
        if not coeff:
            return cls.zero(rank)
        return cls(rank, {tuple(_intify(Fraction(x)) for x in key): coeff},
                   normalized=True)

    @classmethod
    def one(cls, rank):
        return cls.monomial(rank, (F0,) * rank)

    @classmethod
    def const(cls, rank, coeff):
        return cls.monomial(rank, (F0,) * rank, coeff)

    # -- structure ------------------------------------------------------------

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if not isinstance(other, LambdaPoly):
            return NotImplemented
        return self.rank == other.rank and self.terms == other.terms

    def __hash__(self):
        return hash((self.rank, tuple(sorted(self.terms.items()))))

    def support(self):
        return set(self.terms)

    def iter_sorted(self):
        for k in sorted(self.terms, reverse=True):
            yield k, self.terms[k]

    def lex_max_key(self):
        return max(self.terms)

    def coeff(self, key):
        return self.terms.get(tuple(Fraction(x) for x in key))

    def n_terms(self):
        return len(self.terms)

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self.terms)
        for k, v in other.terms.items():
            s = out.get(k)
            if s is None:
                out[k] = v
            else:
                s = s + v
                if s:
                    out[k] = s
                else:
                    del out[k]
        return LambdaPoly(self.rank, out, normalized=True)

    __radd__ = __add__

    def __neg__(self):
        return LambdaPoly(self.rank, {k: -v for k, v in self.terms.items()}, normalized=True)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, LambdaPoly):
            if other.rank != self.rank:
                raise ValueError("rank mismatch")
            a, b = self.terms, other.terms
            out = {}
            for ka, va in a.items():
                for kb, vb in b.items():
                    k = tuple(x + y for x, y in zip(ka, kb))
                    v = va * vb
                    s = out.get(k)
                    if s is None:
                        if v:
                            out[k] = v
                    else:
                        s = s + v
                        if s:
                            out[k] = s
                        else:
                            del out[k]
            return LambdaPoly(self.rank, out, normalized=True)
        if isinstance(other, (QScalar, QMatrix, int, Fraction)):
            return self.scale_right(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (QScalar, QMatrix, int, Fraction)):
            return self.scale_left(other)
        return NotImplemented

    def scale_left(self, c):
        if isinstance(c, (int, Fraction)):
            c = QScalar.from_fraction(c)
        if not c:
            return LambdaPoly.zero(self.rank)
        return LambdaPoly(self.rank,
                          {k: v2 for k, v in self.terms.items() if (v2 := c * v)},
                          normalized=True)

    def scale_right(self, c):
        if isinstance(c, (int, Fraction)):
            c = QScalar.from_fraction(c)
        if not c:
            return LambdaPoly.zero(self.rank)
        return LambdaPoly(self.rank,
                          {k: v2 for k, v in self.terms.items() if (v2 := v * c)},
                          normalized=True)

    def mul_key(self, key, coeff=None):
        """Fast multiply by the monomial ``coeff * q^{<key,lambda>}``."""
        key = tuple(_intify(Fraction(x)) for x in key)
        out = {}
        for k, v in self.terms.items():
            nk = tuple(_intify(x + y) for x, y in zip(k, key))
            out[nk] = v if coeff is None else coeff * v
        return LambdaPoly(self.rank, out, normalized=False if coeff is not None else True)

    # -- specializations ------------------------------------------------------

    def evaluate(self, rs, kappa):
        """Substitute a concrete weight (simple-root coordinates)."""
        kappa = tuple(Fraction(x) for x in kappa)
        acc = None
        for k, v in self.terms.items():
            e = rs.pairing_alpha(k, kappa)
            t = v * QScalar.q_power(e) if isinstance(v, QMatrix) else QScalar.q_power(e) * v
            acc = t if acc is None else acc + t
        if acc is None:
            return _ZERO if self._scalar_valued() else None
        return acc

    def shifted(self, rs, sigma):
        """The value at ``lambda + sigma`` as a new polynomial in ``lambda``."""
        sigma = tuple(Fraction(x) for x in sigma)
        out = {}
        for k, v in self.terms.items():
            c = QScalar.q_power(rs.pairing_alpha(k, sigma))
            out[k] = v * c if isinstance(v, QMatrix) else c * v
        return LambdaPoly(self.rank, out, normalized=True)

    def restricted(self, normal, value, pivot=None):
        """Substitute on the hyperplane ``<normal, lambda> = value``.

        ``normal`` is given in simple-root coordinates; the pivot coordinate of
        every exponent vector is eliminated, so keys keep their length but the
        pivot entry becomes 0.  Exponents stay rational.
        """
        normal = tuple(Fraction(x) for x in normal)
        value = Fraction(value)
        if pivot is None:
            pivot = next(i for i, c in enumerate(normal) if c)
        cj = normal[pivot]
        out = {}
        for k, v in self.terms.items():
            t = Fraction(k[pivot]) / cj
            nk = tuple(_intify(Fraction(x) - t * c) for x, c in zip(k, normal))
            f = QScalar.q_power(t * value)
            nv = v * f if isinstance(v, QMatrix) else f * v
            s = out.get(nk)
            if s is None:
                if nv:
                    out[nk] = nv
            else:
                s = s + nv
                if s:
                    out[nk] = s
                else:
                    del out[nk]
        return LambdaPoly(self.rank, out, normalized=True)

    # -- helpers ---------------------------------------------------------------

    def _scalar_valued(self):
        for v in self.terms.values():
            return not isinstance(v, QMatrix)
        return True

    def _coerce(self, other):
        if isinstance(other, LambdaPoly):
            if other.rank != self.rank:
                raise ValueError("rank mismatch")
            return other
        if isinstance(other, (int, Fraction, QScalar)):
            c = _as_qscalar(other)
            if not c:
                return LambdaPoly.zero(self.rank)
            return LambdaPoly.const(self.rank, c)
        if isinstance(other, QMatrix):
            return LambdaPoly.const(self.rank, other)
        return NotImplemented

    # -- rendering --------------------------------------------------------------

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for k, v in self.iter_sorted():
            vs = str(v)
            if any(k):
                key = "(" + ",".join(str(x) for x in k) + ")"
                if vs == "1":
                    parts.append("q^{%s.la}" % key)
                else:
                    parts.append("(%s)*q^{%s.la}" % (vs, key))
            else:
                parts.append(vs if ("+" not in vs and " - " not in vs) else "(%s)" % vs)
        return " + ".join(parts)

    __repr__ = __str__

    def json_obj(self):
        out = []
        for k, v in self.iter_sorted():
            coeff = v.json_obj()
            out.append({"exponent": [str(x) for x in k], "coeff": coeff})
        return out


def exact_div(f, g):
    """Exact division of ``LambdaPoly`` values: returns ``h`` with ``f = h*g``.

    ``g`` must be scalar-valued; ``f`` may be scalar- or matrix-valued.  Raises
    ``InexactDivision`` when no exact quotient exists.  Uses lexicographic
    leading-term elimination; candidate quotient exponents outside the corner
    box ``box(f) - box(g)`` (a Newton-polytope consequence of exactness) abort
    early.
    """
    if not isinstance(f, LambdaPoly) or not isinstance(g, LambdaPoly):
        raise TypeError("exact_div needs LambdaPoly operands")
    if not g:
        raise ZeroDivisionError("division by the zero polynomial")
    if not f:
        return f
    r = f.rank
    gkeys = list(g.terms)
    fkeys = list(f.terms)
    lo = tuple(min(k[i] for k in fkeys) - min(k[i] for k in gkeys) for i in range(r))
    hi = tuple(max(k[i] for k in fkeys) - max(k[i] for k in gkeys) for i in range(r))
    glead = max(gkeys)
    ginv = g.terms[glead].inverse()
    rem = dict(f.terms)
    quo = {}
    while rem:
        rlead = max(rem)
        qkey = tuple(a - b for a, b in zip(rlead, glead))
        if any(x < l or x > h for x, l, h in zip(qkey, lo, hi)):
            raise InexactDivision("quotient support escapes the corner box")
        qval = rem[rlead] * ginv
        quo[qkey] = qval
        for gk, gv in g.terms.items():
            k = tuple(a + b for a, b in zip(qkey, gk))
            s = rem.get(k)
            t = qval * gv
            if s is None:
                rem[k] = -t
            else:
                s = s - t
                if s:
                    rem[k] = s
                else:
                    del rem[k]
    return LambdaPoly(r, quo, normalized=True)


def unit_monomial_ratio(p, base):
    """If ``p == u * q^{<m,lambda>} * base`` for a nonzero scalar ``u`` and a
    single exponent vector ``m``, return ``(m, u)``; otherwise ``None``."""
    if not p or not base:
        return None if (p or base) else (((F0,) * p.rank), _ONE)
    try:
        quo = exact_div(p, base)
    except InexactDivision:
        return None
    if len(quo.terms) != 1:
        return None
    ((m, u),) = quo.terms.items()
    return m, u
