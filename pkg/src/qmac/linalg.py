"""Exact linear algebra over the scalar field and the q-polynomial ring.

Two families of routines:

* ``field_*`` — plain Gaussian elimination for matrices of QScalar, where
  division is cheap.
* ``bareiss_*`` — fraction-free elimination (single-step Bareiss, and its
  Gauss-Jordan form for solving) for matrices of LambdaPoly, where all
  intermediate divisions are exact by the Sylvester identity and are checked
  by ``exact_div``.  ``bareiss_solve`` returns numerators together with a
  common denominator equal to a pivot-product determinant, so callers can
  keep working ring-side.

Matrices are plain lists of row lists; nothing here mutates its arguments.
"""

from .qfield import LambdaPoly, exact_div, qs_one, qs_zero


class SingularMatrix(ArithmeticError):
    """Elimination hit a structurally singular matrix."""


# ---------------------------------------------------------------------------
# QScalar matrices


def _field_weight(x):
    return len(x.num) + len(x.den)


def field_rank(rows):
    if not rows:
        return 0
    m = [list(r) for r in rows]
    nrows, ncols = len(m), len(m[0])
    r = 0
    for c in range(ncols):
        cands = [i for i in range(r, nrows) if m[i][c]]
        if not cands:
            continue
        i0 = min(cands, key=lambda i: (_field_weight(m[i][c]), i))
        m[r], m[i0] = m[i0], m[r]
        inv = m[r][c].inverse()
        for i in range(r + 1, nrows):
            if not m[i][c]:
                continue
            f = m[i][c] * inv
            for j in range(c, ncols):
                m[i][j] = m[i][j] - f * m[r][j]
        r += 1
        if r == nrows:
            break
    return r


def field_solve(a_rows, b_rows):
    """Solve A·X = B over the scalar field; raises SingularMatrix."""
    n = len(a_rows)
    if any(len(r) != n for r in a_rows):
        raise ValueError("coefficient matrix must be square")
    width = len(b_rows[0]) if b_rows else 0
    m = [list(ar) + list(br) for ar, br in zip(a_rows, b_rows)]
    for k in range(n):
        cands = [i for i in range(k, n) if m[i][k]]
        if not cands:
            raise SingularMatrix("no pivot in column %d" % k)
        i0 = min(cands, key=lambda i: (_field_weight(m[i][k]), i))
        m[k], m[i0] = m[i0], m[k]
        inv = m[k][k].inverse()
        for j in range(k, n + width):
            m[k][j] = m[k][j] * inv
        for i in range(n):
            if i == k or not m[i][k]:
                continue
            f = m[i][k]
            for j in range(k, n + width):
                m[i][j] = m[i][j] - f * m[k][j]
    return [row[n:] for row in m]


def field_inverse(a_rows):
    n = len(a_rows)
    one, zero = qs_one(), qs_zero()
    eye = [[one if i == j else zero for j in range(n)] for i in range(n)]
    return field_solve(a_rows, eye)


# ---------------------------------------------------------------------------
# LambdaPoly matrices (fraction-free)


def _poly_weight(x):
    return x.n_terms()


def _bareiss_step(m, k, prev, cols):
    piv = m[k][k]
    for i in range(len(m)):
        if i == k:
            continue
        fik = m[i][k]
        row = m[i]
        for j in cols:
            num = piv * row[j] - fik * m[k][j]
            row[j] = exact_div(num, prev) if prev is not None else num
        row[k] = row[k].__class__.zero(row[k].rank)


def bareiss_det(a_rows):
    """Determinant of a square LambdaPoly matrix, fraction-free."""
    n = len(a_rows)
    if n == 0:
        raise ValueError("empty matrix")
    rank = a_rows[0][0].rank
    m = [list(r) for r in a_rows]
    sign = 1
    prev = None
    for k in range(n - 1):
        cands = [i for i in range(k, n) if m[i][k]]
        if not cands:
            return LambdaPoly.zero(rank)
        i0 = min(cands, key=lambda i: (_poly_weight(m[i][k]), i))
        if i0 != k:
            m[k], m[i0] = m[i0], m[k]
            sign = -sign
        piv = m[k][k]
        for i in range(k + 1, n):
            fik = m[i][k]
            for j in range(k + 1, n):
                num = piv * m[i][j] - fik * m[k][j]
                m[i][j] = exact_div(num, prev) if prev is not None else num
        prev = piv
    det = m[n - 1][n - 1]
    return -det if sign < 0 else det


def bareiss_rank(a_rows):
    if not a_rows:
        return 0
    m = [list(r) for r in a_rows]
    nrows, ncols = len(m), len(m[0])
    r = 0
    prev = None
    for c in range(ncols):
        cands = [i for i in range(r, nrows) if m[i][c]]
        if not cands:
            continue
        i0 = min(cands, key=lambda i: (_poly_weight(m[i][c]), i))
        m[r], m[i0] = m[i0], m[r]
        piv = m[r][c]
        for i in range(r + 1, nrows):
            fik = m[i][c]
            for j in range(c + 1, ncols):
                num = piv * m[i][j] - fik * m[r][j]
                m[i][j] = exact_div(num, prev) if prev is not None else num
            m[i][c] = LambdaPoly.zero(piv.rank)
        prev = piv
        r += 1
        if r == nrows:
            break
    return r


def bareiss_solve(a_rows, b_rows):
    """Fraction-free solve of A·X = B.

    Returns ``(x_num, den)`` with X = x_num/den entrywise and den equal to
    the last Gauss-Jordan pivot (a signed determinant of A).  B's entries may
    be matrix-valued; A's must be scalar-valued.
    """
    n = len(a_rows)
    if any(len(r) != n for r in a_rows):
        raise ValueError("coefficient matrix must be square")
    width = len(b_rows[0]) if b_rows else 0
    m = [list(ar) + list(br) for ar, br in zip(a_rows, b_rows)]
    prev = None
    for k in range(n):
        cands = [i for i in range(k, n) if m[i][k]]
        if not cands:
            raise SingularMatrix("no pivot in column %d" % k)
        i0 = min(cands, key=lambda i: (_poly_weight(m[i][k]), i))
        m[k], m[i0] = m[i0], m[k]
        _bareiss_step(m, k, prev, [j for j in range(n + width) if j != k])
        prev = m[k][k]
    return [row[n:] for row in m], prev


def bareiss_adjugate(a_rows):
    """``(adj, den)`` with A·adj = den·Id; den is a signed determinant."""
    n = len(a_rows)
    rank = a_rows[0][0].rank
    one, zero = LambdaPoly.one(rank), LambdaPoly.zero(rank)
    eye = [[one if i == j else zero for j in range(n)] for i in range(n)]
    return bareiss_solve(a_rows, eye)
