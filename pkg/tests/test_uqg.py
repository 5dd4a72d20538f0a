"""Verma-module engine: raising action, contravariant form, finite modules."""

import random
from fractions import Fraction as Fr

import pytest

from qmac.qfield import (
    LambdaPoly,
    QMatrix,
    QScalar,
    q_factorial,
    qs_one,
    unit_monomial_ratio,
)
from qmac.rootdata import root_system
from qmac.uqg import (
    DimensionCapExceeded,
    Uq,
    VermaVector,
    build_finite_module,
    word_weight,
)

A1 = root_system("A1")
A2 = root_system("A2")


@pytest.fixture(scope="module")
def uq1():
    return Uq(A1)


@pytest.fixture(scope="module")
def uq2():
    return Uq(A2)


# ---------------------------------------------------------------------------
# raising action


def test_apply_e_on_highest_weight(uq1):
    assert not uq1.apply_e(0, VermaVector.highest_weight(1))


def test_apply_e_single_letter(uq1):
    v = VermaVector.word(1, (0,))
    out = uq1.apply_e(0, v)
    # (q^{<a,la>} - q^{-<a,la>})/(q - q^{-1}) on the empty word
    denom = QScalar.q_power(1) - QScalar.q_power(-1)
    expect = LambdaPoly(1, {(1,): qs_one() / denom, (-1,): -(qs_one() / denom)})
    assert out.terms == {(): expect}


def test_apply_e_wrong_color(uq2):
    v = VermaVector.word(2, (0,))
    assert not uq2.apply_e(1, v)


def test_apply_e_two_letters(uq1):
    # E F F v has a single word F with coefficient [<a,la>] + [<a,la>-2]
    out = uq1.apply_e(0, VermaVector.word(1, (0, 0)))
    assert set(out.terms) == {(0,)}
    c = out.terms[(0,)]
    # evaluate at <a,la> = 4 (la = 2a): [4] + [2]
    got = c.evaluate(A1, (2,))
    expect = (QScalar.q_power(4) - QScalar.q_power(-4) + QScalar.q_power(2)
              - QScalar.q_power(-2)) / (QScalar.q_power(1) - QScalar.q_power(-1))
    assert got == expect


def test_apply_f_prepends(uq1):
    v = VermaVector.word(1, (0,))
    assert set(uq1.apply_f(0, v).terms) == {(0, 0)}


def test_apply_k_highest_weight(uq1):
    out = uq1.apply_k(0, VermaVector.highest_weight(1))
    assert out.terms[()] == LambdaPoly.monomial(1, (1,))


def test_apply_k_inverse_round_trip(uq2):
    v = VermaVector.word(2, (0, 1, 0))
    back = uq2.apply_k(0, uq2.apply_k(0, v), power=-1)
    assert back == v


def test_mixed_weight_vector_rejected():
    v = VermaVector(1, {(0,): LambdaPoly.one(1), (0, 0): LambdaPoly.one(1)})
    with pytest.raises(ValueError):
        v.weight()


# ---------------------------------------------------------------------------
# contravariant pairing


def test_pairing_normalization(uq1):
    assert uq1.contravariant_pairing((), ()) == LambdaPoly.one(1)


def test_pairing_orthogonal_weights(uq2):
    assert uq2.contravariant_pairing((0,), (1,)) == LambdaPoly.zero(2)
    assert uq2.contravariant_pairing((0,), (0, 1)) == LambdaPoly.zero(2)


def test_pairing_single_f(uq1):
    p = uq1.contravariant_pairing((0,), (0,))
    ratio = unit_monomial_ratio(p, uq1.predicted_determinant((1,)))
    assert ratio is not None
    mono, unit = ratio
    # the unit must not depend on la, which unit_monomial_ratio guarantees;
    # the monomial records the q^{-<la,mu>} convention slack
    assert unit


def test_pairing_symmetric(uq2):
    words = uq2.words_of_weight((2, 1))
    for a in words:
        for b in words:
            assert uq2.contravariant_pairing(a, b) == uq2.contravariant_pairing(b, a)


def test_pairing_specialized_matches_generic(uq2):
    rng = random.Random(6)
    words = uq2.words_of_weight((1, 1)) + uq2.words_of_weight((2, 1))
    for _ in range(10):
        a = rng.choice(words)
        b = rng.choice(words)
        theta = (rng.randint(0, 3), rng.randint(0, 3))
        gen = uq2.contravariant_pairing(a, b).evaluate(A2, theta)
        spec = uq2.pairing_at(theta, a, b)
        assert gen == spec


# ---------------------------------------------------------------------------
# weight bases and Shapovalov matrices


def test_weight_basis_trivial(uq1):
    assert uq1.weight_basis((0,)) == ((),)


def test_weight_basis_a1(uq1):
    assert uq1.weight_basis((2,)) == ((0, 0),)


def test_weight_basis_a2(uq2):
    assert uq2.weight_basis((1, 1)) == ((0, 1), (1, 0))


def test_weight_basis_size_is_partition_count(uq2):
    for mu in [(1, 0), (1, 1), (2, 1), (1, 2), (3, 0)]:
        assert len(uq2.weight_basis(mu)) == A2.kostant_partition(mu)


def test_generic_rank_equals_partition_count(uq1, uq2):
    for n in range(5):
        assert uq1.generic_weight_rank((n,)) == 1
    for mu in [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (1, 2), (3, 0)]:
        assert uq2.generic_weight_rank(mu) == A2.kostant_partition(mu)


def test_shapovalov_trivial(uq1):
    sm = uq1.shapovalov_matrix((0,))
    assert sm.size == 1
    assert sm.entries[0][0] == LambdaPoly.one(1)
    assert sm.det() == LambdaPoly.one(1)


def test_shapovalov_symmetric(uq2):
    for mu in [(1, 1), (2, 1)]:
        sm = uq2.shapovalov_matrix(mu)
        for i in range(sm.size):
            for j in range(sm.size):
                assert sm.entries[i][j] == sm.entries[j][i]


def test_predicted_determinant_trivial(uq1):
    assert uq1.predicted_determinant((0,)) == LambdaPoly.one(1)


def test_predicted_determinant_a1_2alpha(uq1):
    # (1 - q^{-2<a,la+rho>+2})(1 - q^{-2<a,la+rho>+4}), <a,rho> = 1
    f1 = LambdaPoly(1, {(0,): qs_one(), (-2,): -QScalar.q_power(0)})
    f2 = LambdaPoly(1, {(0,): qs_one(), (-2,): -QScalar.q_power(2)})
    assert uq1.predicted_determinant((2,)) == f1 * f2


def test_predicted_determinant_a2_alpha1(uq2):
    expect = LambdaPoly(2, {(0, 0): qs_one(), (-2, 0): -QScalar.q_power(0)})
    assert uq2.predicted_determinant((1, 0)) == expect


def test_predicted_determinant_a2_theta_factors(uq2):
    # three factors, one per positive root, each with Par-exponent 1
    one = qs_one()
    f = lambda key, e: LambdaPoly(2, {(0, 0): one, key: -QScalar.q_power(e)})
    # simple roots give exponent -2<a,rho>+<a,a> = 0; the highest root
    # has <th,rho> = 2 and <th,th> = 2, so its exponent is -2
    expect = f((-2, 0), 0) * f((0, -2), 0) * f((-2, -2), -2)
    assert uq2.predicted_determinant((1, 1)) == expect


@pytest.mark.parametrize("n", range(1, 5))
def test_determinant_formula_a1(uq1, n):
    sm = uq1.shapovalov_matrix((n,))
    assert unit_monomial_ratio(sm.det(), uq1.predicted_determinant((n,))) is not None


@pytest.mark.parametrize("mu", [(1, 0), (0, 1), (1, 1), (2, 0), (2, 1), (1, 2), (3, 0)])
def test_determinant_formula_a2(uq2, mu):
    sm = uq2.shapovalov_matrix(mu)
    assert unit_monomial_ratio(sm.det(), uq2.predicted_determinant(mu)) is not None


def test_determinant_formula_b2():
    uq = Uq(root_system("B2"))
    for mu in [(1, 0), (0, 1), (1, 1), (2, 1)]:
        sm = uq.shapovalov_matrix(mu)
        assert unit_monomial_ratio(sm.det(), uq.predicted_determinant(mu)) is not None


# ---------------------------------------------------------------------------
# finite modules


def test_trivial_module(uq1):
    m = build_finite_module(uq1, (0,))
    assert m.dim == 1
    assert m.u0 == (0,)
    assert all(k == 0 for k in m.k_alpha.values())


def test_three_dimensional_module(uq1):
    m = build_finite_module(uq1, (2,))
    assert m.dim == 3
    assert len(m.u0) == 1
    assert m.k_alpha[(1,)] == 1
    assert m.big_theta == (1,)
    # weights are 2L1, 0, -2L1 i.e. a, 0, -a in alpha coordinates
    assert set(m.weights) == {(1,), (0,), (-1,)}


@pytest.mark.parametrize("k", [0, 1, 2])
def test_symmetric_power_family(uq1, k):
    m = build_finite_module(uq1, (2 * k,))
    assert m.dim == 2 * k + 1
    assert len(m.u0) == 1
    assert m.k_alpha[(1,)] == k
    assert m.big_theta == (k,)


def test_adjoint_module(uq2):
    m = build_finite_module(uq2, (1, 1))
    assert m.dim == 8
    assert len(m.u0) == 2
    assert set(m.k_alpha.values()) == {1}
    assert m.big_theta == (2, 2)


def test_ten_dimensional_module(uq2):
    m = build_finite_module(uq2, (3, 0))
    assert m.dim == 10
    assert len(m.u0) == 1
    assert m.big_theta == (2, 2)


def test_module_weights_weyl_symmetric(uq1, uq2):
    cases = [(uq1, (6,)), (uq2, (1, 1)), (uq2, (2, 2))]
    for uq, fund in cases:
        m = build_finite_module(uq, fund)
        rs = uq.rs
        for w in rs.weyl_elements():
            for mu in m.weights:
                assert m.dim_of_weight(w.action(mu)) == m.dim_of_weight(mu)


def test_module_k_eigenvalues(uq2):
    m = build_finite_module(uq2, (1, 1))
    for i in range(2):
        for n, (beta, _) in enumerate(m.basis):
            mu = m.weight_of(n)
            assert m.k_diag[i][n] == QScalar.q_power(
                A2.pairing_alpha(A2.alpha(i), mu))


def test_non_dominant_rejected(uq1):
    with pytest.raises(ValueError):
        build_finite_module(uq1, (-2,))
    with pytest.raises(ValueError):
        build_finite_module(uq1, (Fr(1, 2),))


def test_dimension_cap(uq1):
    with pytest.raises(DimensionCapExceeded):
        build_finite_module(uq1, (200,))


def test_b2_module_builds():
    uq = Uq(root_system("B2"))
    # node 1 is the short root: its fundamental module is the 4-dim spinor
    spin = build_finite_module(uq, (1, 0))
    assert spin.dim == 4
    assert len(spin.u0) == 0
    vec = build_finite_module(uq, (0, 1))
    assert vec.dim == 5
    assert len(vec.u0) == 1


def test_fe_power_identity(uq1):
    m = build_finite_module(uq1, (2,))
    assert m.fe_power_action(0, 0) == QMatrix.identity(1)


@pytest.mark.parametrize("k,n", [(1, 1), (2, 1), (2, 2)])
def test_fe_power_factorial_ratio(uq1, k, n):
    m = build_finite_module(uq1, (2 * k,))
    got = m.fe_power_action(0, n)
    expect = q_factorial(k + n) / q_factorial(k - n)
    assert got == QMatrix([[expect]])


def test_fe_power_on_matrix_zero_weight_space(uq2):
    m = build_finite_module(uq2, (1, 1))
    got = m.fe_power_action(0, 1)
    # on the adjoint's two-dimensional zero weight space F_1 E_1 is a rank-one
    # projector scaled by [2]: its trace is [2] and its square is [2]-times it
    two = q_factorial(2)
    assert got.trace() == two
    assert got * got == got * two


def test_word_weight_helper():
    assert word_weight(2, (0, 1, 0)) == (Fr(2), Fr(1))
    assert word_weight(2, ()) == (Fr(0), Fr(0))


def test_module_json_shape(uq1):
    m = build_finite_module(uq1, (2,))
    obj = m.json_obj()
    assert obj["dim"] == 3
    assert len(obj["e"]) == 1 and len(obj["f"]) == 1
    assert obj["weights"][0] == ["1"]
