"""Annihilated vectors, normalization, and the weighted-trace series."""

from fractions import Fraction as Fr

import pytest

from qmac.qfield import (
    InexactDivision,
    LambdaPoly,
    QMatrix,
    QScalar,
    exact_div,
    qs_one,
    qs_zero,
)
from qmac.rootdata import root_system
from qmac.uqg import Uq, build_finite_module
from qmac.intertwine import (
    chi,
    check_annihilated,
    factor_B,
    intertwiner_image,
    iter_cone_weights,
    normalize,
    partial_trace,
    psi_series,
    singular_system,
    singular_vector,
)

qp = QScalar.q_power

A1 = root_system("A1")
A2 = root_system("A2")
B2 = root_system("B2")


@pytest.fixture(scope="module")
def m1():
    # rank one, one wall: dim 3, one zero-weight vector
    return build_finite_module(Uq(A1), (2,))


@pytest.fixture(scope="module")
def m2():
    # rank one, two walls: dim 5
    return build_finite_module(Uq(A1), (4,))


@pytest.fixture(scope="module")
def madj():
    # rank-two adjoint: one wall on each of the three positive roots,
    # two-dimensional zero-weight space
    return build_finite_module(Uq(A2), (1, 1))


@pytest.fixture(scope="module")
def mb():
    # B2 five-dimensional module: walls on the two long positive roots only
    return build_finite_module(Uq(B2), (0, 1))


@pytest.fixture(scope="module")
def psi1(m1):
    return psi_series(m1, depth=8, method="exact")


@pytest.fixture(scope="module")
def psi2(m2):
    return psi_series(m2, depth=8, method="exact")


@pytest.fixture(scope="module")
def psi_adj(madj):
    return psi_series(madj, depth=4, method="exact")


# ---------------------------------------------------------------------------
# cone iteration


def test_cone_weights_by_height_then_lex():
    assert list(iter_cone_weights(2, 2)) == [
        (0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]


def test_cone_weights_rank_one():
    assert list(iter_cone_weights(1, 3)) == [(0,), (1,), (2,), (3,)]


def test_cone_weights_deterministic():
    assert list(iter_cone_weights(3, 4)) == list(iter_cone_weights(3, 4))


# ---------------------------------------------------------------------------
# wall-factor normalizer


def test_chi_rank_one_single_wall(m1):
    assert chi(m1) == LambdaPoly(1, {(0,): qs_one(), (-2,): -qs_one()})


def test_chi_rank_one_two_walls(m2):
    # (1 - y)(1 - q^2 y) in y = q^{-2<alpha, lambda>}
    assert chi(m2) == LambdaPoly(
        1, {(0,): qs_one(), (-2,): -(qs_one() + qp(2)), (-4,): qp(2)})


def test_chi_adjoint(madj):
    # (1 - y1)(1 - y2)(1 - q^{-2} y1 y2)
    assert chi(madj) == LambdaPoly(2, {
        (0, 0): qs_one(),
        (-2, 0): -qs_one(),
        (0, -2): -qs_one(),
        (-2, -2): qs_one() - qp(-2),
        (-4, -2): qp(-2),
        (-2, -4): qp(-2),
        (-4, -4): -qp(-2),
    })


# ---------------------------------------------------------------------------
# annihilated vectors


def test_singular_vector_rejects_nonzero_weight(m1):
    with pytest.raises(ValueError):
        singular_vector(m1, 0)


def test_singular_vector_rank_one_piece(m1):
    assert m1.dim == 3 and m1.u0 == (1,)
    sv = singular_vector(m1, 1)
    piece = sv.pieces[(1,)]
    assert piece["words"] == ((0,),)
    assert piece["cols"] == (0,)
    assert piece["num"] == [[LambdaPoly(1, {(0,): -qp(2) + qp(-2)})]]
    assert piece["den"] == LambdaPoly(1, {(0,): qs_one(), (-2,): -qs_one()})


def test_flatten_requires_normalization(m1):
    with pytest.raises(ValueError):
        singular_vector(m1, 1).as_terms()


def test_normalize_rank_one(m1):
    phi = normalize(singular_vector(m1, 1))
    terms = phi.as_terms()
    assert set(terms) == {((), 1), ((0,), 0)}
    # the zero-weight slot carries the full normalizer, the depth-one slot
    # the cleared numerator
    assert terms[((), 1)] == chi(m1)
    assert terms[((0,), 0)] == LambdaPoly(1, {(0,): -qp(2) + qp(-2)})


def test_normalize_is_idempotent(m1):
    phi = normalize(singular_vector(m1, 1))
    assert normalize(phi) is phi


def test_intertwiner_image_one_letter(m1):
    phi = normalize(singular_vector(m1, 1))
    img = intertwiner_image(phi, (0,))
    assert sorted(img) == [((), 2), ((0,), 1), ((0, 0), 0)]


def test_raising_operators_kill_rank_one(m1):
    check_annihilated(normalize(singular_vector(m1, 1)))


def test_raising_operators_kill_adjoint(madj):
    for phi in singular_system(madj):
        check_annihilated(phi)


def test_raising_operators_kill_b2(mb):
    for phi in singular_system(mb):
        check_annihilated(phi)


# ---------------------------------------------------------------------------
# trace series, rank one


def test_rank_one_series_closed_form(psi1):
    # B_m = 1 - y + sum_{j=1..m} (q^{-2j} - q^{4-2j}),  y = q^{-2<alpha,lambda>}
    for m in range(9):
        c0 = qs_one() + sum((qp(-2 * j) - qp(4 - 2 * j) for j in range(1, m + 1)),
                            qs_zero())
        assert psi1.b((m,)) == LambdaPoly(
            1, {(0,): QMatrix([[c0]]), (-2,): QMatrix([[-qs_one()]])})


def test_rank_one_leading_term_is_chi(psi1, m1):
    assert psi1.b((0,)) == LambdaPoly(
        1, {k: QMatrix([[v]]) for k, v in chi(m1).terms.items()})


def test_series_matches_partial_trace(m1, psi1):
    phis = singular_system(m1)
    assert partial_trace(phis, (3,)) == psi1.b((3,))


def test_interpolated_equals_exact_rank_one(m1, psi1):
    psi = psi_series(m1, depth=8, method="interp")
    assert set(psi.terms) == set(psi1.terms)
    assert all(psi.terms[k] == psi1.terms[k] for k in psi.terms)


def test_interpolated_equals_exact_two_walls(m2, psi2):
    psi = psi_series(m2, depth=8, method="interp")
    assert set(psi.terms) == set(psi2.terms)
    assert all(psi.terms[k] == psi2.terms[k] for k in psi.terms)


def test_series_off_cone_and_beyond_depth(psi1):
    assert not psi1.b((-1,))
    with pytest.raises(KeyError):
        psi1.b((9,))


def test_series_support_stays_in_box(psi1):
    for mu, poly in psi1.terms.items():
        assert set(poly.terms) <= {(0,), (-2,)}, mu


def test_unknown_method_rejected(m1):
    with pytest.raises(ValueError):
        psi_series(m1, depth=2, method="newton")


def test_trivial_module_counts_partitions():
    mod = build_finite_module(Uq(A2), (0, 0))
    psi = psi_series(mod, depth=6, method="interp")
    for mu in iter_cone_weights(2, 6):
        expect = LambdaPoly(2, {(0, 0): QMatrix(
            [[QScalar.from_fraction(A2.kostant_partition(mu))]])})
        assert psi.b(mu) == expect, mu


# ---------------------------------------------------------------------------
# trace series, rank two


def test_adjoint_leading_term_is_chi_times_identity(psi_adj, madj):
    zero = qs_zero()
    expect = LambdaPoly(2, {k: QMatrix([[v, zero], [zero, v]])
                            for k, v in chi(madj).terms.items()})
    assert psi_adj.b((0, 0)) == expect


def test_interpolated_equals_exact_adjoint(madj, psi_adj):
    psi = psi_series(madj, depth=4, method="interp")
    assert set(psi.terms) == set(psi_adj.terms)
    assert all(psi.terms[k] == psi_adj.terms[k] for k in psi.terms)


def test_b2_module_shape(mb):
    assert mb.dim == 5
    assert mb.u0 == (2,)
    assert mb.big_theta == (Fr(2), Fr(1))
    assert {tuple(int(c) for c in a): k for a, k in mb.k_alpha.items()} == {
        (1, 0): 1, (1, 1): 1, (0, 1): 0, (2, 1): 0}


def test_b2_series_frozen_values(mb):
    psi = psi_series(mb, depth=4, method="interp")
    one = qs_one()

    def entry(d):
        return LambdaPoly(2, {k: QMatrix([[v]]) for k, v in d.items()})

    assert psi.b((0, 0)) == entry({
        (0, 0): one, (-2, 0): -one, (-2, -2): -qp(-4), (-4, -2): qp(-4)})
    # the wall data has no factor on alpha_2, so one step along it is free
    assert psi.b((0, 1)) == psi.b((0, 0))
    assert psi.b((1, 0)) == entry({
        (0, 0): -qp(2) + one + qp(-2),
        (-2, 0): -one,
        (-2, -2): qp(-2) - qp(-4) - qp(-6),
        (-4, -2): qp(-4)})
    assert psi.b((1, 1)) == entry({
        (0, 0): -2 * qp(2) + 2 * qs_one() + 2 * qp(-2),
        (-2, 0): qp(2) - 2 * qs_one() - qp(-2),
        (-2, -2): qp(-2) - 2 * qp(-4) - qp(-6),
        (-4, -2): 2 * qp(-4)})
    assert psi.b((2, 1)) == entry({
        (0, 0): qp(4) - 3 * qp(2) + 3 * qp(-2) + 2 * qp(-4),
        (-2, 0): qp(2) - 3 * qs_one() - qp(-2),
        (-2, -2): 2 * qp(-2) - 2 * qp(-4) - 2 * qp(-6) - qp(-8),
        (-4, -2): 3 * qp(-4)})


# ---------------------------------------------------------------------------
# dual view


def test_dual_view_collects_by_box_point(psi1):
    dual = psi1.dual_view()
    assert set(dual) == {(0,), (1,)}
    # the box point mu = alpha carries q^{2<alpha,rho>} = q^2 times the raw
    # coefficient, which is -1 for every order
    for m in range(4):
        assert dual[(1,)][(m,)] == QMatrix([[-qp(2)]])
        assert dual[(0,)][(m,)] == psi1.b((m,)).terms[(0,)]


# ---------------------------------------------------------------------------
# quasi-invariance factors


def test_factor_rank_one_scalars(psi1, psi2):
    # the factor collapses to q^{-n <alpha, Theta>}
    for psi, n, expect in [(psi1, 1, qp(-2)), (psi2, 1, qp(-4)),
                           (psi2, 2, qp(-8))]:
        fb = factor_B(psi, (1,), n)
        assert fb.residual_ok
        assert fb.x_independent
        assert fb.scalar_value() == expect


def test_factor_arguments_validated(psi1, psi_adj):
    with pytest.raises(ValueError):
        factor_B(psi1, (2,), 1)      # not a positive root
    with pytest.raises(ValueError):
        factor_B(psi1, (1,), 2)      # beyond the wall count
    with pytest.raises(ValueError):
        factor_B(psi_adj, (2, 1), 1)


def test_factor_adjoint_simple_walls(psi_adj):
    zero, frac = qs_zero(), qp(-1) / (qp(2) + qs_one())
    fb = factor_B(psi_adj, (0, 1), 1)
    assert fb.residual_ok and fb.x_independent
    assert fb.scalar_value() is None
    assert exact_div(fb.num, fb.den) == LambdaPoly(
        2, {(0, 0): QMatrix([[zero, zero], [frac, qp(-2)]])})
    fb = factor_B(psi_adj, (1, 0), 1)
    assert fb.residual_ok and fb.x_independent
    assert exact_div(fb.num, fb.den) == LambdaPoly(
        2, {(0, 0): QMatrix([[qp(-2), frac], [zero, zero]])})


def test_factor_adjoint_highest_wall_depends_on_lambda(psi_adj):
    # on the highest-root wall the factor stays x-independent but genuinely
    # varies along the wall, so no constant matrix can represent it
    fb = factor_B(psi_adj, (1, 1), 1)
    assert fb.residual_ok and fb.x_independent
    assert fb.scalar_value() is None
    with pytest.raises(InexactDivision):
        exact_div(fb.num, fb.den)


# ---------------------------------------------------------------------------
# caching


def test_cache_round_trip(tmp_path, m1, psi1):
    first = psi_series(m1, depth=8, cache_dir=str(tmp_path), method="exact")
    files = list(tmp_path.glob("psi-*.json"))
    assert len(files) == 1
    again = psi_series(m1, depth=8, cache_dir=str(tmp_path))
    assert set(again.terms) == set(first.terms)
    assert all(again.terms[k] == first.terms[k] for k in first.terms)
    assert all(again.terms[k] == psi1.terms[k] for k in psi1.terms)


def test_cache_env_variable(tmp_path, monkeypatch, m1):
    monkeypatch.setenv("QMAC_CACHE_DIR", str(tmp_path))
    psi_series(m1, depth=3, method="interp")
    assert list(tmp_path.glob("psi-*.json"))


def test_cached_series_feeds_factor(tmp_path, m1):
    psi_series(m1, depth=8, cache_dir=str(tmp_path), method="exact")
    loaded = psi_series(m1, depth=8, cache_dir=str(tmp_path))
    fb = factor_B(loaded, (1,), 1)
    assert fb.scalar_value() == qp(-2)


# ---------------------------------------------------------------------------
# serialization


def test_json_shape(psi1):
    obj = psi1.json_obj()
    assert set(obj) == {"root_system", "theta", "depth", "terms"}
    assert obj["root_system"] == "A1"
    assert obj["depth"] == 8
    assert obj["terms"][0]["mu"] == [0]
    assert len(obj["terms"]) == 9
