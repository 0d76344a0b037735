import numpy as np
import pytest
import scipy.io
from hypothesis import given
from hypothesis import strategies as st

from torusquant.errors import AxisOutOfRange, DimensionMismatch, NotAffine, WindowMismatch
from torusquant.fourier import FourierPolynomial, TruncationWindow, WaveFunction
from torusquant.operators import (
    AffineObservable,
    AnnulusFunction,
    Representation,
    action_operator,
    apply_affine,
    commutator,
    dirac_defect,
    generator_set,
    half_form_term,
    multiplication_operator,
    poisson_bracket,
    prequantum_operator,
    quantize_affine,
    random_affine,
)

from .conftest import trapezoid_grid

psi = FourierPolynomial.basis
lambdas = st.floats(-2, 2, allow_nan=False).map(lambda v: round(v, 6))


def quadrature_matrix(f: AffineObservable, lam, w: TruncationWindow, points=256):
    """<psi_p| -i a d - (i/2) a' - lam a + b |psi_q> by the trapezoid rule (1-D)."""
    phi = trapezoid_grid(1, points)
    a, b = f.a[0], f.b
    da = a.derivative(0)
    n = w.indices()[:, 0]
    basis = np.exp(1j * np.outer(phi[:, 0], n))
    av, dav, bv = a.evaluate(phi), da.evaluate(phi), b.evaluate(phi)
    images = (av[:, None] * n[None, :] - 0.5j * dav[:, None] - lam * av[:, None] + bv[:, None]) * basis
    return basis.conj().T @ images / points


# action operators ---------------------------------------------------------------

def test_action_operator_eigenvalues():
    w = TruncationWindow(2, 3)
    op = action_operator(Representation((0.25, 0.0)), 0, w)
    assert op.matrix[w.position((2, 1)), w.position((2, 1))] == 1.75
    assert op.is_diagonal() and op.hermitian
    assert action_operator(Representation((0.0, 0.0)), 1, w).matrix[w.position((0, 0)), w.position((0, 0))] == 0


def test_half_shift_eigenvalue():
    w = TruncationWindow(1, 2)
    op = action_operator(Representation((0.0,), (True,)), 0, w)
    assert op.matrix[w.position((0,)), w.position((0,))] == 0.5


def test_axis_guard():
    with pytest.raises(AxisOutOfRange):
        action_operator(Representation((0.0,)), 1, TruncationWindow(1, 2))


def test_representation_dimension_guard():
    with pytest.raises(DimensionMismatch):
        action_operator(Representation((0.0, 0.0)), 0, TruncationWindow(1, 2))


# multiplication ---------------------------------------------------------------------

def test_multiplication_shifts_basis():
    w = TruncationWindow(2, 2)
    op = multiplication_operator(psi((1, 0)), w)
    out, _ = op.apply(psi((0, 0)))
    assert out.poly == psi((1, 0))


def test_multiplication_by_one_is_identity():
    w = TruncationWindow(2, 2)
    assert np.array_equal(multiplication_operator(FourierPolynomial.constant(2), w).matrix, np.eye(w.size))


def test_multiplication_leakage():
    w = TruncationWindow(1, 1)
    op = multiplication_operator(psi((1,)), w)
    out, _ = op.apply(psi((1,)))
    assert out.poly.is_zero()
    assert op.leakage == 1.0


def test_multiplication_dimension_guard():
    with pytest.raises(DimensionMismatch):
        multiplication_operator(psi((1, 0)), TruncationWindow(1, 2))


# polarized quantization -------------------------------------------------------------

def test_quantized_action_is_action_operator():
    w = TruncationWindow(2, 3)
    rep = Representation((0.3, -0.6))
    for k in range(2):
        q = quantize_affine(AffineObservable.action(k, 2), rep, w)
        assert np.array_equal(q.matrix, action_operator(rep, k, w).matrix)


def test_angle_function_is_multiplication():
    w = TruncationWindow(2, 3)
    b = psi((1, 2)) + psi((-1, -2))
    q = quantize_affine(AffineObservable.angle_function(b), Representation((0.4, 0.1)), w)
    assert np.array_equal(q.matrix, multiplication_operator(b, w).matrix)


@pytest.mark.parametrize("lam", [0.0, 0.37])
def test_cosine_coefficient_against_quadrature(lam):
    w = TruncationWindow(1, 5)
    a = psi((1,)) + psi((-1,))
    f = AffineObservable((a,), FourierPolynomial(1))
    q = quantize_affine(f, Representation((lam,)), w)
    inner = w.interior_mask(1)
    oracle = quadrature_matrix(f, lam, w)
    assert np.max(np.abs(q.matrix - oracle)[np.ix_(inner, inner)]) < 1e-10
    # tridiagonal with (q + m/2 - lam) on the off-diagonals
    j = w.position((2,))
    assert q.matrix[j + 1, j] == pytest.approx(2 + 0.5 - lam)
    assert q.matrix[j - 1, j] == pytest.approx(2 - 0.5 - lam)


@given(st.integers(0, 10_000), lambdas, lambdas)
def test_random_observable_against_quadrature(seed, lam, _):
    rng = np.random.default_rng(seed)
    w = TruncationWindow(1, 6)
    f = random_affine(rng, 1, 2, n_terms=3)
    q = quantize_affine(f, Representation((lam,)), w)
    inner = w.interior_mask(2)
    oracle = quadrature_matrix(f, lam, w, 64)
    assert np.max(np.abs(q.matrix - oracle)[np.ix_(inner, inner)]) < 1e-10


@given(st.integers(0, 10_000), lambdas, lambdas, st.booleans())
def test_real_observables_are_hermitian(seed, l1, l2, hs):
    rng = np.random.default_rng(seed)
    f = random_affine(rng, 2, 3)
    q = quantize_affine(f, Representation((l1, l2), (hs, False)), TruncationWindow(2, 5))
    assert q.hermitian
    assert q.hermitian_error() <= 1e-12


def test_apply_agrees_with_matrix_inside():
    rng = np.random.default_rng(3)
    w = TruncationWindow(2, 6)
    rep = Representation((0.2, 0.9))
    f = random_affine(rng, 2, 2)
    state = psi((1, -1), 0.6) + psi((0, 2), 0.8j)
    symbolic = apply_affine(f, rep, state)
    numeric, _ = quantize_affine(f, rep, w).apply(state)
    assert symbolic.poly.max_abs_diff(numeric.poly) < 1e-12


# brackets and commutators --------------------------------------------------------------

def test_bracket_examples():
    I1, I2 = AffineObservable.action(0, 2), AffineObservable.action(1, 2)
    zero = FourierPolynomial(2)
    n = (2, -3)
    b = AffineObservable.angle_function(psi(n))
    assert poisson_bracket(I1, b).b == psi(n, 2j)
    assert poisson_bracket(I1, I2).as_annulus().is_zero()
    a_obs = AffineObservable((psi((1, 0)), zero), zero)
    # {a I1, b} = a d_1 b = psi_(1,0) * i psi_(1,0)
    assert poisson_bracket(a_obs, AffineObservable.angle_function(psi((1, 0)))).b == psi((2, 0), 1j)


@given(st.integers(0, 10_000))
def test_bracket_against_finite_differences(seed):
    rng = np.random.default_rng(seed)
    f, g = random_affine(rng, 2, 2, 3), random_affine(rng, 2, 2, 3)
    h = 1e-5
    phi, act = rng.uniform(-3, 3, 2), rng.uniform(-2, 2, 2)

    def d(obs, which, k):
        e = np.zeros(2)
        e[k] = h
        if which == "I":
            return (obs.evaluate(phi, act + e) - obs.evaluate(phi, act - e)) / (2 * h)
        return (obs.evaluate(phi + e, act) - obs.evaluate(phi - e, act)) / (2 * h)

    fd = sum(d(f, "I", k) * d(g, "phi", k) - d(f, "phi", k) * d(g, "I", k) for k in range(2))
    assert abs(poisson_bracket(f, g).evaluate(phi, act) - fd) < 1e-6


def test_commutator_examples():
    w = TruncationWindow(2, 4)
    rep = Representation((0.1, 0.2))
    I1, I2 = action_operator(rep, 0, w), action_operator(rep, 1, w)
    assert not np.any(commutator(I1, I2).matrix)
    assert not np.any(commutator(I1, I1).matrix)
    n = (2, 1)
    M = multiplication_operator(psi(n), w)
    C = commutator(I1, M)
    assert np.max(np.abs(C.interior(2) - n[0] * M.interior(2))) == 0


def test_commutator_window_mismatch():
    rep = Representation((0.0,))
    with pytest.raises(WindowMismatch):
        commutator(action_operator(rep, 0, TruncationWindow(1, 2)), action_operator(rep, 0, TruncationWindow(1, 3)))


def test_dirac_on_generator_set():
    w = TruncationWindow(2, 6)
    rep = Representation((0.31, -0.72), (False, True))
    gens = generator_set(2)
    cache = {}
    worst = max(dirac_defect(f, g, rep, w, 3, cache) for i, f in enumerate(gens) for g in gens[i:])
    assert worst <= 1e-10


@given(st.integers(0, 10_000), lambdas, lambdas)
def test_dirac_condition_random(seed, l1, l2):
    rng = np.random.default_rng(seed)
    f, g = random_affine(rng, 2, 2), random_affine(rng, 2, 2)
    assert dirac_defect(f, g, Representation((l1, l2)), TruncationWindow(2, 6), 4) <= 1e-10


def test_dirac_fails_without_interior_restriction():
    # boundary truncation breaks the identity; the margin is what makes it exact
    rng = np.random.default_rng(11)
    f, g = random_affine(rng, 1, 2), random_affine(rng, 1, 2)
    assert dirac_defect(f, g, Representation((0.3,)), TruncationWindow(1, 5), 0) > 1e-3


# representations ---------------------------------------------------------------------------

def test_gauge_predicate():
    r = Representation((0.3, -0.2))
    assert r.gauge_equivalent(Representation((2.3, -3.2)))
    assert not r.gauge_equivalent(Representation((0.3, 0.3)))
    assert not r.gauge_equivalent(Representation((0.3, -0.2), (True, False)))


@given(lambdas, lambdas, st.integers(0, 1), st.integers(0, 10_000))
def test_metalinear_equivalence(l1, l2, j, seed):
    rng = np.random.default_rng(seed)
    hs = tuple(i == j for i in range(2))
    shifted = Representation((l1, l2), hs)
    plain = shifted.without_half_shift()
    assert plain.half_shift == (False, False)
    assert plain.lam[j] == (l1, l2)[j] - 0.5
    w = TruncationWindow(2, 4)
    f = random_affine(rng, 2, 2)
    diff = quantize_affine(f, shifted, w).matrix - quantize_affine(f, plain, w).matrix
    assert np.max(np.abs(diff)) <= 1e-12


# prequantization -----------------------------------------------------------------------------

def test_prequantum_action():
    rep = Representation((0.4,))
    out = prequantum_operator(AffineObservable.action(0, 1), rep)(psi((3,)))
    assert out == AnnulusFunction.angle_function(psi((3,), 3 - 0.4))


def test_prequantum_constant():
    rep = Representation((0.4, 0.1))
    rho = AnnulusFunction.action(0, 2) * (psi((1, 1)) + psi((0, -2), 2j))
    out = prequantum_operator(AffineObservable.angle_function(FourierPolynomial.constant(2, 2.5)), rep)(rho)
    assert out.max_abs_diff(rho * FourierPolynomial.constant(2, 2.5)) == 0


def test_prequantum_minus_polarized_is_half_form():
    rep = Representation((0.25,))
    f = AffineObservable((psi((1,)),), FourierPolynomial(1))
    for n in range(-3, 4):
        rho = psi((n,))
        pre = prequantum_operator(f, rep)(rho)
        pol = AnnulusFunction.angle_function(apply_affine(f, rep, rho).poly)
        expected = AnnulusFunction.angle_function(f.a[0].derivative(0).scale(0.5j) * rho)
        assert pre - pol == expected
        assert half_form_term(f) == f.a[0].derivative(0).scale(-0.5j)


def test_prequantum_rejects_non_affine():
    sq = AnnulusFunction.action(0, 1) * AnnulusFunction.action(0, 1)
    with pytest.raises(NotAffine):
        prequantum_operator(sq, Representation((0.0,)))


# export ----------------------------------------------------------------------------------

def test_matrix_market_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    op = quantize_affine(random_affine(rng, 2, 1), Representation((0.1, 0.7)), TruncationWindow(2, 2))
    path = tmp_path / "op.mtx"
    op.write_matrix_market(path)
    back = scipy.io.mmread(str(path)).toarray()
    assert np.array_equal(back, op.matrix)


def test_json_export_is_row_major():
    import json

    w = TruncationWindow(1, 1)
    op = multiplication_operator(psi((1,)), w)
    data = json.loads(op.to_json())
    assert data["re"][1][0] == 1.0 and data["re"][0][1] == 0.0
    assert data["basis"] == [[-1], [0], [1]]
    assert data["leakage"] == 1.0


def test_hermitian_flag_is_validated():
    from torusquant.operators import LinearOperator

    w = TruncationWindow(1, 1)
    with pytest.raises(ValueError):
        LinearOperator(w, np.triu(np.ones((3, 3))), hermitian=True)


def test_state_apply_rejects_other_basis():
    from torusquant.errors import RepresentationMismatch

    w = TruncationWindow(1, 2)
    op = action_operator(Representation((0.0,), (True,)), 0, w)
    with pytest.raises(RepresentationMismatch):
        op.apply(WaveFunction(psi((0,))))
