import numpy as np
import pytest

from eigenlasso.models import (
    OperatorFamily,
    SymmetricOperator,
    make_circle_dirac,
    make_fullturn_loop,
    make_halfturn_loop,
    make_odd_multiplicity_base,
    make_spin_loop,
)
from oracle_reference import CIRCLE_HALF_SPECTRUM, CIRCLE_ZERO_SPECTRUM, halfturn_sample


def test_symmetric_operator_rejects_asymmetry():
    with pytest.raises(ValueError):
        SymmetricOperator(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        SymmetricOperator(np.ones((2, 3)))


def test_symmetric_operator_accepts_hermitian():
    op = SymmetricOperator(np.array([[1.0, 1j], [-1j, 2.0]]))
    assert not op.is_real
    assert op.dim == 2


def test_family_domain_validation():
    with pytest.raises(ValueError):
        OperatorFamily(domain="square", sampler=lambda t: np.eye(2))


def test_circle_family_wraps_exactly():
    fam = OperatorFamily(domain="circle",
                         sampler=lambda t: np.diag([np.sin(2 * np.pi * t), 2.0]))
    np.testing.assert_array_equal(fam(1.0), fam(0.0))
    np.testing.assert_array_equal(fam(1.25), fam(0.25))


def test_circle_spectra_match_literals():
    half = make_circle_dirac(3, 0.5)
    zero = make_circle_dirac(3, 0.0)
    np.testing.assert_allclose(np.sort(half.analytic_spectrum()), CIRCLE_HALF_SPECTRUM)
    np.testing.assert_allclose(np.sort(zero.analytic_spectrum()), CIRCLE_ZERO_SPECTRUM)
    np.testing.assert_allclose(np.sort(half.numerical_spectrum()),
                               CIRCLE_HALF_SPECTRUM, atol=1e-12)
    np.testing.assert_allclose(np.sort(zero.numerical_spectrum()),
                               CIRCLE_ZERO_SPECTRUM, atol=1e-12)


@pytest.mark.parametrize("delta", [0.0, 0.5])
def test_circle_numerics_track_analytics_at_depth(delta):
    model = make_circle_dirac(64, delta)
    ana = np.sort(model.analytic_spectrum())
    num = np.sort(model.numerical_spectrum())
    assert ana.shape == num.shape
    assert np.abs(ana - num).max() <= 1e-10


def test_circle_spectrum_symmetric_and_zero_mode():
    zero = np.sort(make_circle_dirac(5, 0.0).analytic_spectrum())
    np.testing.assert_allclose(zero, -zero[::-1])
    assert 0.0 in zero
    half = np.sort(make_circle_dirac(5, 0.5).analytic_spectrum())
    np.testing.assert_allclose(half, -half[::-1])
    assert np.abs(half).min() == 0.5


def test_circle_operator_is_hermitian():
    op = make_circle_dirac(4, 0.0).operator()
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(op.matrix)),
                               np.sort(make_circle_dirac(4, 0.0).analytic_spectrum()),
                               atol=1e-12)


def test_circle_rejects_bad_delta():
    with pytest.raises(ValueError):
        make_circle_dirac(3, 0.25)
    with pytest.raises(ValueError):
        make_circle_dirac(0, 0.0)


def test_halfturn_matches_direct_products():
    d0 = np.diag([1.0, 2.0])
    loop = make_halfturn_loop(d0)
    for t in (0.0, 0.25, 0.5, 0.8):
        np.testing.assert_allclose(loop.operator_at(t), halfturn_sample(d0, t), atol=1e-14)
    np.testing.assert_allclose(loop.operator_at(0.25),
                               [[1.5, -0.5], [-0.5, 1.5]], atol=1e-14)


def test_halfturn_is_odd_and_closed():
    loop = make_halfturn_loop(np.diag([1.0, 2.0]))
    assert loop.parity == "odd"
    assert loop.sigma == -1
    fam = loop.family()
    np.testing.assert_array_equal(fam(1.0), fam(0.0))
    np.testing.assert_allclose(fam(0.0), np.diag([1.0, 2.0]), atol=1e-15)


def test_halfturn_rejects_odd_dimension():
    with pytest.raises(ValueError):
        make_halfturn_loop(np.diag([1.0, 2.0, 3.0]))


def test_fullturn_is_even():
    loop = make_fullturn_loop(np.diag([1.0, 2.0, 3.0, 4.0]))
    assert loop.parity == "even"
    assert loop.sigma == 1


@pytest.mark.parametrize("loop_maker", [make_halfturn_loop, make_fullturn_loop])
def test_loops_are_isospectral(loop_maker):
    d0 = np.diag([1.0, 2.0, 3.0, 4.0])
    loop = loop_maker(d0)
    for t in np.linspace(0, 1, 37):
        np.testing.assert_allclose(np.linalg.eigvalsh(loop.operator_at(t)),
                                   [1, 2, 3, 4], atol=1e-12)


def test_eigenvector_transport_law():
    d0 = np.diag([1.0, 2.0, 3.0, 4.0])
    loop = make_halfturn_loop(d0)
    v = np.eye(4)[:, 2]  # eigenvector of the simple eigenvalue 3
    for t in (0.2, 0.6):
        moved = loop.transport_vector(t, v)
        residual = np.linalg.norm(loop.operator_at(t) @ moved - 3.0 * moved)
        assert residual <= 1e-10


@pytest.mark.parametrize("m", [6, 7])
def test_spin_loop_parity_and_isospectrality(m):
    base = SymmetricOperator(np.diag(np.arange(1.0, 9.0)))
    loop = make_spin_loop(m, base, turns=1)
    assert loop.parity == "odd"
    even = make_spin_loop(m, base, turns=2)
    assert even.parity == "even"
    for t in np.linspace(0, 1, 17):
        np.testing.assert_allclose(np.linalg.eigvalsh(loop.operator_at(t)),
                                   np.arange(1.0, 9.0), atol=1e-11)


def test_spin_loop_guards():
    base = SymmetricOperator(np.diag(np.arange(1.0, 9.0)))
    with pytest.raises(ValueError):
        make_spin_loop(4, base)  # no real structure in this dimension
    with pytest.raises(ValueError):
        make_spin_loop(7, np.diag([1.0, 2.0]))  # wrong size for the real form
    with pytest.raises(ValueError):
        make_spin_loop(7, base, turns=3)


def test_odd_multiplicity_base_splits_cluster():
    op = make_odd_multiplicity_base([3.5] * 8, epsilon=0.1, seed=1)
    values = np.linalg.eigvalsh(op.matrix)
    assert values.min() >= 3.4 - 1e-12
    assert values.max() <= 3.6 + 1e-12
    assert np.diff(values).min() > 0


def test_odd_multiplicity_base_reproducible():
    a = make_odd_multiplicity_base([1.0, 1.0, 2.0], epsilon=0.05, seed=7)
    b = make_odd_multiplicity_base([1.0, 1.0, 2.0], epsilon=0.05, seed=7)
    np.testing.assert_array_equal(a.matrix, b.matrix)


def test_odd_multiplicity_base_zero_epsilon_and_guards():
    op = make_odd_multiplicity_base([2.0, 1.0], epsilon=0.0, seed=0)
    np.testing.assert_array_equal(op.matrix, np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        make_odd_multiplicity_base([1.0], epsilon=-0.1, seed=0)
    with pytest.raises(ValueError):
        make_odd_multiplicity_base([], epsilon=0.1, seed=0)


def test_rebased_family_shifts_the_start():
    loop = make_halfturn_loop(np.diag([1.0, 2.0])).family()
    shifted = loop.rebased(0.25)
    np.testing.assert_array_equal(shifted(0.0), loop(0.25))
    np.testing.assert_allclose(shifted(0.9), loop(0.15), atol=1e-14)
