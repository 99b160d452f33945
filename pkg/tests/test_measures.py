import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fractal_riesz.kernels import kernel_comparison_constant
from fractal_riesz.measures import (
    Diagonal,
    DiscreteMeasure,
    SampledField,
    bessel_potential,
    fourier_transform,
    maximal_function,
    mutual_energy,
    occupation_measure,
    riesz_potential,
    self_energy,
    sup_potential,
)


def _line(m, n=2):
    return SampledField.from_function(lambda t: np.c_[t[:, 0], np.zeros((len(t), n - 1))], 1, n, m)


def test_constant_field_occupation():
    mu = occupation_measure(SampledField(np.zeros((7, 2))))
    assert np.all(mu.atoms == 0.0)
    assert mu.mass == pytest.approx(1.0, abs=1e-12)


def test_identity_occupation_three_points():
    mu = occupation_measure(SampledField.from_function(lambda t: t, 1, 1, 3))
    np.testing.assert_array_equal(mu.atoms[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(mu.weights, 1 / 3)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(1, 2), n=st.integers(1, 3), m=st.integers(2, 20), seed=st.integers(0, 1000))
def test_occupation_is_probability(k, n, m, seed):
    vals = np.random.default_rng(seed).standard_normal((m,) * k + (n,))
    mu = occupation_measure(SampledField(vals))
    assert mu.mass == pytest.approx(1.0, abs=1e-12)
    assert np.all(mu.weights >= 0)


def test_measure_rejects_negative_weights():
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((2, 1)), [0.5, -0.1])


def test_potential_of_dirac():
    assert riesz_potential(DiscreteMeasure.dirac([0.0, 0.0]), [2.0, 0.0], 1.0) == pytest.approx(0.5)


def test_segment_potential():
    mu = occupation_measure(_line(10**4))
    assert riesz_potential(mu, [0.5, 0.0], 1.5) == pytest.approx(2 * math.sqrt(2), rel=0.01)


def test_potential_at_atom_is_infinite():
    mu = DiscreteMeasure([[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5])
    assert riesz_potential(mu, [1.0, 0.0], 1.0) == math.inf


def test_bessel_potential_dirac_one_dimension():
    assert bessel_potential(DiscreteMeasure.dirac([0.0]), [1.0], 2.0) == pytest.approx(math.exp(-1) / 2)


def test_bessel_dominated_by_riesz_on_random_configurations():
    rng = np.random.default_rng(0)
    R = 4.0
    c = kernel_comparison_constant(1.5, 2, R, np.linspace(1e-3, R, 4000, endpoint=False))
    for _ in range(20):
        mu = DiscreteMeasure(rng.uniform(-1, 1, (10, 2)), rng.random(10))
        x = rng.uniform(-1, 1, (5, 2))
        # every atom lies within distance R of x
        assert np.all(riesz_potential(mu, x, 1.5) <= c * bessel_potential(mu, x, 1.5) * (1 + 1e-9))


def test_symmetric_atoms_double_the_single_potential():
    x = np.array([0.3, -0.2])
    single = riesz_potential(DiscreteMeasure.dirac(x + [1, 0]), x, 0.7)
    pair = riesz_potential(DiscreteMeasure([x + [1, 0], x - [1, 0]], [1, 1]), x, 0.7)
    assert pair == pytest.approx(2 * single, rel=1e-14)


def test_mutual_energy_of_unit_distance_diracs():
    for alpha in (0.3, 1.0, 1.7):
        assert mutual_energy(DiscreteMeasure.dirac([0, 0]), DiscreteMeasure.dirac([1, 0]), alpha) == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.floats(0.1, 1.9))
def test_mutual_energy_symmetric(seed, alpha):
    rng = np.random.default_rng(seed)
    mu = DiscreteMeasure(rng.standard_normal((6, 2)), rng.random(6))
    nu = DiscreteMeasure(rng.standard_normal((4, 2)), rng.random(4))
    assert mutual_energy(mu, nu, alpha) == mutual_energy(nu, mu, alpha)


def test_point_mass_energy_diverges_under_refinement():
    # (t, 0) against a point mass at the origin: sum_i m^-1 ((i + 1/2)/m)^(alpha - 2) ~ m^(1 - alpha)
    alpha = 0.5
    energies = []
    for m in (256, 1024, 4096):
        t = (np.arange(m) + 0.5) / m
        mu = DiscreteMeasure(np.c_[t, np.zeros(m)], np.full(m, 1 / m))
        energies.append(mutual_energy(mu, DiscreteMeasure.dirac([0, 0]), alpha))
    assert energies[0] < energies[1] < energies[2]
    assert energies[2] / energies[1] == pytest.approx(4 ** (1 - alpha), rel=0.02)


def test_line_self_energy_close_to_closed_form():
    mu = occupation_measure(_line(2048))
    target = 8 / 3
    assert self_energy(mu, 1.5, Diagonal.CELL_MIDPOINT) == pytest.approx(target, rel=0.02)
    # the exclude rule misses the near-diagonal mass, about 2 zeta(1/2) m^(-1/2)
    assert self_energy(mu, 1.5, Diagonal.EXCLUDE) == pytest.approx(target, rel=0.03)


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(0.1, 20.0), seed=st.integers(0, 1000))
def test_self_energy_homogeneity(lam, seed):
    vals = np.random.default_rng(seed).standard_normal((40, 2))
    field_ = SampledField(vals)
    base = self_energy(occupation_measure(field_), 1.2)
    scaled = self_energy(occupation_measure(field_.scaled(lam)), 1.2)
    assert scaled == pytest.approx(lam ** (1.2 - 2) * base, rel=1e-10)


def test_single_atom_self_energy_excluded():
    assert self_energy(DiscreteMeasure.dirac([1.0, 2.0]), 1.0) == 0.0


def test_fourier_transform_basics():
    assert fourier_transform(DiscreteMeasure.dirac([0.0, 0.0]), [3.0, -1.0]) == pytest.approx(1.0)
    mu = occupation_measure(SampledField(np.random.default_rng(1).standard_normal((30, 2))))
    assert fourier_transform(mu, [0.0, 0.0]) == pytest.approx(1.0)


def test_fourier_transform_uniform_interval():
    mu = occupation_measure(SampledField.from_function(lambda t: t, 1, 1, 4096))
    assert abs(fourier_transform(mu, [math.pi])) == pytest.approx(2 / math.pi, rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(arrays(float, (5, 2), elements=st.floats(-10, 10)))
def test_fourier_transform_bounded_by_mass(xi):
    mu = DiscreteMeasure(np.random.default_rng(2).standard_normal((8, 2)), np.full(8, 0.25))
    assert np.all(np.abs(fourier_transform(mu, xi)) <= mu.mass + 1e-12)


def test_sup_potential():
    mu = DiscreteMeasure([[0, 0], [2, 0]], [1, 1])
    x = np.array([0.5, 0.0])
    assert sup_potential(mu, [x], 1.0) == pytest.approx(riesz_potential(mu, x, 1.0))
    assert sup_potential(mu, [x, [2, 0]], 1.0) == math.inf
    small = sup_potential(mu, [x], 1.0)
    assert sup_potential(mu, [x, [1.0, 0.3]], 1.0) >= small


def test_maximal_function_single_atom():
    # sup over r in (d, R) of r^(gamma - n) is d^(gamma - n)
    d, R = 0.3, 1.0
    val = maximal_function(DiscreteMeasure.dirac([0.0, 0.0]), [d, 0.0], 0.5, R)
    assert val == pytest.approx(d ** (0.5 - 2))


def test_maximal_function_no_atoms_nearby():
    assert maximal_function(DiscreteMeasure.dirac([5.0, 0.0]), [0.0, 0.0], 0.5, 1.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), s=st.floats(0.05, 0.95), R=st.floats(0.01, 5.0))
def test_maximal_function_dominated_by_potential(seed, s, R):
    rng = np.random.default_rng(seed)
    nu = DiscreteMeasure(rng.uniform(-1, 1, (12, 2)), rng.random(12))
    x = rng.uniform(-1.5, 1.5, 2)
    assert maximal_function(nu, x, 1 - s, R) <= riesz_potential(nu, x, 1 - s) * (1 + 1e-12)


def test_measure_csv_roundtrip(tmp_path):
    mu = DiscreteMeasure(np.random.default_rng(3).standard_normal((5, 3)), np.arange(1, 6) / 15)
    mu.to_csv(tmp_path / "mu.csv")
    back = DiscreteMeasure.from_csv(tmp_path / "mu.csv")
    np.testing.assert_array_equal(back.atoms, mu.atoms)
    np.testing.assert_array_equal(back.weights, mu.weights)


def test_field_csv_roundtrip(tmp_path):
    f = SampledField(np.random.default_rng(4).standard_normal((6, 6, 2)), {"H": 0.4})
    f.to_csv(tmp_path / "f.csv")
    back = SampledField.from_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(back.values, f.values)
    assert back.meta["H"] == 0.4
