import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poslab.pathsim import (
    PathGrid,
    cumulative_trapezoid,
    default_horizon,
    dufresne_generator_residual,
    entries,
    exponential_functional,
    grid_steps,
    inversion_residual,
    n_matrix,
    path_transform_backward,
    path_transform_elementary,
    path_transform_word,
    relative_tail,
    sample_brownian_path,
    write_csv,
)
from poslab.rootsys import build_root_system, drift_from_chamber_coords
from poslab.sampler import RngStream

A1 = build_root_system("A1")
A2 = build_root_system("A2")
ALPHA1 = np.array([1.0, -1.0, 0.0])


def linear_path(v, T, dt):
    t = np.arange(grid_steps(T, dt) + 1) * dt
    return PathGrid(dt, t[:, None] * np.asarray(v, dtype=float))


class TestBrownian:
    def test_variance_and_mean_1d(self):
        p = sample_brownian_path(RngStream(1), A1, np.zeros(1), np.zeros(1), 4.0, 0.01, 10_000)
        xt = p.samples[:, -1, 0]
        assert xt.var() == pytest.approx(4.0, rel=0.05)
        assert abs(xt.mean()) < 3 * 2 / 100

    def test_drift(self):
        d = drift_from_chamber_coords(A1, (0.5,))
        p = sample_brownian_path(RngStream(2), A1, d, np.array([1.0]), 2.0, 0.01, 10_000)
        xt = p.samples[:, -1, 0]
        assert abs(xt.mean() - (1.0 + 0.5 * 2.0)) < 3 * math.sqrt(2.0 / 10_000)

    def test_a2_hyperplane(self):
        d = drift_from_chamber_coords(A2, (1, 2))
        p = sample_brownian_path(RngStream(3), A2, d, np.zeros(3), 20.0, 1e-3, 5)
        assert np.abs(p.samples.sum(axis=-1)).max() < 1e-12
        assert p.samples.shape == (5, 20_001, 3)
        assert p.horizon == pytest.approx(20.0)

    def test_a2_isotropic_in_plane(self):
        p = sample_brownian_path(RngStream(4), A2, np.zeros(3), np.zeros(3), 1.0, 0.1, 20_000)
        # alpha(X_1) has variance |alpha|^2 = 2 for every root
        for a in ([1, -1, 0], [0, 1, -1], [1, 0, -1]):
            assert (p.samples[:, -1, :] @ np.array(a, float)).var() == pytest.approx(2.0, rel=0.05)

    def test_grid_must_divide(self):
        with pytest.raises(ValueError):
            grid_steps(1.0, 0.3)
        with pytest.raises(ValueError):
            grid_steps(-1.0, 0.1)

    def test_subsample(self):
        p = sample_brownian_path(RngStream(5), A1, np.zeros(1), np.zeros(1), 1.0, 0.01)
        q = p.subsample(10)
        assert q.n_steps == 10 and q.dt == pytest.approx(0.1)
        assert (q.samples[-1] == p.samples[-1]).all()


class TestFunctionals:
    def test_zero_path(self):
        p = PathGrid(0.01, np.zeros((201, 3)))
        acc = exponential_functional(p, ALPHA1)
        np.testing.assert_allclose(acc.values, p.times, atol=1e-12)
        assert acc.values[0] == 0

    def test_linear_path_second_order(self):
        errs = []
        for dt in (0.02, 0.01, 0.005):
            acc = exponential_functional(linear_path([1.0], 5.0, dt), [1.0])
            errs.append(abs(acc.terminal - (1 - math.exp(-5.0))))
        assert 3.5 <= errs[0] / errs[1] <= 4.5
        assert 3.5 <= errs[1] / errs[2] <= 4.5

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-3, 3), min_size=11, max_size=11))
    def test_nondecreasing(self, xs):
        p = PathGrid(0.1, np.array(xs)[:, None])
        v = exponential_functional(p, [2.0], 2.0).values
        assert v[0] == 0 and np.all(np.diff(v) >= 0)

    def test_cumulative_trapezoid_matches_scipy(self):
        from scipy.integrate import cumulative_trapezoid as ref

        f = np.random.default_rng(0).uniform(size=(3, 50))
        np.testing.assert_allclose(cumulative_trapezoid(f, 0.1), ref(f, dx=0.1, axis=-1, initial=0))


class TestNMatrix:
    def test_zero_path(self):
        nm = n_matrix(PathGrid(1e-3, np.zeros((2001, 3))), A2)
        np.testing.assert_allclose(entries(nm), [2.0, 2.0, 2.0], atol=1e-9)

    def test_sl2_consistent_with_functional(self):
        p = sample_brownian_path(RngStream(6), A1, np.array([1.0]), np.zeros(1), 2.0, 0.01, 3)
        acc = exponential_functional(p, [2.0], 2.0)
        np.testing.assert_allclose(n_matrix(p, A1)[:, 1, 0], acc.terminal)

    def test_deterministic_linear(self):
        T = 5.0
        errs = []
        for dt in (0.01, 0.005):
            nm = n_matrix(linear_path([1, 0, -1], T, dt), A2)
            errs.append(abs(nm[1, 0] - (1 - math.exp(-T))))
            # alpha_2(mu) = 1 too, and the corner is int e^{-s} (1 - e^{-s}) ds
            corner = (1 - math.exp(-T)) - (1 - math.exp(-2 * T)) / 2
            assert nm[2, 0] == pytest.approx(corner, abs=10 * dt**2)
        assert 3.5 <= errs[0] / errs[1] <= 4.5

    def test_unsupported(self):
        with pytest.raises(ValueError):
            n_matrix(PathGrid(0.1, np.zeros((3, 2))), build_root_system("B2"))

    def test_relative_tail_small_for_long_horizon(self):
        d = drift_from_chamber_coords(A2, (1, 1))
        p = sample_brownian_path(RngStream(7), A2, d, np.zeros(3), default_horizon(A2, d), 1e-2, 200)
        assert np.median(relative_tail(p, A2, d)) < 1e-4

    def test_default_horizon(self):
        assert default_horizon(A2, drift_from_chamber_coords(A2, (1, 1))) == 20.0
        assert default_horizon(A2, drift_from_chamber_coords(A2, (0.3, 1))) == 40.0


class TestTransforms:
    def test_zero_path_a1(self):
        p = PathGrid(0.01, np.zeros((101, 1)))
        out = path_transform_elementary(p, A1, 1, 0.7)
        np.testing.assert_allclose(out.samples[:, 0], np.log1p(0.7 * p.times), atol=1e-12)

    def test_small_xi_near_identity(self):
        p = sample_brownian_path(RngStream(8), A2, np.zeros(3), np.zeros(3), 1.0, 0.01)
        xi = 1e-6
        out = path_transform_elementary(p, A2, 1, xi)
        integral = exponential_functional(p, ALPHA1).terminal
        coroot_norm = math.sqrt(2)
        assert np.abs(out.samples - p.samples).max() <= xi * integral * coroot_norm + 1e-15

    def test_single_letter_word(self):
        p = sample_brownian_path(RngStream(9), A2, np.zeros(3), np.zeros(3), 1.0, 0.01, 2)
        a = path_transform_word(p, A2, (2,), [np.array([0.4, 0.9])])
        b = path_transform_elementary(p, A2, 2, np.array([0.4, 0.9]))
        assert (a.samples == b.samples).all()

    def test_word_applies_rightmost_first(self):
        p = sample_brownian_path(RngStream(10), A2, np.zeros(3), np.zeros(3), 1.0, 0.01)
        out = path_transform_word(p, A2, (1, 2), [0.3, 0.8])
        manual = path_transform_elementary(path_transform_elementary(p, A2, 2, 0.8), A2, 1, 0.3)
        assert (out.samples == manual.samples).all()

    def test_weights_for_long_roots(self):
        b2 = build_root_system("B2")
        p = PathGrid(0.01, np.zeros((11, 2)))
        out = path_transform_word(p, b2, (2,), [1.0])
        manual = path_transform_elementary(p, b2, 2, 0.5)  # |alpha_2|^2 / 2 = 1/2
        assert (out.samples == manual.samples).all()

    def test_nonpositive_xi(self):
        with pytest.raises(ValueError):
            path_transform_elementary(PathGrid(0.1, np.zeros((3, 3))), A2, 1, 0.0)

    def test_backward_condition(self):
        p = PathGrid(0.1, np.zeros((101, 3)))
        with pytest.raises(ValueError):
            path_transform_backward(p, A2, 1, 5.0)  # the integral reaches 10 > n


class TestInversion:
    @pytest.mark.parametrize("dt", [1e-2, 1e-3])
    def test_residual_small(self, dt):
        d = drift_from_chamber_coords(A2, (1, 1))
        y = sample_brownian_path(RngStream(11), A2, d, np.zeros(3), 5.0, dt, 10)
        n = 3.0
        x = path_transform_elementary(y, A2, 1, 1 / n)
        assert inversion_residual(x, y, ALPHA1, n) <= 10 * dt
        back = path_transform_backward(x, A2, 1, n)
        assert np.abs(back.samples - y.samples).max() <= 10 * dt

    def test_residual_halves(self):
        d = drift_from_chamber_coords(A2, (1, 1))
        fine = sample_brownian_path(RngStream(12), A2, d, np.zeros(3), 5.0, 5e-4, 10)
        res = []
        for k in (4, 2):
            y = fine.subsample(k)
            x = path_transform_elementary(y, A2, 1, 1 / 3.0)
            res.append(inversion_residual(x, y, ALPHA1, 3.0))
        assert res[1] <= 0.5 * res[0]

    def test_detects_unpaired(self):
        z = PathGrid(0.01, np.zeros((101, 3)))
        assert inversion_residual(z, z, ALPHA1, 2.0) == pytest.approx(0.25, rel=1e-9)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            inversion_residual(PathGrid(0.1, np.zeros((3, 3))), PathGrid(0.1, np.zeros((4, 3))), ALPHA1, 1.0)


class TestDufresneGenerator:
    @pytest.mark.parametrize("mu", [1.0, 3.7])
    def test_analytic(self, mu):
        assert dufresne_generator_residual(mu, np.arange(-10, 5, 0.01)) < 1e-12

    @pytest.mark.parametrize("mu", [1.0, 3.7])
    def test_finite_difference(self, mu):
        assert dufresne_generator_residual(mu, np.arange(-10, 5, 0.01), "fd", 1e-4) < 1e-6

    def test_density_normalized(self):
        from scipy.integrate import quad

        from poslab.pathsim import dufresne_density

        assert quad(lambda z: dufresne_density(1.5, z), -40, 6)[0] == pytest.approx(1.0, abs=1e-8)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            dufresne_generator_residual(0.0, [0.0])
        with pytest.raises(ValueError):
            dufresne_generator_residual(1.0, [6.0])
        with pytest.raises(ValueError):
            dufresne_generator_residual(1.0, [0.0], "spline")


def test_csv_header_and_rows():
    rows = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    text = write_csv(rows, ["n21", "n32", "n31"], extra={"seed": 7})
    lines = text.splitlines()
    assert lines[0] == "# columns: n21,n32,n31,seed"
    assert lines[1] == "1.0,2.0,3.0,7"
    buf = io.StringIO()
    write_csv(rows, ["n21", "n32", "n31"], buf)
    assert buf.getvalue().splitlines()[0] == "# columns: n21,n32,n31"
