import os
import shutil
import tempfile
import unittest
from unittest import mock

import numpy as np
import pandas as pd
from scipy.special import comb

from magsense.cog import vy_regimes
from magsense.sme import SensorParams
from magsense.spin import build_collective_operators
from magsense.spin import clebsch_gordan
from magsense.spin import css_x
from magsense.spin import DickeState
from magsense.spin import moments
from magsense.spin import project_wigner
from magsense.spin import rotate_state
from magsense.spin import squeezing_db
from magsense.spin import squeezing_regimes
from magsense.spin import squeezing_wineland
from magsense.spin import wigner_coefficients
from magsense.spin import wigner_grid
from magsense.spin import wigner_sphere
from magsense.spin import _ylm_column
from magsense.spin import write_wigner_csv


class CollectiveOperatorTest(unittest.TestCase):
    def test_commutator(self):
        ops = build_collective_operators(6)
        comm = ops.Jx @ ops.Jy - ops.Jy @ ops.Jx
        np.testing.assert_allclose(comm, 1j * ops.Jz, atol=1e-12)

    def test_basis_ordering(self):
        ops = build_collective_operators(4)
        np.testing.assert_allclose(np.real(np.diag(ops.Jz)),
                                   [2., 1., 0., -1., -2.])

    def test_casimir(self):
        N = 5
        ops = build_collective_operators(N)
        j = N / 2.
        casimir = ops.Jx @ ops.Jx + ops.Jy @ ops.Jy + ops.Jz @ ops.Jz
        np.testing.assert_allclose(casimir, j * (j + 1) * np.eye(N + 1),
                                   atol=1e-10)

    def test_invalid_N(self):
        self.assertRaises(ValueError, build_collective_operators, 0)


class StateTest(unittest.TestCase):
    def test_css_moments(self):
        N = 20
        m = moments(css_x(N), build_collective_operators(N))
        np.testing.assert_allclose(m.mean, [N / 2., 0., 0.], atol=1e-10)
        np.testing.assert_allclose(np.diag(m.cov), [0., N / 4., N / 4.],
                                   atol=1e-10)

    def test_css_is_unsqueezed(self):
        N = 30
        m = moments(css_x(N), build_collective_operators(N))
        self.assertAlmostEqual(squeezing_wineland(m.cov[1, 1], m.mean[0], N),
                               1., delta=1e-10)

    def test_css_is_pure(self):
        self.assertAlmostEqual(css_x(8).purity, 1., delta=1e-12)

    def test_rotation_about_z(self):
        N = 10
        ops = build_collective_operators(N)
        state = rotate_state(css_x(N), ops, 'z', np.pi / 2.)
        np.testing.assert_allclose(moments(state, ops).mean, [0., N / 2., 0.],
                                   atol=1e-10)

    def test_bad_shape(self):
        self.assertRaises(ValueError, DickeState, 3, np.eye(3) / 3.)

    def test_operator_mismatch(self):
        self.assertRaises(ValueError, moments, css_x(3),
                          build_collective_operators(4))


class SqueezingTest(unittest.TestCase):
    def test_db(self):
        self.assertAlmostEqual(squeezing_db(0.1), 10., delta=1e-12)
        self.assertAlmostEqual(squeezing_db(1.), 0., delta=1e-12)

    def test_zero_mean(self):
        self.assertRaises(ValueError, squeezing_wineland, 1., 0., 10)

    def test_regimes_follow_variance_regimes(self):
        p = SensorParams(100, 0.1, 1., 0.005)
        t = 0.3
        short, long, t_star = squeezing_regimes(t, p)
        v_short, v_long, v_star = vy_regimes(t, p)
        jx = p.J * np.exp(-(p.M + p.kappa_coll) * t / 2.)
        self.assertEqual(t_star, v_star)
        self.assertAlmostEqual(short, p.N * v_short / jx ** 2, delta=1e-12)
        self.assertAlmostEqual(long, p.N * v_long / jx ** 2, delta=1e-12)
        self.assertAlmostEqual(squeezing_regimes(0., p)[0], 1., delta=1e-14)


class ClebschGordanTest(unittest.TestCase):
    def test_known_values(self):
        self.assertAlmostEqual(clebsch_gordan(0.5, 0.5, 0.5, -0.5, 1, 0),
                               1. / np.sqrt(2.), delta=1e-14)
        self.assertAlmostEqual(clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0, 0),
                               1. / np.sqrt(2.), delta=1e-14)
        self.assertAlmostEqual(clebsch_gordan(0.5, -0.5, 0.5, 0.5, 0, 0),
                               -1. / np.sqrt(2.), delta=1e-14)
        self.assertAlmostEqual(clebsch_gordan(1, 1, 1, -1, 0, 0),
                               1. / np.sqrt(3.), delta=1e-14)

    def test_stretched_coupling(self):
        j = 30
        for m1, m2 in ((3, -7), (30, -30), (-12, -15), (0, 0)):
            M = m1 + m2
            expected = np.sqrt(comb(2 * j, j + m1) * comb(2 * j, j + m2)
                               / comb(4 * j, 2 * j + M))
            self.assertAlmostEqual(clebsch_gordan(j, m1, j, m2, 2 * j, M),
                                   expected, delta=1e-10)

    def test_orthonormal_columns(self):
        for j1, j2, q in ((5, 5, 1), (2, 1, 0), (2.5, 1.5, -1)):
            ks = np.arange(abs(q), j1 + j2 + 1)
            ks = ks[ks >= abs(j1 - j2)]
            m1s = [m for m in np.arange(-j1, j1 + 1) if abs(q - m) <= j2]
            C = np.array([[clebsch_gordan(j1, m1, j2, q - m1, k, q)
                           for m1 in m1s] for k in ks])
            self.assertEqual(C.shape[0], C.shape[1])
            np.testing.assert_allclose(C @ C.T, np.eye(len(ks)), atol=1e-12)

    def test_selection_rules(self):
        self.assertEqual(clebsch_gordan(1, 1, 1, 0, 2, 0), 0.)
        self.assertEqual(clebsch_gordan(1, 1, 1, 1, 1, 2), 0.)

    def test_invalid_projection(self):
        self.assertRaises(ValueError, clebsch_gordan, 1, 2, 1, 0, 2, 2)


class LargeStateTest(unittest.TestCase):
    def setUp(self):
        self.N = 100
        self.state = css_x(self.N)

    def test_multipoles_of_pure_state(self):
        coeffs = wigner_coefficients(self.state)
        total = sum(abs(v) ** 2 for v in coeffs.values())
        self.assertAlmostEqual(total, 1., delta=1e-9)
        self.assertAlmostEqual(coeffs[(0, 0)].real,
                               1. / np.sqrt(self.N + 1), delta=1e-12)

    def test_wigner_normalization_and_peak(self):
        grid = wigner_grid(self.N + 1, 2 * self.N + 1)
        field = wigner_sphere(self.state, grid)
        self.assertAlmostEqual(np.sum(field.weights * field.values), 1.,
                               delta=1e-8)
        i, k = np.unravel_index(np.argmax(field.values), field.values.shape)
        self.assertAlmostEqual(field.theta[i], np.pi / 2., delta=1e-6)
        self.assertAlmostEqual(field.phi[k], 0., delta=1e-12)


def _library_ylm(k, q, theta):
    try:
        from scipy.special import sph_harm_y
        return np.real(sph_harm_y(k, q, theta, 0.))
    except ImportError:
        from scipy.special import sph_harm
        return np.real(sph_harm(q, k, 0., theta))


class HarmonicRecurrenceTest(unittest.TestCase):
    def test_recurrence_matches_library(self):
        theta = np.linspace(0.05, np.pi - 0.05, 17)
        kmax = 10
        with mock.patch('magsense.spin.sph_harm_y', None):
            for q in (-7, -2, -1, 0, 1, 4, 10):
                column = _ylm_column(q, kmax, theta)
                expected = np.array([_library_ylm(k, q, theta)
                                     for k in range(abs(q), kmax + 1)])
                np.testing.assert_allclose(column, expected, atol=1e-12,
                                           err_msg='q={}'.format(q))


class WignerTest(unittest.TestCase):
    def setUp(self):
        self.N = 4
        self.state = css_x(self.N)
        self.grid = wigner_grid(self.N + 1, 2 * self.N + 1)
        self.folder = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.folder)

    def test_normalization(self):
        field = wigner_sphere(self.state, self.grid)
        self.assertAlmostEqual(np.sum(field.weights * field.values), 1.,
                               delta=1e-10)
        self.assertLess(field.imag_residual, 1e-10)

    def test_css_peaks_along_x(self):
        grid = wigner_grid(21, 40)
        field = wigner_sphere(self.state, grid)
        i, k = np.unravel_index(np.argmax(field.values), field.values.shape)
        self.assertAlmostEqual(field.theta[i], np.pi / 2., delta=0.1)
        self.assertAlmostEqual(field.phi[k], 0., delta=1e-12)

    def test_projection_recovers_coefficients(self):
        ops = build_collective_operators(self.N)
        state = rotate_state(self.state, ops, 'y', 0.4)
        field = wigner_sphere(state, self.grid)
        coeffs = wigner_coefficients(state)
        for key in [(0, 0), (1, 0), (1, 1), (2, -1), (4, 3)]:
            recovered = project_wigner(field, self.N, *key)
            self.assertAlmostEqual(abs(recovered - coeffs[key]), 0.,
                                   delta=1e-10)

    def test_projection_invalid_degree(self):
        field = wigner_sphere(self.state, self.grid)
        self.assertRaises(ValueError, project_wigner, field, self.N, 2, 3)
        self.assertRaises(ValueError, project_wigner, field, self.N,
                          self.N + 1, 0)

    def test_empty_grid(self):
        self.assertRaises(ValueError, wigner_grid, 0, 4)

    def test_csv(self):
        field = wigner_sphere(self.state, self.grid)
        path = os.path.join(self.folder, 'wigner.csv')
        write_wigner_csv(field, path)
        frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), ['theta', 'phi', 'value'])
        self.assertEqual(len(frame), (self.N + 1) * (2 * self.N + 1))


if __name__ == '__main__':
    unittest.main()
