import unittest
from collections import namedtuple

import numpy as np

from magsense.cog import cog_measurement
from magsense.cog import cog_step
from magsense.cog import css_moments
from magsense.cog import LgModel
from magsense.cog import normalize
from magsense.filters import ekf_drift
from magsense.filters import ekf_init
from magsense.filters import ekf_jacobians_ou
from magsense.filters import ekf_step
from magsense.filters import EkfModel
from magsense.filters import FilterState
from magsense.filters import integrate_riccati
from magsense.filters import kb_correlated_step
from magsense.filters import kf_discrete_step
from magsense.filters import lg_filter_init
from magsense.filters import lg_filter_step
from magsense.filters import nees
from magsense.filters import nees_interval
from magsense.filters import NoiseSpec
from magsense.sme import SensorParams
from magsense.stochastic import initial_signal
from magsense.stochastic import OuParams
from magsense.stochastic import RngStream
from magsense.stochastic import VdpParams
from magsense.stochastic import wiener_increment
from magsense.util import NumericalError
from magsense.validation import check_jacobians
from magsense.validation import check_kalman_closed_form

_Discrete = namedtuple('_Discrete', ['A', 'B', 'G', 'H', 'Q', 'R'])


def _scalar_model(F, G, H):
    return LgModel([[F]], [[G]], [[H]], [[1.]], [[1.]], [[0.]], None)


class DiscreteKalmanTest(unittest.TestCase):
    def test_scalar_update(self):
        model = _Discrete([[1.]], None, [[1.]], [[1.]], [[1.]], [[1.]])
        fs = kf_discrete_step(FilterState(np.array([0.]), np.array([[1.]])),
                              [2.], model)
        self.assertAlmostEqual(fs.x_hat[0], 4. / 3., delta=1e-12)
        self.assertAlmostEqual(fs.sigma[0, 0], 2. / 3., delta=1e-12)

    def test_singular_innovation(self):
        model = _Discrete([[1.]], None, [[0.]], [[1.]], [[0.]], [[0.]])
        fs = FilterState(np.array([0.]), np.array([[0.]]))
        self.assertRaises(NumericalError, kf_discrete_step, fs, [1.], model)


class KalmanBucyTest(unittest.TestCase):
    def test_uncorrelated_step(self):
        fs = FilterState(np.array([0.]), np.array([[1.]]))
        noise = NoiseSpec([[1.]], [[1.]], [[0.]])
        new = kb_correlated_step(fs, 0.1, [[0.]], [[0.]], [[1.]], noise,
                                 dt=0.01)
        self.assertAlmostEqual(new.x_hat[0], 0.1, delta=1e-14)
        self.assertAlmostEqual(new.sigma[0, 0], 0.99, delta=1e-14)

    def test_correlated_gain(self):
        fs = FilterState(np.array([0.]), np.array([[0.]]))
        noise = NoiseSpec([[1.]], [[4.]], [[2.]])
        new = kb_correlated_step(fs, 0.2, [[0.]], [[3.]], [[1.]], noise,
                                 dt=0.01)
        # K = G S / R = 1.5
        self.assertAlmostEqual(new.x_hat[0], 0.3, delta=1e-14)

    def test_requires_dt(self):
        fs = FilterState(np.array([0.]), np.array([[1.]]))
        noise = NoiseSpec([[1.]], [[1.]], [[0.]])
        self.assertRaises(ValueError, kb_correlated_step, fs, 0., [[0.]],
                          [[0.]], [[1.]], noise)


class RiccatiTest(unittest.TestCase):
    def test_ou_prediction(self):
        chi, q, s0 = 0.7, 2., 0.3
        t = np.linspace(0., 3., 7)
        sigma = integrate_riccati(
            lambda _: _scalar_model(-chi, np.sqrt(q), 0.), [[s0]], t)
        expected = q / (2. * chi) * (1. - np.exp(-2. * chi * t)) \
            + s0 * np.exp(-2. * chi * t)
        np.testing.assert_allclose(sigma[:, 0, 0], expected, rtol=1e-7)

    def test_static_estimation(self):
        t = np.linspace(0., 10., 11)
        sigma = integrate_riccati(lambda _: _scalar_model(0., 0., 1.),
                                  [[2.]], t)
        np.testing.assert_allclose(sigma[:, 0, 0], 2. / (1. + 2. * t),
                                   rtol=1e-7)

    def test_progress_bar_keeps_solution(self):
        t = np.linspace(0., 10., 11)
        quiet = integrate_riccati(lambda _: _scalar_model(-0.3, 1., 1.),
                                  [[2.]], t)
        shown = integrate_riccati(lambda _: _scalar_model(-0.3, 1., 1.),
                                  [[2.]], t, progress=True)
        np.testing.assert_array_equal(quiet, shown)

    def test_closed_form_noiseless(self):
        result = check_kalman_closed_form(N_values=(1e3,))
        self.assertTrue(result.passed, result)


class LgFilterTest(unittest.TestCase):
    def test_prior(self):
        fs = lg_filter_init(1.5, 0.5)
        np.testing.assert_allclose(fs.x_hat, [0., 1.5])
        np.testing.assert_allclose(fs.sigma, np.diag([0., 0.25]))

    def test_variance_shrinks(self):
        p = SensorParams(1000, 0.01, 1., 1e-4)
        ou = OuParams(0., 0.)
        fs = lg_filter_init(0., 0.1)
        rng = RngStream(2)
        dt = 0.005
        for k in range(200):
            fs = lg_filter_step(fs, np.sqrt(p.eta) * wiener_increment(rng, dt),
                                k * dt, dt, p, ou)
        self.assertLess(fs.sigma[1, 1], 0.01)


class EkfTest(unittest.TestCase):
    def setUp(self):
        self.p = SensorParams(200, 0.05, 0.9, 0.01)

    def test_init_shapes(self):
        fs = ekf_init(self.p, 1., 0.5, EkfModel('ou', OuParams(0., 0.)))
        self.assertEqual(fs.x_hat.shape, (7,))
        self.assertEqual(fs.sigma[6, 6], 0.25)
        vdp = VdpParams(1e3, 1., 0.00098, 1., 0.003, 0.0045, 0.0045, 0.0045)
        fs = ekf_init(self.p, 0.0045, 0.01, EkfModel('vdp', vdp), 0.02, 0.03)
        self.assertEqual(fs.x_hat.shape, (9,))
        np.testing.assert_allclose(np.diag(fs.sigma)[6:],
                                   [4e-4, 1e-4, 9e-4])

    def test_invalid_variant(self):
        self.assertRaises(ValueError, ekf_init, self.p, 0., 1.,
                          EkfModel('constant', None))

    def test_known_frequency_reproduces_cog(self):
        p, omega, u, dt = self.p, 1.2, -0.3, 0.01
        model = EkfModel('ou', OuParams(0., 0.))
        fs = ekf_init(p, omega, 0., model)
        x = css_moments(p.N, initial_signal('constant', omega))
        rng = RngStream(4)
        for _ in range(50):
            dW = wiener_increment(rng, dt)
            dy = cog_measurement(x, dt, dW, p)
            fs = ekf_step(fs, dy, dt, u, p, model)
            x = cog_step(x, u, dt, dW, 0., p)
        np.testing.assert_allclose(fs.x_hat[:6], normalize(x, p.N),
                                   rtol=1e-10, atol=1e-12)
        self.assertEqual(fs.x_hat[6], omega)
        np.testing.assert_allclose(fs.sigma, 0., atol=1e-14)

    def test_step_is_kalman_bucy_on_linearization(self):
        p, dt, u = self.p, 0.01, 0.2
        model = EkfModel('ou', OuParams(0.1, 0.05))
        rng = RngStream(11)
        fs = ekf_init(p, 0.8, 0.3, model)
        for _ in range(20):
            dy = np.sqrt(p.eta) * wiener_increment(rng, dt)
            F, G, H = ekf_jacobians_ou(fs.x_hat, u, p, model.params)
            noise = NoiseSpec(np.eye(2), np.array([[p.eta]]),
                              np.array([[np.sqrt(p.eta)], [0.]]))
            linear = kb_correlated_step(fs, dy, F, G, H, noise, dt=dt)
            new = ekf_step(fs, dy, dt, u, p, model)
            np.testing.assert_allclose(new.sigma, linear.sigma, rtol=1e-12,
                                       atol=1e-15)
            drift = ekf_drift(fs.x_hat, u, p, model) - F @ fs.x_hat
            np.testing.assert_allclose(new.x_hat, linear.x_hat + drift * dt,
                                       rtol=1e-12, atol=1e-12)
            fs = new

    def test_matches_linear_filter_at_small_rotation(self):
        p = SensorParams(1e4, 1e-3, 1., 1e-6)
        ou = OuParams(0., 0.)
        model = EkfModel('ou', ou)
        dt, omega = 1e-3, 0.05
        ekf = ekf_init(p, 0., 0.1, model)
        lg = lg_filter_init(0., 0.1)
        x = css_moments(p.N, initial_signal('constant', omega))
        rng = RngStream(12)
        for k in range(1000):
            dW = wiener_increment(rng, dt)
            dy = cog_measurement(x, dt, dW, p)
            ekf = ekf_step(ekf, dy, dt, 0., p, model)
            lg = lg_filter_step(lg, dy, k * dt, dt, p, ou)
            x = cog_step(x, 0., dt, dW, 0., p)
        np.testing.assert_allclose(ekf.sigma[6, 6], lg.sigma[1, 1],
                                   rtol=0.05)
        self.assertLess(abs(ekf.x_hat[6] - lg.x_hat[1]),
                        0.2 * np.sqrt(lg.sigma[1, 1]))
        self.assertAlmostEqual(np.sqrt(p.N) * ekf.x_hat[1], lg.x_hat[0],
                               delta=0.05 * abs(lg.x_hat[0]))

    def test_jacobians(self):
        result = check_jacobians(states=5)
        self.assertTrue(result.passed, result)


class NeesTest(unittest.TestCase):
    def test_value(self):
        self.assertAlmostEqual(nees([1.], [0.], [[4.]]), 0.25, delta=1e-14)

    def test_singular(self):
        self.assertRaises(NumericalError, nees, [1.], [0.], [[0.]])

    def test_interval(self):
        low, high = nees_interval(2, 50)
        self.assertLess(low, 2.)
        self.assertGreater(high, 2.)


if __name__ == '__main__':
    unittest.main()
