import unittest
import warnings

import numpy as np
from scipy.integrate import solve_ivp

from magsense.cog import cog_measurement
from magsense.cog import cog_step
from magsense.cog import css_moments
from magsense.cog import denormalize
from magsense.cog import jx_unconditional
from magsense.cog import lg_model
from magsense.cog import MomentState
from magsense.cog import normalize
from magsense.cog import vy_exact
from magsense.cog import vy_hyperbolic
from magsense.cog import vy_regimes
from magsense.sme import SensorParams
from magsense.spin import squeezing_wineland
from magsense.stochastic import initial_signal
from magsense.stochastic import OuParams
from magsense.util import NumericalError


class MomentStateTest(unittest.TestCase):
    def test_css(self):
        x = css_moments(40, initial_signal('constant', 1.))
        np.testing.assert_allclose(x.spin_vector(),
                                   [20., 0., 0., 10., 10., 0.])
        self.assertEqual(x.clamps, 0)

    def test_normalization_inverts(self):
        signal = initial_signal('constant', 1.)
        x = MomentState(3., -1., 0.5, 2., 4., 0.1, signal)
        back = denormalize(normalize(x, 16), 16, signal)
        np.testing.assert_allclose(back.spin_vector(), x.spin_vector())


class StepTest(unittest.TestCase):
    def setUp(self):
        self.p = SensorParams(100, 0.1, 0.8, 0.005)
        self.x = css_moments(100, initial_signal('constant', 2.))

    def test_single_step_from_css(self):
        p, dt, dW, u = self.p, 1e-3, 0.02, -0.5
        J, N = p.J, p.N
        w = 2. + u
        new = cog_step(self.x, u, dt, dW, 0., p)
        self.assertAlmostEqual(new.mean_jx, J - 0.5 * (p.kappa_coll + p.M)
                               * J * dt, delta=1e-10)
        self.assertAlmostEqual(new.mean_jy, w * J * dt + 2. * np.sqrt(
            p.eta * p.M) * N / 4. * dW, delta=1e-10)
        self.assertAlmostEqual(new.var_y, N / 4. + (
            p.kappa_coll * (J ** 2 - N / 4.)
            - 4. * p.eta * p.M * (N / 4.) ** 2) * dt, delta=1e-9)
        self.assertAlmostEqual(new.var_z, N / 4. + p.M * (J ** 2 - N / 4.)
                               * dt, delta=1e-9)

    def test_omega_override(self):
        a = cog_step(self.x, 0., 1e-3, 0., 0., self.p, omega=5.)
        b = cog_step(self.x._replace(signal=initial_signal('constant', 5.)),
                     0., 1e-3, 0., 0., self.p)
        np.testing.assert_allclose(a.spin_vector(), b.spin_vector())

    def test_ou_signal_advances(self):
        x = css_moments(100, initial_signal('ou', 1.))
        new = cog_step(x, 0., 0.01, 0., 0.1, self.p, OuParams(2., 4.))
        self.assertAlmostEqual(new.signal.omega, 1. - 2. * 0.01 + 2. * 0.1,
                               delta=1e-12)

    def test_measurement(self):
        x = self.x._replace(mean_jy=3.)
        dy = cog_measurement(x, 0.01, 0.1, self.p)
        self.assertAlmostEqual(dy, 2. * 0.8 * np.sqrt(0.1) * 3. * 0.01
                               + np.sqrt(0.8) * 0.1, delta=1e-14)

    def test_negative_variance_is_clamped(self):
        p = SensorParams(100, 1.)
        x = MomentState(0., 0., 0., 100., 0., 0.,
                        initial_signal('constant', 0.))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            new = cog_step(x, 0., 1., 0., 0., p)
        self.assertEqual(new.var_y, 0.)
        self.assertGreaterEqual(new.clamps, 1)
        self.assertEqual(len(caught), 1)

    def test_non_finite(self):
        x = self.x._replace(mean_jx=np.nan)
        self.assertRaises(NumericalError, cog_step, x, 0., 1e-3, 0., 0.,
                          self.p)

    def test_nonpositive_dt(self):
        self.assertRaises(ValueError, cog_step, self.x, 0., 0., 0., 0.,
                          self.p)


class VyTest(unittest.TestCase):
    def test_initial_value(self):
        p = SensorParams(100, 0.1, 1., 0.005)
        self.assertAlmostEqual(float(vy_exact(0., p)), 25., delta=1e-9)

    def test_without_dephasing(self):
        p = SensorParams(100, 0.1)
        t = np.array([0., 1., 10.])
        np.testing.assert_allclose(vy_exact(t, p), 50. / (2. + 20. * t))

    def test_matches_ode(self):
        p = SensorParams(200, 0.02, 0.6, 0.01)
        J = p.J

        def rhs(t, v):
            return -4. * p.eta * p.M * v ** 2 \
                + p.kappa_coll * J ** 2 * np.exp(-(p.M + p.kappa_coll) * t)

        t = np.linspace(0., 20., 50)
        sol = solve_ivp(rhs, (0., 20.), [J / 2.], method='Radau', t_eval=t,
                        rtol=1e-11, atol=1e-11)
        np.testing.assert_allclose(vy_exact(t, p), sol.y[0], rtol=1e-5)

    def test_regimes(self):
        p = SensorParams(100, 0.1, 1., 0.005)
        _, _, t_star = vy_regimes(0., p)
        short, _, _ = vy_regimes(0.05 * t_star, p)
        _, long, _ = vy_regimes(10. * t_star, p)
        self.assertAlmostEqual(short / vy_exact(0.05 * t_star, p), 1.,
                               delta=0.05)
        self.assertAlmostEqual(long / vy_exact(10. * t_star, p), 1.,
                               delta=0.05)
        self.assertAlmostEqual(
            vy_hyperbolic(10. * t_star, p) / vy_exact(10. * t_star, p), 1.,
            delta=0.05)

    def test_regimes_without_dephasing(self):
        _, _, t_star = vy_regimes(1., SensorParams(100, 0.1))
        self.assertEqual(t_star, np.inf)

    def test_negative_time(self):
        self.assertRaises(ValueError, vy_exact, -1., SensorParams(10, 0.1))


class ConditionalSqueezingTest(unittest.TestCase):
    def _xi2_path(self, M, kappa_coll, dt=0.01):
        p = SensorParams(100, M, 1., kappa_coll)
        x = css_moments(p.N, initial_signal('constant', 0.))
        path = []
        for _ in range(int(2. / (M + kappa_coll) / dt)):
            x = cog_step(x, 0., dt, 0., 0., p)
            path.append(squeezing_wineland(x.var_y, x.mean_jx, p.N))
        return np.array(path)

    def test_squeezes_when_measurement_dominates(self):
        path = self._xi2_path(0.1, 0.005)
        self.assertLess(path.min(), 0.5)

    def test_no_squeezing_when_dephasing_dominates(self):
        path = self._xi2_path(0.005, 0.1)
        self.assertGreater(path.min(), 1.)


class LgModelTest(unittest.TestCase):
    def test_steady_matrices(self):
        p = SensorParams(1000, 0.01, 0.5, 1e-4)
        model = lg_model(0., p, OuParams(0.1, 2.), steady=True)
        np.testing.assert_allclose(model.H, [[2. * 0.5 * 0.1, 0.]])
        self.assertAlmostEqual(model.G[0, 0], 500. * 0.01, delta=1e-12)
        self.assertAlmostEqual(model.G[1, 1], np.sqrt(2.), delta=1e-12)
        np.testing.assert_allclose(model.F, [[0., 500.], [0., -0.1]])

    def test_transient_noise_gain(self):
        p = SensorParams(1000, 0.01, 1., 1e-4)
        model = lg_model(3., p, OuParams(0., 0.))
        self.assertAlmostEqual(model.G[0, 0],
                               2. * 0.1 * float(vy_exact(3., p)),
                               delta=1e-10)


class JxUnconditionalTest(unittest.TestCase):
    def test_decay(self):
        p = SensorParams(10, 0.1, 1., 0.02, 0.01)
        self.assertAlmostEqual(jx_unconditional(2., p).mean,
                               5. * np.exp(-(0.1 + 0.02 + 0.02)),
                               delta=1e-12)

    def test_validity_flags(self):
        p = SensorParams(10, 0.1)
        ok = jx_unconditional(1., p, OuParams(0.1, 0.1, 0.1))
        self.assertTrue(all(ok[1:]))
        bad = jx_unconditional(1., p, OuParams(10., 10., 10.))
        self.assertFalse(bad.chi_ok)
        self.assertFalse(bad.q_ok)
        self.assertFalse(bad.omega_bar_ok)


if __name__ == '__main__':
    unittest.main()
