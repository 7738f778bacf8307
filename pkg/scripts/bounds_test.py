import unittest
import warnings

import numpy as np

from magsense.bounds import bound_curve
from magsense.bounds import BoundParams
from magsense.bounds import cs_limit
from magsense.bounds import cs_limit_fluctuating_N
from magsense.bounds import cs_limit_gaussian_N
from magsense.bounds import cs_limit_inf_prior
from magsense.bounds import cs_recursion
from magsense.bounds import cs_recursion_closed_form
from magsense.bounds import kf_amse_hs
from magsense.bounds import kf_amse_noiseless
from magsense.bounds import kf_ss_error
from magsense.bounds import kf_ss_error_exact
from magsense.bounds import prior_variance
from magsense.bounds import timescales
from magsense.validation import check_quantum_limits
from magsense.validation import check_recursion


class CsLimitTest(unittest.TestCase):
    def test_realistic_limits(self):
        without = np.sqrt(cs_limit(np.inf, BoundParams(1e4, 0., 100., 1e13)))
        with_kc = np.sqrt(cs_limit(np.inf,
                                   BoundParams(1e4, 1e-6, 100., 1e13)))
        self.assertEqual(float('{:.2g}'.format(without)), 0.021)
        self.assertEqual(float('{:.2g}'.format(with_kc)), 0.32)
        self.assertTrue(check_quantum_limits().passed)

    def test_starts_at_prior(self):
        bp = BoundParams(2., 0.1, 0., 100., 0.7)
        self.assertAlmostEqual(float(cs_limit(0., bp)), 0.49, delta=1e-14)

    def test_steady_value(self):
        bp = BoundParams(2., 0.1, 0., 100., 0.7)
        self.assertAlmostEqual(float(cs_limit(1e3, bp)), np.sqrt(0.2),
                               delta=1e-12)

    def test_static_field(self):
        bp = BoundParams(0., 0.1, 0., 100., 0.5)
        self.assertAlmostEqual(float(cs_limit(3., bp)), 1. / (4. + 30.),
                               delta=1e-14)
        self.assertAlmostEqual(float(cs_limit(3., bp._replace(
            sigma0=np.inf))), 0.1 / 3., delta=1e-14)

    def test_degenerate(self):
        bp = BoundParams(1., 0., 0., 100.)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            value = cs_limit(np.array([1., 2.]), bp)
        np.testing.assert_array_equal(value, [0., 0.])
        self.assertEqual(len(caught), 1)

    def test_inf_prior_needs_positive_time(self):
        self.assertRaises(ValueError, cs_limit_inf_prior, 0.,
                          BoundParams(1., 0.1, 0., 10.))

    def test_local_dephasing_scales_with_N(self):
        bp = BoundParams(1., 0., 5., 10.)
        self.assertAlmostEqual(bp.kappa_Q, 1., delta=1e-14)

    def test_invalid_prior(self):
        self.assertRaises(ValueError, BoundParams, 1., 0.1, 0., 10., 0.)


class RecursionTest(unittest.TestCase):
    def test_closed_form(self):
        bp = BoundParams(3., 0.2, 0., 1e6, 0.4)
        exact = cs_recursion(50, 0.01, bp)
        self.assertAlmostEqual(cs_recursion_closed_form(50, 0.01, bp) / exact,
                               1., delta=1e-10)

    def test_closed_form_with_reversion(self):
        bp = BoundParams(3., 0.2, 0., 1e6, 0.4, chi=0.5)
        exact = cs_recursion(80, 0.02, bp)
        self.assertAlmostEqual(cs_recursion_closed_form(80, 0.02, bp) / exact,
                               1., delta=1e-10)

    def test_converges_to_limit(self):
        result = check_recursion(sets=3)
        self.assertTrue(result.passed, result)

    def test_invalid_arguments(self):
        bp = BoundParams(1., 0.1, 0., 10., 1.)
        self.assertRaises(ValueError, cs_recursion, -1, 0.1, bp)
        self.assertRaises(ValueError, cs_recursion, 1, 0., bp)

    def test_prior_variance(self):
        bp = BoundParams(2., 0.1, 0., 10., 0.5)
        self.assertAlmostEqual(prior_variance(10, 0.1, bp), 2.25,
                               delta=1e-14)
        stationary = prior_variance(1e6, 0.1, bp._replace(chi=4.))
        self.assertAlmostEqual(stationary, 0.25, delta=1e-12)


class AtomNumberTest(unittest.TestCase):
    def test_gaussian_number_above_mean_number(self):
        bp = BoundParams(1., 0., 1., 100.)
        fluctuating = cs_limit_fluctuating_N(100., bp)
        gaussian = cs_limit_gaussian_N(100., bp, 30.)
        self.assertGreaterEqual(gaussian, fluctuating)
        self.assertEqual(cs_limit_gaussian_N(100., bp, 0.), fluctuating)


class KalmanSolutionTest(unittest.TestCase):
    def test_short_time_asymptote(self):
        N, M, t = 10., 1., 1e-4
        short, _ = kf_amse_hs(t, N, M, 1.)
        self.assertAlmostEqual(kf_amse_noiseless(t, N, M, 1., np.inf)
                               / short, 1., delta=0.01)

    def test_long_time_asymptote(self):
        N, M, t = 1e8, 1., 1e-4
        _, long = kf_amse_hs(t, N, M, 1.)
        self.assertAlmostEqual(kf_amse_noiseless(t, N, M, 1., np.inf)
                               / long, 1., delta=0.01)

    def test_prior_caps_error(self):
        self.assertLessEqual(kf_amse_noiseless(1e-6, 10., 1., 1., 0.5),
                             0.25)

    def test_steady_error(self):
        args = (1e5, 1e5, 1., 1e14, 0.1)
        self.assertAlmostEqual(kf_ss_error_exact(*args) / kf_ss_error(*args),
                               1., delta=1e-12)
        self.assertLess(kf_ss_error_exact(*args, chi=0.5),
                        kf_ss_error_exact(*args))


class TimescalesTest(unittest.TestCase):
    def test_atom_numbers_at_own_times(self):
        N = 1e6
        scales = timescales(N, 1e-3, 0.8, 1e2, 1e-2)
        self.assertAlmostEqual(scales.N_CS / N, 1., delta=1e-12)
        self.assertAlmostEqual(scales.N_SS / N, 1., delta=1e-12)
        self.assertAlmostEqual(scales.t_SS, 1e-2, delta=1e-14)

    def test_without_dephasing(self):
        scales = timescales(1e6, 1e-3, 1., 1e2, 0.)
        self.assertEqual(scales.t_CS, np.inf)
        self.assertEqual(scales.N_CS, np.inf)
        self.assertEqual(scales.N_SS_prime, np.inf)


class BoundCurveTest(unittest.TestCase):
    def test_flags(self):
        frame = bound_curve([0.1, 1e3], BoundParams(2., 0.1, 0., 100.))
        self.assertEqual(list(frame.columns),
                         ['t', 'v_cs', 'sqrt_v_cs', 'flags'])
        self.assertEqual(frame['flags'][0], 'inf_prior')
        self.assertEqual(frame['flags'][1], 'inf_prior|steady')

    def test_static_flags(self):
        frame = bound_curve([1., 2.], BoundParams(0., 0.1, 0., 100., 1.))
        self.assertTrue((frame['flags'] == 'static').all())
        np.testing.assert_allclose(frame['sqrt_v_cs'] ** 2, frame['v_cs'])


if __name__ == '__main__':
    unittest.main()
