"""
Precision limits for tracking the Larmor frequency under dephasing, and the
analytic Kalman solutions of the linear-Gaussian regime.

All bounds are variances in (rad/s)^2.
"""

import warnings
from collections import namedtuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .util import check_positive

__all__ = ['BoundParams', 'Timescales', 'cs_limit', 'cs_limit_inf_prior',
           'cs_limit_static', 'cs_recursion', 'cs_recursion_closed_form',
           'prior_variance', 'cs_limit_fluctuating_N', 'cs_limit_gaussian_N',
           'kf_amse_noiseless', 'kf_amse_hs', 'kf_ss_error',
           'kf_ss_error_exact', 'timescales', 'bound_curve']

_SERIES_CUTOFF = 1.
_SERIES_TERMS = 40


class BoundParams(namedtuple('BoundParams', ['q_omega', 'kappa_coll',
                                             'kappa_loc', 'N', 'sigma0',
                                             'chi'])):
    __slots__ = ()

    def __new__(cls, q_omega, kappa_coll, kappa_loc, N, sigma0=np.inf,
                chi=0.):
        check_positive('q_omega', q_omega, strict=False)
        check_positive('kappa_coll', kappa_coll, strict=False)
        check_positive('kappa_loc', kappa_loc, strict=False)
        check_positive('N', N)
        check_positive('chi', chi, strict=False)
        if not sigma0 > 0:
            raise ValueError("sigma0 must be > 0; it is {}.".format(sigma0))
        return super(BoundParams, cls).__new__(
            cls, float(q_omega), float(kappa_coll), float(kappa_loc),
            float(N), float(sigma0), float(chi))

    @property
    def kappa_Q(self):
        return self.kappa_coll + 2. * self.kappa_loc / self.N


Timescales = namedtuple('Timescales', ['t_CS', 't_SS', 't_SS_prime', 'N_CS',
                                       'N_SS', 'N_SS_prime'])


def cs_limit_static(t, bp):
    kq = bp.kappa_Q
    if np.isinf(bp.sigma0):
        return kq / t
    return 1. / (1. / bp.sigma0 ** 2 + t / kq)


def cs_limit_inf_prior(t, bp):
    if not np.all(np.asarray(t) > 0):
        raise ValueError("t must be > 0 for an infinitely wide prior.")
    kq, q = bp.kappa_Q, bp.q_omega
    if q == 0:
        return kq / t
    s = np.sqrt(q * kq)
    return s / np.tanh(t * np.sqrt(q / kq))


def cs_limit(t, bp):
    """Variance bound at time t for a Gaussian prior of width sigma0."""
    kq, q = bp.kappa_Q, bp.q_omega
    if kq == 0:
        if q > 0:
            warnings.warn("kappa_Q = 0 with q_omega > 0: the bound is "
                          "degenerate and reported as 0.")
        return 0. * np.asarray(t, dtype=float)
    if q == 0:
        return cs_limit_static(t, bp)
    if np.isinf(bp.sigma0):
        return cs_limit_inf_prior(t, bp)
    s = np.sqrt(q * kq)
    th = np.tanh(np.asarray(t, dtype=float) * np.sqrt(q / kq))
    var0 = bp.sigma0 ** 2
    # cosh/sinh divided through by cosh
    return (s * var0 + s ** 2 * th) / (s + var0 * th)


def prior_variance(k, dt, bp):
    if bp.chi == 0:
        return bp.sigma0 ** 2 + bp.q_omega * k * dt
    decay = np.exp(-2. * k * bp.chi * dt)
    return bp.sigma0 ** 2 * decay \
        - bp.q_omega / (2. * bp.chi) * np.expm1(-2. * k * bp.chi * dt)


def _step_variances(dt, bp):
    if bp.chi == 0:
        vp = bp.q_omega * dt
    else:
        vp = -bp.q_omega / (2. * bp.chi) * np.expm1(-2. * bp.chi * dt)
    return vp, bp.kappa_Q / dt


def cs_recursion(k, dt, bp):
    """Iterate V <- Vp + Vq V / (Vq + V) k times from sigma0^2."""
    if k < 0 or not dt > 0:
        raise ValueError("Need k >= 0 and dt > 0; got k={}, dt={}."
                         .format(k, dt))
    vp, vq = _step_variances(dt, bp)
    v = bp.sigma0 ** 2
    for _ in range(int(k)):
        v = vp + vq * v / (vq + v)
    return v


def cs_recursion_closed_form(k, dt, bp):
    """Explicit solution of the recursion through (V-/V+)^k."""
    vp, vq = _step_variances(dt, bp)
    var0 = bp.sigma0 ** 2
    if vp == 0:
        return 1. / (1. / var0 + k / vq)
    s = np.sqrt(vp * (4. * vq + vp))
    v_plus = 2. * vq + vp + s
    v_minus = 2. * vq + vp - s
    w_plus = 2. * vp * vq + var0 * vp + var0 * s
    w_minus = -2. * vp * vq - var0 * vp + var0 * s
    u_plus = -vp + 2. * var0 + s
    u_minus = vp - 2. * var0 + s
    ratio = np.exp(k * np.log1p(-2. * s / v_plus))
    return (w_plus + w_minus * ratio) / (u_plus + u_minus * ratio)


def cs_limit_fluctuating_N(t, bp):
    """Jensen bound for a fluctuating atom number with mean bp.N."""
    return cs_limit_inf_prior(t, bp)


def cs_limit_gaussian_N(t, bp, sigma_N, order=40):
    """Average of cs_limit_inf_prior over N ~ Normal(bp.N, sigma_N^2),
    truncated at N >= 1."""
    if sigma_N == 0:
        return cs_limit_inf_prior(t, bp)
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / weights.sum()
    values = [cs_limit_inf_prior(t, bp._replace(N=max(1., bp.N
                                                       + sigma_N * x)))
              for x in nodes]
    return sum(w * v for w, v in zip(weights, values))


def _series_g(x):
    # -(4+x)e^{-x} + 8e^{-x/2} + x - 4 starts at x^4/48
    n = np.arange(4, 4 + _SERIES_TERMS)
    coeff = (-1.) ** n * (n - 4. + 2. ** (3. - n)) \
        / np.cumprod(np.concatenate([[24.], n[1:]]))
    return np.polyval(coeff[::-1], x) * x ** 4


def _series_h(x):
    # -e^{-x} + 4e^{-x/2} + x - 3 starts at x^3/12
    n = np.arange(3, 3 + _SERIES_TERMS)
    coeff = (-1.) ** n * (2. ** (2. - n) - 1.) \
        / np.cumprod(np.concatenate([[6.], n[1:]]))
    return np.polyval(coeff[::-1], x) * x ** 3


def _exp_terms(x):
    x = np.asarray(x, dtype=float)
    small = x < _SERIES_CUTOFF
    g = np.where(small, _series_g(np.minimum(x, _SERIES_CUTOFF)),
                 -(4. + x) * np.exp(-x) + 8. * np.exp(-x / 2.) + x - 4.)
    h = np.where(small, _series_h(np.minimum(x, _SERIES_CUTOFF)),
                 -np.exp(-x) + 4. * np.exp(-x / 2.) + x - 3.)
    return g, h


def kf_amse_noiseless(t, N, M, eta, sigma0):
    """Closed-form Kalman aMSE for a constant field without dephasing.

    Equal to A(1 + 2 eta J M t) / (a e^{-Mt} + 4(1 + 4 J eta) e^{-Mt/2} + b),
    regrouped so that the cancelling exponentials are summed as series for
    small M t.
    """
    J = N / 2.
    x = M * np.asarray(t, dtype=float)
    A = M ** 2 / (16. * eta * J ** 2)
    g, h = _exp_terms(x)
    head = A * (1. + 2. * eta * J * x)
    prior = 0. if np.isinf(sigma0) else head / sigma0 ** 2
    return head / (prior + h + 2. * eta * J * g)


def kf_amse_hs(t, N, M, eta):
    """Short- and long-time asymptotes 3/(N^2 eta M t^3), 12/(...)."""
    base = 1. / (N ** 2 * eta * M * np.asarray(t, dtype=float) ** 3)
    return 3. * base, 12. * base


def kf_ss_error(N, M, eta, q_omega, kappa_coll, chi=0.):
    """Steady aMSE of the linear-Gaussian Kalman filter (approximate form
    for chi != 0)."""
    if chi == 0:
        return np.sqrt(q_omega * kappa_coll
                       + 2. / N * np.sqrt(q_omega ** 3 / (M * eta)))
    return -kappa_coll * chi + np.sqrt(kappa_coll * q_omega
                                       + kappa_coll ** 2 * chi ** 2)


def kf_ss_error_exact(N, M, eta, q_omega, kappa_coll, chi=0.):
    """Stationary omega variance of the linear-Gaussian filter.

    With Sigma = [[x, y], [y, z]] the stationary Riccati equation reads

        b x^2 + 2 a x - 2 J y = 0
        J z = y (chi + a + b x)
        2 chi z = q - b y^2

    where a = 2 J sqrt(kc eta M) and b = 4 eta M. Eliminating x leaves a
    monotone equation in y on [0, sqrt(q / b)], solved by bracketing.
    """
    check_positive('chi', chi, strict=False)
    J = N / 2.
    a = 2. * J * np.sqrt(kappa_coll * eta * M)
    b = 4. * eta * M
    y_max = np.sqrt(q_omega / b)

    def z_of(y):
        return y * (chi + np.sqrt(a ** 2 + 2. * b * J * y)) / J

    if chi == 0 or q_omega == 0:
        return z_of(y_max)
    y = brentq(lambda v: (q_omega - b * v ** 2) - 2. * chi * z_of(v),
               0., y_max, xtol=1e-300, rtol=4. * np.finfo(float).eps,
               maxiter=500)
    return z_of(y)


def timescales(N, M, eta, q_omega, kappa_coll, t=None):
    """Characteristic times and atom numbers of the weak-field regime.

    N_CS and N_SS are evaluated at t (default t_CS and t'_SS, where they
    return N).
    """
    meta = M * eta
    with np.errstate(divide='ignore'):
        t_cs = 2. / N * np.sqrt(3. / (meta * kappa_coll)) \
            if kappa_coll > 0 else np.inf
        t_ss = np.sqrt(kappa_coll / q_omega) if q_omega > 0 else np.inf
        t_ss_prime = 3. ** (1. / 3.) \
            * (4. / (N ** 2 * meta * q_omega)) ** 0.25 \
            if q_omega > 0 else np.inf
    t_ncs = t_cs if t is None else t
    t_nss = t_ss_prime if t is None else t
    n_cs = 2. / t_ncs * np.sqrt(3. / (meta * kappa_coll)) \
        if kappa_coll > 0 else np.inf
    n_ss = 2. * 3. ** (2. / 3.) / (t_nss ** 2 * np.sqrt(meta * q_omega)) \
        if q_omega > 0 else np.inf
    n_ss_prime = 2. / kappa_coll * np.sqrt(q_omega / meta) \
        if kappa_coll > 0 else np.inf
    return Timescales(t_cs, t_ss, t_ss_prime, n_cs, n_ss, n_ss_prime)


def bound_curve(t_grid, bp):
    """DataFrame t, v_cs, sqrt_v_cs, flags for the bound on t_grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    kq, q = bp.kappa_Q, bp.q_omega
    values = np.asarray(cs_limit(t_grid, bp), dtype=float) \
        * np.ones_like(t_grid)
    flags = []
    for t in t_grid:
        tags = []
        if kq == 0 and q > 0:
            tags.append('degenerate')
        if q == 0:
            tags.append('static')
        if np.isinf(bp.sigma0):
            tags.append('inf_prior')
        if kq > 0 and q > 0 and np.tanh(t * np.sqrt(q / kq)) > 1. - 1e-6:
            tags.append('steady')
        flags.append('|'.join(tags))
    return pd.DataFrame({'t': t_grid, 'v_cs': values,
                         'sqrt_v_cs': np.sqrt(values), 'flags': flags})
