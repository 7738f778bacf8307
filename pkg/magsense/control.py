"""
Feedback laws on the field estimate.

The LQR problem is posed on the linear-Gaussian state (<Jy>, omega) with
A = [[0, J], [0, -chi]], B = (J, 0)^T and cost p_J <Jy>^2 + p_omega omega^2
+ nu u^2. Its stationary gain is available in closed form.
"""

import warnings
from collections import namedtuple

import numpy as np
import scipy.linalg

from .util import check_positive

__all__ = ['LqrWeights', 'lqr_gain', 'lqr_riccati_solution', 'are_residual',
           'lqr_gain_numeric', 'lqr_control', 'field_compensation',
           'saturate', 'default_weights']


class LqrWeights(namedtuple('LqrWeights', ['p_J', 'p_omega', 'nu'])):
    """Quadratic cost weights. p_omega never reaches the gain row."""
    __slots__ = ()

    def __new__(cls, p_J, p_omega=0., nu=1.):
        check_positive('p_J', p_J, strict=False)
        check_positive('p_omega', p_omega, strict=False)
        check_positive('nu', nu)
        return super(LqrWeights, cls).__new__(cls, float(p_J),
                                              float(p_omega), float(nu))

    @property
    def lam(self):
        return np.sqrt(self.p_J / self.nu)


def default_weights(J):
    """Weights giving lambda = 1/J."""
    return LqrWeights(p_J=1. / J ** 2, nu=1.)


def _system(J, chi):
    A = np.array([[0., J], [0., -chi]])
    B = np.array([[J], [0.]])
    return A, B


def lqr_riccati_solution(weights, J, chi):
    """Stationary Riccati matrix Lambda; Lambda_22 is nan at chi = 0."""
    check_positive('J', J)
    root = np.sqrt(weights.p_J * weights.nu)
    l11 = root / J
    l12 = root / (chi + J * weights.lam) if chi + J * weights.lam > 0 \
        else 0.
    if chi > 0:
        l22 = (2. * J * l12 + weights.p_omega
               - J ** 2 / weights.nu * l12 ** 2) / (2. * chi)
    else:
        l22 = np.nan
    return np.array([[l11, l12], [l12, l22]])


def are_residual(lam_matrix, weights, J, chi):
    """Max-abs residual of A^T L + L A - L B nu^{-1} B^T L + Q = 0.

    At chi = 0 the (2, 2) entry has no finite solution and is left out.
    """
    A, B = _system(J, chi)
    Q = np.diag([weights.p_J, weights.p_omega])
    L = np.nan_to_num(lam_matrix)
    res = A.T @ L + L @ A - L @ B @ B.T @ L / weights.nu + Q
    if chi == 0:
        return float(max(abs(res[0, 0]), abs(res[0, 1]), abs(res[1, 0])))
    return float(np.max(np.abs(res)))


def lqr_gain(weights, J, chi):
    """Gain row (g_y, g_omega) = nu^{-1} B^T Lambda = (lambda,
    1 / (1 + chi / (J lambda)))."""
    check_positive('J', J)
    check_positive('chi', chi, strict=False)
    lam = weights.lam
    if lam == 0:
        # lambda = chi = 0 is taken as field compensation; a decaying field
        # with no penalty on <Jy> needs no control
        return np.array([0., 1. if chi == 0 else 0.])
    return np.array([lam, 1. / (1. + chi / (J * lam))])


def lqr_gain_numeric(weights, J, chi):
    if not chi > 0:
        raise ValueError("Numeric ARE gain needs chi > 0; it is {}."
                         .format(chi))
    A, B = _system(J, chi)
    Q = np.diag([weights.p_J, weights.p_omega])
    R = np.array([[weights.nu]])
    L = scipy.linalg.solve_continuous_are(A, B, Q, R)
    return (B.T @ L / weights.nu).ravel()


def saturate(u, u_max=None):
    if u_max is None:
        return u
    if u_max <= 0:
        raise ValueError("u_max must be > 0; it is {}.".format(u_max))
    if abs(u) > u_max:
        warnings.warn("Control saturated at {} rad/s.".format(u_max))
    return float(np.clip(u, -u_max, u_max))


def lqr_control(x_hat, lam, omega_gain=1.):
    """u = -omega_gain * omega_hat - lambda <Jy_hat>.

    x_hat is the pair (<Jy_hat>, omega_hat) in collective units.
    """
    jy_hat, omega_hat = x_hat
    return -omega_gain * omega_hat - lam * jy_hat


def field_compensation(x_hat):
    return -x_hat[1]
