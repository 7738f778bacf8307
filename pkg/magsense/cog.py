"""
Co-moving Gaussian (CoG) moment model.

The conditional state is carried by the spin means and second moments
(<Jx>, <Jy>, Vx, Vy, Vz, Cxy) plus the signal. Stepping is done internally on
the sqrt(N)-normalized vector

    z = (X, Y, VX, VY, VZ, CXY) = (<Jx>/sqrt(N), <Jy>/sqrt(N), Vx/N, ...)

and converted back at the interface.
"""

import warnings
from collections import namedtuple

import numpy as np
from scipy.special import ive, kve

from .stochastic import ou_average_variance
from .util import NumericalError

__all__ = ['MomentState', 'LgModel', 'JxUnconditional', 'css_moments',
           'normalize', 'denormalize', 'normalized_drift',
           'normalized_diffusion', 'cog_drift', 'cog_diffusion', 'cog_step',
           'cog_measurement', 'lg_model', 'vy_exact', 'vy_regimes',
           'vy_hyperbolic', 'jx_unconditional']

_SPIN_FIELDS = ['mean_jx', 'mean_jy', 'var_x', 'var_y', 'var_z', 'cov_xy']


class MomentState(namedtuple('MomentState',
                             _SPIN_FIELDS + ['signal', 'clamps'])):
    """Spin moments in collective units; clamps counts variance clamps."""
    __slots__ = ()

    def __new__(cls, mean_jx, mean_jy, var_x, var_y, var_z, cov_xy, signal,
                clamps=0):
        return super(MomentState, cls).__new__(
            cls, float(mean_jx), float(mean_jy), float(var_x), float(var_y),
            float(var_z), float(cov_xy), signal, int(clamps))

    def spin_vector(self):
        return np.array([getattr(self, name) for name in _SPIN_FIELDS])


LgModel = namedtuple('LgModel', ['F', 'G', 'H', 'Q', 'R', 'S', 'B'])
JxUnconditional = namedtuple('JxUnconditional',
                             ['mean', 'chi_ok', 'q_ok', 'omega_bar_ok',
                              'average_ok'])


def css_moments(N, signal):
    """CoG state of a coherent spin state along +x."""
    return MomentState(N / 2., 0., 0., N / 4., N / 4., 0., signal)


def _scales(N):
    root = np.sqrt(N)
    return np.array([root, root, N, N, N, N], dtype=float)


def normalize(x, N):
    return x.spin_vector() / _scales(N)


def denormalize(z, N, signal, clamps=0):
    return MomentState(*(np.asarray(z) * _scales(N)), signal=signal,
                       clamps=clamps)


def normalized_drift(z, w, p):
    """Deterministic part of the normalized CoG SDEs at rotation rate w."""
    X, Y, VX, VY, VZ, CXY = z
    N, M, eta = p.N, p.M, p.eta
    kc, kl = p.kappa_coll, p.kappa_loc
    return np.array([
        -w * Y - 0.5 * (kc + 2. * kl + M) * X,
        w * X - 0.5 * (kc + 2. * kl) * Y,
        -2. * w * CXY + kc * (VY + Y ** 2 - VX) + kl * (0.5 - 2. * VX)
        + M * (VZ - VX - 4. * eta * N * CXY ** 2),
        2. * w * CXY + kc * (VX + X ** 2 - VY) + kl * (0.5 - 2. * VY)
        - 4. * eta * M * N * VY ** 2,
        M * (VX + X ** 2 - VZ),
        w * (VX - VY) - kc * (2. * CXY + X * Y) - 2. * kl * CXY
        - 0.5 * M * CXY * (1. + 8. * eta * N * VY),
    ])


def normalized_diffusion(z, p):
    """Coefficients of the measurement Wiener increment dW (third-order
    moments discarded)."""
    root = 2. * np.sqrt(p.eta * p.M * p.N)
    return np.array([root * z[5], root * z[3], 0., 0., 0., 0.])


def _ou_drift(omega, ou):
    return -ou.chi * (omega - ou.omega_bar)


def cog_drift(x, u, p, ou=None):
    """Seven right-hand sides in collective units: six spin moments and the
    signal frequency (zero unless OU parameters are given)."""
    z = normalize(x, p.N)
    spin = normalized_drift(z, x.signal.omega + u, p) * _scales(p.N)
    signal = _ou_drift(x.signal.omega, ou) \
        if ou is not None and x.signal.variant == 'ou' else 0.
    return np.append(spin, signal)


def cog_diffusion(x, p, ou=None):
    """7x2 diffusion matrix; columns are the dW and dW_omega channels."""
    out = np.zeros((7, 2))
    root = 2. * np.sqrt(p.eta * p.M)
    out[0, 0] = root * x.cov_xy
    out[1, 0] = root * x.var_y
    if ou is not None and x.signal.variant == 'ou':
        out[6, 1] = np.sqrt(ou.q_omega)
    return out


def cog_step(x, u, dt, dW, dW_omega, p, ou=None, omega=None):
    """Euler-Maruyama step of the CoG SDEs.

    omega overrides the rotation frequency for this step (the harness passes
    the sensed frequency). The signal component is advanced here only when
    OU parameters are given; otherwise the caller owns the signal.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0; it is {}.".format(dt))
    w = (x.signal.omega if omega is None else omega) + u
    z = normalize(x, p.N)
    z_new = z + normalized_drift(z, w, p) * dt \
        + normalized_diffusion(z, p) * dW
    if not np.all(np.isfinite(z_new)):
        raise NumericalError("CoG step produced non-finite moments.",
                             state=z.tolist(), u=u, dW=dW)
    clamps = x.clamps
    negative = z_new[2:5] < 0
    if negative.any():
        if clamps == 0:
            warnings.warn("Negative CoG variance clamped at 0; dt may be "
                          "too coarse.")
        clamps += int(negative.sum())
        z_new[2:5] = np.clip(z_new[2:5], 0., None)
    signal = x.signal
    if ou is not None and signal.variant == 'ou':
        signal = signal._replace(
            omega=signal.omega + _ou_drift(signal.omega, ou) * dt
            + np.sqrt(ou.q_omega) * dW_omega)
    return denormalize(z_new, p.N, signal, clamps)


def cog_measurement(x, dt, dW, p):
    return 2. * p.eta * np.sqrt(p.M) * x.mean_jy * dt + np.sqrt(p.eta) * dW


def lg_model(t, p, ou, steady=False):
    """Linear-Gaussian model for the state (<Jy>, omega).

    With steady=True the decay factors are dropped and Vy takes its
    long-time value, which gives the stationary matrices.
    """
    J = p.N / 2.
    r = p.M + p.kappa_coll
    if steady:
        decay = 1.
        g_spin = J * np.sqrt(p.kappa_coll)
    else:
        decay = np.exp(-r * t / 2.)
        g_spin = 2. * np.sqrt(p.eta * p.M) * vy_exact(t, p)
    F = np.array([[0., J * decay], [0., -ou.chi]])
    G = np.diag([g_spin, np.sqrt(ou.q_omega)])
    # the record dy = 2 eta sqrt(M) <Jy> dt + sqrt(eta) dW fixes H
    H = np.array([[2. * p.eta * np.sqrt(p.M), 0.]])
    Q = np.eye(2)
    R = np.array([[p.eta]])
    S = np.array([[np.sqrt(p.eta)], [0.]])
    B = np.array([[J * decay], [0.]])
    return LgModel(F, G, H, Q, R, S, B)


def vy_exact(t, p):
    """Exact solution of dVy = -4 eta M Vy^2 dt + kc J^2 e^{-(M+kc)t} dt,
    Vy(0) = J/2, through exponentially scaled modified Bessel functions."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0.")
    J = p.N / 2.
    M, eta, kc = p.M, p.eta, p.kappa_coll
    if kc < 0 or M < 0:
        raise ValueError("M and kappa_coll must be >= 0.")
    if kc == 0:
        return J / (2. + 4. * eta * M * J * t)
    r = M + kc
    if M * eta == 0:
        return J / 2. - kc * J ** 2 / r * np.expm1(-r * t)
    gamma = np.sqrt(eta * M / kc)
    z0 = 4. * J * np.sqrt(eta * M * kc) / r
    z = z0 * np.exp(-r * t / 2.)
    a = kve(1, z0) - gamma * kve(0, z0)
    b = ive(1, z0) + gamma * ive(0, z0)
    grow = np.exp(2. * (z - z0))
    num = a * ive(1, z) * grow - b * kve(1, z)
    den = a * ive(0, z) * grow + b * kve(0, z)
    return -(J / 2.) / gamma * np.exp(-r * t / 2.) * num / den


def vy_regimes(t, p):
    """Short- and long-time forms of Vy and the transition time t*."""
    J = p.N / 2.
    M, eta, kc = p.M, p.eta, p.kappa_coll
    decay = np.exp(-(M + kc) * np.asarray(t, dtype=float) / 2.)
    short = J / 2. * (1. + 2. * J * t * kc) / (1. + 2. * J * t * M * eta) \
        * decay
    if kc == 0 or M * eta == 0:
        return short, 0. * decay, np.inf
    long = J / 2. * np.sqrt(kc / (eta * M)) * decay
    t_star = 1. / (2. * J * np.sqrt(M * kc * eta))
    return short, long, t_star


def vy_hyperbolic(t, p):
    J = p.N / 2.
    M, eta, kc = p.M, p.eta, p.kappa_coll
    t = np.asarray(t, dtype=float)
    s = np.sqrt(M * kc * eta)
    th = np.tanh(2. * J * t * s)
    return J / 2. * np.exp(-(M + kc) * t / 2.) \
        * (s + kc * th) / (s + M * eta * th)


def jx_unconditional(t, p, ou=None):
    """Unconditional polarization J e^{-(M + kc + 2 kl) t / 2} with the
    validity flags of the weak-field picture."""
    J = p.N / 2.
    mean = J * np.exp(-(p.M + p.kappa_coll + 2. * p.kappa_loc) * t / 2.)
    if ou is None or t == 0:
        return JxUnconditional(mean, True, True, True, True)
    chi_ok = ou.chi <= 4. / (3. * t)
    q_ok = ou.q_omega <= 3. / (2. * t ** 3)
    omega_bar_ok = abs(ou.omega_bar) <= np.sqrt(2.) / t
    average_ok = ou_average_variance(t, ou) <= 2. / t ** 2
    return JxUnconditional(mean, bool(chi_ok), bool(q_ok),
                           bool(omega_bar_ok), bool(average_ok))
