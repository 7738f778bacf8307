"""
Random increments, SDE stepping and the field signal models.

Every trajectory owns one RngStream; the signal models (constant, OU and the
filtered Van der Pol oscillator) are advanced by `signal_step`, which also
returns the frequency actually sensed by the atoms over the step.
"""

from collections import namedtuple

import numpy as np

from .util import NumericalError, check_positive, check_square

__all__ = ['RngStream', 'OuParams', 'VdpParams', 'SignalState',
           'DiscreteModel', 'SIGNAL_VARIANTS', 'wiener_increment',
           'euler_maruyama_step', 'ou_step', 'ou_moments',
           'ou_average_variance', 'vdp_drift', 'vdp_jacobian', 'vdp_step',
           'signal_step', 'initial_signal', 'lg_discretize']

SIGNAL_VARIANTS = ('constant', 'ou', 'vdp')


class RngStream(object):
    """Independent normal stream for one trajectory.

    Identical (seed, stream_id) pairs reproduce identical sequences; distinct
    stream ids spawn statistically independent generators.
    """

    def __init__(self, seed, stream_id=0):
        if int(seed) < 0 or int(stream_id) < 0:
            raise ValueError("seed and stream_id must be non-negative; "
                             "they are {} and {}.".format(seed, stream_id))
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        sequence = np.random.SeedSequence(self.seed,
                                          spawn_key=(self.stream_id,))
        self.generator = np.random.default_rng(sequence)

    def normal(self, scale=1., size=None):
        return self.generator.normal(0., scale, size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def __repr__(self):
        return 'RngStream(seed={}, stream_id={})'.format(self.seed,
                                                         self.stream_id)


class OuParams(namedtuple('OuParams', ['chi', 'q_omega', 'omega_bar'])):
    __slots__ = ()

    def __new__(cls, chi, q_omega, omega_bar=0.):
        check_positive('chi', chi, strict=False)
        check_positive('q_omega', q_omega, strict=False)
        return super(OuParams, cls).__new__(cls, float(chi), float(q_omega),
                                            float(omega_bar))


class VdpParams(namedtuple('VdpParams', ['p', 'k', 'm', 'c', 'T', 'nu0',
                                         'omega0', 'upsilon0', 'q_omega'])):
    """Filtered Van der Pol oscillator.

    q_omega is the strength of the white noise superimposed on the sensed
    frequency; it does not enter the clean waveform.
    """
    __slots__ = ()

    def __new__(cls, p, k, m, c, T, nu0=0., omega0=0., upsilon0=0.,
                q_omega=0.):
        for name, value in zip('pkmcT', (p, k, m, c, T)):
            check_positive(name, value)
        check_positive('q_omega', q_omega, strict=False)
        return super(VdpParams, cls).__new__(
            cls, float(p), float(k), float(m), float(c), float(T),
            float(nu0), float(omega0), float(upsilon0), float(q_omega))


class SignalState(namedtuple('SignalState', ['variant', 'omega', 'nu',
                                             'upsilon'])):
    __slots__ = ()

    def __new__(cls, variant, omega, nu=0., upsilon=0.):
        if variant not in SIGNAL_VARIANTS:
            raise ValueError("Signal variant must be one of {}; it is {}."
                             .format(SIGNAL_VARIANTS, variant))
        return super(SignalState, cls).__new__(cls, variant, float(omega),
                                               float(nu), float(upsilon))

    def vdp_vector(self):
        return np.array([self.nu, self.omega, self.upsilon])


DiscreteModel = namedtuple('DiscreteModel', ['A', 'B', 'G', 'H', 'Q', 'R'])


def wiener_increment(rng, dt, size=None):
    if not dt > 0:
        raise ValueError("dt must be > 0; it is {}.".format(dt))
    return rng.normal(np.sqrt(dt), size)


def euler_maruyama_step(x, drift, diffusion, dt, dW):
    """x' = x + drift(x) dt + diffusion(x) dW.

    diffusion may return a vector (diagonal noise, one increment per
    component) or a matrix with one column per Wiener channel.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(drift(x), dtype=float)
    b = np.asarray(diffusion(x), dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NumericalError("Non-finite drift or diffusion.",
                             state=x.tolist(), drift=a.tolist(),
                             diffusion=b.tolist())
    if b.ndim == 2:
        noise = b @ np.atleast_1d(dW)
    else:
        noise = b * dW
    return x + a * dt + noise


def ou_moments(t, x0, params):
    """Mean and variance of an OU process started at x0."""
    decay = np.exp(-params.chi * t)
    mean = params.omega_bar + (x0 - params.omega_bar) * decay
    if params.chi == 0:
        return mean, params.q_omega * t
    var = -params.q_omega / (2. * params.chi) * np.expm1(-2. * params.chi * t)
    return mean, var


def ou_step(omega, params, dt, rng):
    """Exact one-step OU transition; exact for any dt and for chi = 0."""
    if not dt > 0:
        raise ValueError("dt must be > 0; it is {}.".format(dt))
    mean, var = ou_moments(dt, omega, params)
    return mean + np.sqrt(var) * rng.standard_normal()


def ou_average_variance(t, params):
    """Variance of the time average of a zero-mean stationary-start OU path."""
    chi, q = params.chi, params.q_omega
    x = chi * t
    if x < 1e-4:
        return q * t * (1. / 3. - x / 4. + 7. * x ** 2 / 60.)
    return q / (2. * chi ** 3 * t ** 2) * (
        4. * np.exp(-x) + 2. * x - np.exp(-2. * x) - 3.)


def vdp_drift(x, params):
    nu, omega, upsilon = x
    return np.array([
        -params.p * omega,
        params.k / params.m * nu
        + 2. * params.c / params.m * (1. - upsilon) * omega,
        (abs(nu) - nu) / (2. * params.T) - upsilon / params.T,
    ])


def vdp_jacobian(x, params):
    nu, omega, upsilon = x
    # d|nu|/dnu taken as sign(nu), zero at the kink
    return np.array([
        [0., -params.p, 0.],
        [params.k / params.m, 2. * params.c * (1. - upsilon) / params.m,
         -2. * params.c * omega / params.m],
        [(np.sign(nu) - 1.) / (2. * params.T), 0., -1. / params.T],
    ])


def vdp_step(s, params, dt):
    if s.variant != 'vdp':
        raise ValueError("vdp_step needs a vdp signal; it is {}."
                         .format(s.variant))
    if not dt > 0:
        raise ValueError("dt must be > 0; it is {}.".format(dt))
    nu, omega, upsilon = s.vdp_vector() + vdp_drift(s.vdp_vector(),
                                                    params) * dt
    return SignalState('vdp', omega, nu, upsilon)


def initial_signal(variant, omega0, vdp=None):
    if variant == 'vdp':
        return SignalState('vdp', vdp.omega0, vdp.nu0, vdp.upsilon0)
    return SignalState(variant, omega0)


def signal_step(s, params, dt, rng):
    """Advance the true signal by dt.

    Returns the new state and the frequency sensed over the step (left
    point). For the Van der Pol waveform the sensed frequency carries the
    superimposed white noise, so that the sensed rotation over the step is
    omega dt + sqrt(q_omega) dW_omega.
    """
    if s.variant == 'constant':
        return s, s.omega
    if s.variant == 'ou':
        return s._replace(omega=ou_step(s.omega, params, dt, rng)), s.omega
    sensed = s.omega
    if params.q_omega > 0:
        sensed += np.sqrt(params.q_omega) * wiener_increment(rng, dt) / dt
    return vdp_step(s, params, dt), sensed


def lg_discretize(F, B, G, H, Q, R, dt):
    """Zero-order-hold discretization of a continuous linear-Gaussian model.

    A = I + F dt, B_k = B dt, G_k = G dt, H_k = H, Q_k = Q / dt, R_k = R / dt.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0; it is {}.".format(dt))
    F, G, H = np.atleast_2d(F), np.atleast_2d(G), np.atleast_2d(H)
    Q, R = np.atleast_2d(Q), np.atleast_2d(R)
    n = F.shape[0]
    check_square('F', F)
    if G.shape[0] != n or Q.shape != (G.shape[1], G.shape[1]):
        raise ValueError("G {} and Q {} do not match F {}."
                         .format(G.shape, Q.shape, F.shape))
    if H.shape[1] != n or R.shape != (H.shape[0], H.shape[0]):
        raise ValueError("H {} and R {} do not match F {}."
                         .format(H.shape, R.shape, F.shape))
    if B is not None:
        B = np.atleast_2d(B)
        if B.shape[0] != n:
            B = B.T
        if B.shape[0] != n:
            raise ValueError("B must have {} rows; it has shape {}."
                             .format(n, B.shape))
        B = B * dt
    return DiscreteModel(np.eye(n) + F * dt, B, G * dt, H, Q / dt, R / dt)
