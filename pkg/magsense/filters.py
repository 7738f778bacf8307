"""
Kalman filtering of the photocurrent record.

All continuous filters consume increments dy per grid step and integrate with
explicit Euler on the simulator grid. The extended Kalman filter runs on the
sqrt(N)-normalized CoG state augmented by the signal model.
"""

from collections import namedtuple

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.stats import chi2
from tqdm import tqdm

from .cog import lg_model, normalized_diffusion, normalized_drift
from .stochastic import vdp_drift, vdp_jacobian
from .util import NumericalError, check_covariance_validity

__all__ = ['FilterState', 'NoiseSpec', 'EkfModel', 'kf_discrete_step',
           'kb_correlated_step', 'integrate_riccati', 'lg_filter_init',
           'lg_filter_step', 'ekf_init', 'ekf_drift', 'ekf_step',
           'ekf_jacobians_ou', 'ekf_jacobians_vdp', 'nees', 'nees_interval',
           'SPIN_DIM', 'OMEGA_INDEX']

SPIN_DIM = 6
OMEGA_INDEX = {'ou': 6, 'vdp': 7}

FilterState = namedtuple('FilterState', ['x_hat', 'sigma'])
NoiseSpec = namedtuple('NoiseSpec', ['Q', 'R', 'S'])
EkfModel = namedtuple('EkfModel', ['variant', 'params'])


def _as_matrix(value):
    return np.atleast_2d(np.asarray(value, dtype=float))


def kf_discrete_step(fs, y, model, u=None):
    """Predict then update with the discrete uncorrelated Kalman filter.

    Args:
        fs: FilterState
        y: measurement vector
        model: stochastic.DiscreteModel (A, B, G, H, Q, R)
    """
    A, G, H = _as_matrix(model.A), _as_matrix(model.G), _as_matrix(model.H)
    Q, R = _as_matrix(model.Q), _as_matrix(model.R)
    x = A @ fs.x_hat
    if u is not None and model.B is not None:
        x = x + _as_matrix(model.B) @ np.atleast_1d(u)
    sigma = A @ fs.sigma @ A.T + G @ Q @ G.T
    innovation_cov = H @ sigma @ H.T + R
    try:
        gain = scipy.linalg.solve(innovation_cov, H @ sigma,
                                  assume_a='pos').T
    except (np.linalg.LinAlgError, ValueError) as err:
        raise NumericalError("Singular innovation covariance.",
                             innovation_cov=innovation_cov.tolist(),
                             reason=str(err))
    x = x + gain @ (np.atleast_1d(y) - H @ x)
    sigma, _ = check_covariance_validity(
        (np.eye(len(x)) - gain @ H) @ sigma)
    return FilterState(x, sigma)


def _correlated_gain(sigma, H, G, noise):
    R = _as_matrix(noise.R)
    cross = sigma @ H.T + G @ _as_matrix(noise.S)
    try:
        return scipy.linalg.solve(R, cross.T, assume_a='pos').T
    except (np.linalg.LinAlgError, ValueError) as err:
        raise NumericalError("Singular measurement covariance R.",
                             R=R.tolist(), reason=str(err))


def kb_correlated_step(fs, dy, F, G, H, noise, u=None, dt=None, B=None):
    """Euler step of the Kalman-Bucy filter with correlated noises.

    K = (Sigma H^T + G S) R^{-1}
    dx = (F x + B u) dt + K (dy - H x dt)
    dSigma = (F Sigma + Sigma F^T - K R K^T + G Q G^T) dt
    """
    if dt is None or not dt > 0:
        raise ValueError("dt must be > 0; it is {}.".format(dt))
    F, G, H = _as_matrix(F), _as_matrix(G), _as_matrix(H)
    x, sigma = fs.x_hat, fs.sigma
    gain = _correlated_gain(sigma, H, G, noise)
    drift = F @ x
    if u is not None and B is not None:
        drift = drift + (_as_matrix(B) @ np.atleast_1d(u)).ravel()
    x = x + drift * dt + gain @ (np.atleast_1d(dy) - H @ x * dt)
    dsigma = F @ sigma + sigma @ F.T \
        - gain @ _as_matrix(noise.R) @ gain.T \
        + G @ _as_matrix(noise.Q) @ G.T
    sigma, _ = check_covariance_validity(sigma + dsigma * dt)
    return FilterState(x, sigma)


def integrate_riccati(model_fn, sigma0, t_grid, rtol=1e-10, atol=1e-30,
                      method='Radau', progress=False):
    """Solve the correlated-noise Riccati equation on t_grid.

    model_fn(t) returns an object with F, G, H, Q, R, S. The equation is
    integrated in its decorrelated form, where the measurement noise shared
    with the process noise is absorbed into the drift. With progress, a tqdm
    bar follows the integration time.
    """
    sigma0 = _as_matrix(sigma0)
    n = sigma0.shape[0]
    t_grid = np.asarray(t_grid, dtype=float)
    bar = tqdm(total=float(t_grid[-1] - t_grid[0]), desc='Riccati',
               unit='s', disable=not progress)
    reached = [t_grid[0]]

    def rhs(t, y):
        if t > reached[0]:
            bar.update(t - reached[0])
            reached[0] = t
        m = model_fn(t)
        sigma = y.reshape(n, n)
        sigma = 0.5 * (sigma + sigma.T)
        R_inv = np.linalg.inv(_as_matrix(m.R))
        H, G, S = _as_matrix(m.H), _as_matrix(m.G), _as_matrix(m.S)
        F_dec = _as_matrix(m.F) - G @ S @ R_inv @ H
        Q_dec = G @ (_as_matrix(m.Q) - S @ R_inv @ S.T) @ G.T
        out = F_dec @ sigma + sigma @ F_dec.T + Q_dec \
            - sigma @ H.T @ R_inv @ H @ sigma
        return out.ravel()

    try:
        sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), sigma0.ravel(),
                        method=method, t_eval=t_grid, rtol=rtol, atol=atol)
    finally:
        bar.close()
    if not sol.success:
        raise NumericalError("Riccati integration failed.",
                             message=sol.message)
    out = sol.y.T.reshape(len(t_grid), n, n)
    return 0.5 * (out + out.transpose(0, 2, 1))


def lg_filter_init(mu0, sigma0):
    """Prior for the (<Jy>, omega) filter: <Jy> known to be 0."""
    return FilterState(np.array([0., float(mu0)]),
                       np.diag([0., float(sigma0) ** 2]))


def lg_filter_step(fs, dy, t, dt, p, ou, u=0.):
    model = lg_model(t, p, ou)
    return kb_correlated_step(fs, dy, model.F, model.G, model.H,
                              NoiseSpec(model.Q, model.R, model.S),
                              u=u, dt=dt, B=model.B)


def ekf_init(p, mu0, sigma0, model, sigma_nu=0., sigma_upsilon=0.):
    """Prior at the coherent spin state along +x.

    Spin block (X, Y, VX, VY, VZ, CXY) starts at (sqrt(N)/2, 0, 0, 1/4, 1/4,
    0) with zero uncertainty; the frequency carries N(mu0, sigma0^2).
    """
    spin = [np.sqrt(p.N) / 2., 0., 0., 0.25, 0.25, 0.]
    if model.variant == 'ou':
        x = np.array(spin + [mu0])
        diag = [0.] * SPIN_DIM + [sigma0 ** 2]
    elif model.variant == 'vdp':
        vdp = model.params
        x = np.array(spin + [vdp.nu0, mu0, vdp.upsilon0])
        diag = [0.] * SPIN_DIM + [sigma_nu ** 2, sigma0 ** 2,
                                  sigma_upsilon ** 2]
    else:
        raise ValueError("EKF signal model must be 'ou' or 'vdp'; it is {}."
                         .format(model.variant))
    return FilterState(x, np.diag(diag))


def ekf_drift(x_hat, u, p, model):
    """f(x, u, 0): CoG drift at the estimated frequency plus the signal
    model drift."""
    w = x_hat[OMEGA_INDEX[model.variant]] + u
    spin = normalized_drift(x_hat[:SPIN_DIM], w, p)
    if model.variant == 'ou':
        ou = model.params
        return np.append(spin, -ou.chi * (x_hat[6] - ou.omega_bar))
    return np.concatenate([spin, vdp_drift(x_hat[6:9], model.params)])


def _spin_jacobian(z, w, p):
    """d(normalized drift)/dz and its derivative with respect to omega."""
    X, Y, VX, VY, VZ, CXY = z
    N, M, eta = p.N, p.M, p.eta
    kc, kl = p.kappa_coll, p.kappa_loc
    F = np.zeros((SPIN_DIM, SPIN_DIM))
    F[0, 0] = -0.5 * (kc + 2. * kl + M)
    F[0, 1] = -w
    F[1, 0] = w
    F[1, 1] = -0.5 * (kc + 2. * kl)
    F[2, 1] = 2. * kc * Y
    F[2, 2] = -kc - 2. * kl - M
    F[2, 3] = kc
    F[2, 4] = M
    F[2, 5] = -2. * w - 8. * M * eta * N * CXY
    F[3, 0] = 2. * kc * X
    F[3, 2] = kc
    F[3, 3] = -kc - 2. * kl - 8. * eta * M * N * VY
    F[3, 5] = 2. * w
    F[4, 0] = 2. * M * X
    F[4, 2] = M
    F[4, 4] = -M
    F[5, 0] = -kc * Y
    F[5, 1] = -kc * X
    F[5, 2] = w
    F[5, 3] = -w - 4. * M * eta * N * CXY
    F[5, 5] = -2. * kc - 2. * kl - 0.5 * M * (1. + 8. * eta * N * VY)
    d_omega = np.array([-Y, X, -2. * CXY, 2. * CXY, 0., VX - VY])
    return F, d_omega


def _measurement_row(p, dim):
    H = np.zeros((1, dim))
    H[0, 1] = 2. * p.eta * np.sqrt(p.M * p.N)
    return H


def _check_finite(F, x_hat):
    if not np.all(np.isfinite(F)):
        raise NumericalError("Non-finite EKF Jacobian.",
                             x_hat=np.asarray(x_hat).tolist())


def ekf_jacobians_ou(x_hat, u, p, ou):
    """F (7x7), G (7x2) and H (1x7) for the state (X, Y, VX, VY, VZ, CXY,
    omega)."""
    x_hat = np.asarray(x_hat, dtype=float)
    spin_F, d_omega = _spin_jacobian(x_hat[:SPIN_DIM], x_hat[6] + u, p)
    F = np.zeros((7, 7))
    F[:SPIN_DIM, :SPIN_DIM] = spin_F
    F[:SPIN_DIM, 6] = d_omega
    F[6, 6] = -ou.chi
    G = np.zeros((7, 2))
    G[:SPIN_DIM, 0] = normalized_diffusion(x_hat[:SPIN_DIM], p)
    G[6, 1] = np.sqrt(ou.q_omega)
    _check_finite(F, x_hat)
    return F, G, _measurement_row(p, 7)


def ekf_jacobians_vdp(x_hat, u, p, vdp):
    """F (9x9), G (9x2) and H (1x9) for the state (X, Y, VX, VY, VZ, CXY,
    nu, omega, upsilon)."""
    x_hat = np.asarray(x_hat, dtype=float)
    spin_F, d_omega = _spin_jacobian(x_hat[:SPIN_DIM], x_hat[7] + u, p)
    F = np.zeros((9, 9))
    F[:SPIN_DIM, :SPIN_DIM] = spin_F
    F[:SPIN_DIM, 7] = d_omega
    F[6:9, 6:9] = vdp_jacobian(x_hat[6:9], vdp)
    G = np.zeros((9, 2))
    G[:SPIN_DIM, 0] = normalized_diffusion(x_hat[:SPIN_DIM], p)
    G[7, 1] = np.sqrt(vdp.q_omega)
    _check_finite(F, x_hat)
    return F, G, _measurement_row(p, 9)


def ekf_step(fs, dy, dt, u, p, model):
    if not dt > 0:
        raise ValueError("dt must be > 0; it is {}.".format(dt))
    jacobians = ekf_jacobians_ou if model.variant == 'ou' \
        else ekf_jacobians_vdp
    F, G, H = jacobians(fs.x_hat, u, p, model.params)
    noise = NoiseSpec(np.eye(2), np.array([[p.eta]]),
                      np.array([[np.sqrt(p.eta)], [0.]]))
    gain = _correlated_gain(fs.sigma, H, G, noise)
    innovation = dy - (H @ fs.x_hat)[0] * dt
    drift = ekf_drift(fs.x_hat, u, p, model)
    x = fs.x_hat + drift * dt + gain[:, 0] * innovation
    if not np.all(np.isfinite(x)):
        raise NumericalError("EKF estimate became non-finite.",
                             x_hat=fs.x_hat.tolist(), dy=dy, u=u)
    dsigma = F @ fs.sigma + fs.sigma @ F.T - p.eta * gain @ gain.T \
        + G @ G.T
    sigma, _ = check_covariance_validity(fs.sigma + dsigma * dt)
    return FilterState(x, sigma)


def nees(x, x_hat, sigma):
    """Normalized estimation error squared (x - x_hat)^T Sigma^{-1} (...)."""
    err = np.atleast_1d(np.asarray(x, dtype=float) - x_hat)
    try:
        return float(err @ scipy.linalg.solve(sigma, err, assume_a='pos'))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError("Covariance not invertible for NEES.",
                             sigma=np.asarray(sigma).tolist(), reason=str(e))


def nees_interval(dim, runs, level=0.95):
    """Two-sided chi-square interval for the run-averaged NEES."""
    dof = dim * runs
    return (chi2.ppf((1. - level) / 2., dof) / runs,
            chi2.ppf((1. + level) / 2., dof) / runs)
