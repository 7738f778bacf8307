"""
Closed-loop trajectories and ensembles.

Per grid step: advance the true signal, advance the atoms with a fresh dW
(which also yields the photocurrent increment dy), feed dy to the estimator,
then compute the control that acts during the next step.
"""

import itertools
import multiprocessing as mp
import warnings
from collections import namedtuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .bounds import BoundParams, bound_curve
from .cog import cog_measurement, cog_step, css_moments
from .control import default_weights, field_compensation, lqr_control, \
    lqr_gain, LqrWeights, saturate
from .filters import OMEGA_INDEX, EkfModel, ekf_init, ekf_step, \
    lg_filter_init, lg_filter_step
from .sme import SensorParams, css_x_full, full_hilbert_operators, \
    moments_full, sme_step, sme_step_full_hilbert, unconditional_average
from .spin import build_collective_operators, css_x, moments, \
    squeezing_wineland
from .stochastic import OuParams, RngStream, VdpParams, initial_signal, \
    signal_step, wiener_increment
from .util import ConfigError, NumericalError

__all__ = ['TRAJECTORY_COLUMNS', 'ENSEMBLE_COLUMNS', 'TrajectoryRecord',
           'EnsembleSummary', 'sensor_params', 'signal_params',
           'estimator_model', 'scenario_bound', 'run_trajectory',
           'run_ensemble', 'summarize', 'compare_engines', 'coverage']

TRAJECTORY_COLUMNS = ['t', 'dy', 'mean_jx', 'mean_jy', 'mean_jz', 'var_x',
                      'var_y', 'var_z', 'cov_xy', 'xi2', 'xi2_hat',
                      'omega_true', 'omega_hat', 'sigma_oo', 'u']
ENSEMBLE_COLUMNS = ['t', 'omega_true', 'omega_hat', 'amse', 'sigma_oo',
                    'xi2_cond', 'xi2_uncond', 'jx_mean']
CHECK_EVERY = 100

TrajectoryRecord = namedtuple('TrajectoryRecord',
                              ['stream_id', 'frame', 'states', 'clamps'])
EnsembleSummary = namedtuple('EnsembleSummary',
                             ['frame', 'trajectories', 'bound', 'states',
                              'counters'])


def sensor_params(cfg):
    return SensorParams(**cfg.sensor)


def signal_params(cfg):
    if cfg.signal.variant == 'vdp':
        return VdpParams(**cfg.signal.vdp)
    if cfg.signal.variant == 'ou':
        return OuParams(**cfg.signal.ou)
    return None


def estimator_model(cfg):
    """Signal model assumed by the estimator (the truth unless a mismatch
    is configured). A constant field is an OU process with chi = q = 0."""
    if cfg.signal.variant == 'vdp':
        return EkfModel('vdp', VdpParams(**cfg.signal.vdp))
    if cfg.estimator.mismatch:
        return EkfModel('ou', OuParams(**cfg.estimator.mismatch))
    if cfg.signal.variant == 'ou':
        return EkfModel('ou', OuParams(**cfg.signal.ou))
    return EkfModel('ou', OuParams(0., 0.))


def _flatten(m):
    return (m.mean[0], m.mean[1], m.mean[2], m.cov[0, 0], m.cov[1, 1],
            m.cov[2, 2], m.cov[0, 1])


class CogEngine(object):
    def __init__(self, p, signal):
        self.p = p
        self.x = css_moments(p.N, signal)

    @property
    def clamps(self):
        return self.x.clamps

    def step(self, omega, u, dt, dW, check=False):
        dy = cog_measurement(self.x, dt, dW, self.p)
        self.x = cog_step(self.x, u, dt, dW, 0., self.p, omega=omega)
        return dy

    def moments(self):
        x = self.x
        return (x.mean_jx, x.mean_jy, 0., x.var_x, x.var_y, x.var_z,
                x.cov_xy)

    def density(self):
        return None


class SmeEngine(object):
    """Symmetric-subspace density matrix."""
    clamps = 0

    def __init__(self, p):
        self.p = p
        self.ops = build_collective_operators(int(p.N))
        self.state = css_x(int(p.N))
        self._moments = moments(self.state, self.ops)

    def step(self, omega, u, dt, dW, check=False):
        self.state, record = sme_step(self.state, omega, u, dt, dW, self.p,
                                      ops=self.ops, check=check)
        self._moments = record.moments
        return record.dy

    def moments(self):
        return _flatten(self._moments)

    def density(self):
        return self.state.rho


class FullHilbertEngine(object):
    clamps = 0

    def __init__(self, p):
        self.p = p
        self.ops = full_hilbert_operators(int(p.N))
        self.rho = css_x_full(int(p.N))
        self._moments = moments_full(self.rho, self.ops)

    def step(self, omega, u, dt, dW, check=False):
        self.rho, record = sme_step_full_hilbert(self.rho, omega, u, dt, dW,
                                                 self.p, ops=self.ops,
                                                 check=check)
        self._moments = record.moments
        return record.dy

    def moments(self):
        return _flatten(self._moments)

    def density(self):
        return self.rho


class EkfEstimator(object):
    def __init__(self, p, model, prior, sigma_nu=0., sigma_upsilon=0.):
        self.p = p
        self.model = model
        self.index = OMEGA_INDEX[model.variant]
        mu0 = prior.mu0 if model.variant == 'ou' else model.params.omega0
        self.fs = ekf_init(p, mu0, prior.sigma0, model, sigma_nu,
                           sigma_upsilon)

    def update(self, dy, t, dt, u):
        self.fs = ekf_step(self.fs, dy, dt, u, self.p, self.model)

    def estimate(self):
        x = self.fs.x_hat
        return (np.sqrt(self.p.N) * x[1], x[self.index],
                self.fs.sigma[self.index, self.index])

    def xi2(self):
        x = self.fs.x_hat
        return self.p.N * x[3] / x[0] ** 2 if x[0] != 0 else np.nan


class KfEstimator(object):
    """Two-state filter of the linear-Gaussian regime."""

    def __init__(self, p, ou, prior):
        self.p = p
        self.ou = ou
        self.fs = lg_filter_init(prior.mu0, prior.sigma0)

    def update(self, dy, t, dt, u):
        self.fs = lg_filter_step(self.fs, dy, t, dt, self.p, self.ou, u)

    def estimate(self):
        return self.fs.x_hat[0], self.fs.x_hat[1], self.fs.sigma[1, 1]

    def xi2(self):
        return np.nan


class NoEstimator(object):
    def update(self, dy, t, dt, u):
        pass

    def estimate(self):
        return 0., np.nan, np.nan

    def xi2(self):
        return np.nan


def _make_engine(cfg, p, signal):
    if cfg.engine == 'cog':
        return CogEngine(p, signal)
    if cfg.engine == 'sme':
        return SmeEngine(p)
    return FullHilbertEngine(p)


def _make_estimator(cfg, p):
    kind = cfg.estimator.kind
    if kind == 'none':
        return NoEstimator()
    model = estimator_model(cfg)
    if kind == 'kf':
        if model.params.omega_bar != 0:
            warnings.warn("The linear-Gaussian filter assumes a zero-mean "
                          "signal; omega_bar is ignored.")
        return KfEstimator(p, model.params, cfg.prior)
    return EkfEstimator(p, model, cfg.prior, cfg.estimator.sigma_nu,
                        cfg.estimator.sigma_upsilon)


def _control_gain(cfg, p):
    """Gain row (g_y, g_omega) of the LQR law for the estimator's model."""
    ctrl = cfg.controller
    if ctrl.lam is not None:
        weights = LqrWeights(float(ctrl.lam) ** 2)
    elif ctrl.p_J is not None:
        weights = LqrWeights(ctrl.p_J, nu=ctrl.nu)
    else:
        weights = default_weights(p.J)
    model = estimator_model(cfg)
    chi = model.params.chi if model.variant == 'ou' else 0.
    return lqr_gain(weights, p.J, chi)


def _control(kind, estimate, gain, u_max):
    if kind == 'none':
        return 0.
    x_hat = estimate[:2]
    if kind == 'compensation':
        return saturate(field_compensation(x_hat), u_max)
    return saturate(lqr_control(x_hat, gain[0], omega_gain=gain[1]), u_max)


def _row(t, dy, engine, estimator, signal, u, N):
    jx, jy, jz, vx, vy, vz, cxy = engine.moments()
    xi2 = squeezing_wineland(vy, jx, N) if jx != 0 else np.nan
    _, omega_hat, sigma_oo = estimator.estimate()
    return [t, dy, jx, jy, jz, vx, vy, vz, cxy, xi2, estimator.xi2(),
            signal.omega, omega_hat, sigma_oo, u]


def run_trajectory(cfg, stream_id, check_every=CHECK_EVERY):
    """One closed-loop trajectory on the stream (cfg.seed, stream_id).

    Returns a TrajectoryRecord whose frame holds TRAJECTORY_COLUMNS at the
    recorded grid points; dy is summed over each record interval.
    """
    rng = RngStream(cfg.seed, stream_id)
    p = sensor_params(cfg)
    sig_params = signal_params(cfg)
    dt = float(cfg.grid.dt)
    n_steps = int(round(cfg.grid.T / dt))
    every = int(cfg.grid.record_every)

    omega0 = cfg.signal.omega0
    if cfg.signal.draw_from_prior and cfg.signal.variant != 'vdp':
        omega0 = cfg.prior.mu0 + cfg.prior.sigma0 * rng.standard_normal()
    signal = initial_signal(cfg.signal.variant, omega0, sig_params)
    engine = _make_engine(cfg, p, signal)
    estimator = _make_estimator(cfg, p)
    kind = cfg.controller.kind
    gain = _control_gain(cfg, p)
    u_max = cfg.controller.u_max
    wigner_steps = {int(round(t / dt)) for t in cfg.output.wigner_times}

    rows = [_row(0., 0., engine, estimator, signal, 0., p.N)]
    states = {0: engine.density()} if 0 in wigner_steps else {}
    u, dy_sum = 0., 0.
    for k in range(n_steps):
        try:
            signal, sensed = signal_step(signal, sig_params, dt, rng)
            dW = wiener_increment(rng, dt)
            check = (k + 1) % check_every == 0 or k + 1 == n_steps
            dy = engine.step(sensed, u, dt, dW, check=check)
            estimator.update(dy, k * dt, dt, u)
            u_applied = u
            u = _control(kind, estimator.estimate(), gain, u_max)
        except NumericalError as e:
            e.diagnostics.update(step=k, stream_id=stream_id, seed=cfg.seed)
            raise
        dy_sum += dy
        if (k + 1) % every == 0 or k + 1 == n_steps:
            rows.append(_row((k + 1) * dt, dy_sum, engine, estimator, signal,
                             u_applied, p.N))
            dy_sum = 0.
        if k + 1 in wigner_steps:
            states[k + 1] = engine.density()
    if engine.clamps:
        warnings.warn("Stream {}: {} negative variances clamped."
                      .format(stream_id, engine.clamps))
    frame = pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)
    return TrajectoryRecord(stream_id, frame, states, engine.clamps)


def _run_stream(job):
    cfg, stream_id = job
    return run_trajectory(cfg, stream_id)


def run_ensemble(cfg, workers=1, progress=True):
    """Run cfg.ensemble.size trajectories and reduce them in stream order."""
    size = int(cfg.ensemble.size)
    if size < 2:
        raise ConfigError("ensemble.size must be >= 2; it is {}."
                          .format(size))
    jobs = zip(itertools.repeat(cfg), range(size))
    if workers > 1:
        with mp.Pool(workers) as pool:
            # imap keeps stream order
            records = list(tqdm(pool.imap(_run_stream, jobs), total=size,
                                desc='Trajectories', disable=not progress))
    else:
        records = [_run_stream(job) for job in tqdm(
            jobs, total=size, desc='Trajectories', disable=not progress)]
    return summarize(records, cfg)


def _stack(frames, column):
    return np.stack([f[column].to_numpy(dtype=float) for f in frames])


def scenario_bound(cfg, t):
    if cfg.signal.variant == 'vdp':
        return None
    p = sensor_params(cfg)
    ou = signal_params(cfg) if cfg.signal.variant == 'ou' \
        else OuParams(0., 0.)
    bp = BoundParams(ou.q_omega, p.kappa_coll, p.kappa_loc, p.N,
                     cfg.prior.sigma0, ou.chi)
    if bp.kappa_Q == 0:
        return None
    return bound_curve(t[t > 0], bp)


def summarize(records, cfg):
    frames = [r.frame for r in records]
    state_seqs = None
    if records[0].states and all(s is not None
                                 for s in records[0].states.values()):
        state_seqs = [[r.states[k] for k in sorted(r.states)]
                      for r in records]
    mean, avg_states = unconditional_average(frames, state_seqs)
    err2 = (_stack(frames, 'omega_true') - _stack(frames, 'omega_hat')) ** 2
    spread_jy = _stack(frames, 'mean_jy').var(axis=0)
    N = cfg.sensor.N
    # law of total variance: unconditional Vy = E[Vy|y] + Var(<Jy>|y)
    xi2_uncond = N * (mean['var_y'] + spread_jy) / mean['mean_jx'] ** 2
    frame = pd.DataFrame({
        't': mean['t'],
        'omega_true': mean['omega_true'],
        'omega_hat': mean['omega_hat'],
        'amse': err2.mean(axis=0),
        'sigma_oo': mean['sigma_oo'],
        'xi2_cond': mean['xi2'],
        'xi2_uncond': xi2_uncond,
        'jx_mean': mean['mean_jx'],
    }, columns=ENSEMBLE_COLUMNS)
    states = {}
    if avg_states is not None:
        dt = float(cfg.grid.dt)
        steps = sorted(records[0].states)
        states = {k * dt: rho for k, rho in zip(steps, avg_states)}
    counters = {'trajectories': len(records),
                'clamps': int(sum(r.clamps for r in records))}
    return EnsembleSummary(frame, frames,
                           scenario_bound(cfg, frame['t'].to_numpy()),
                           states, counters)


def compare_engines(summary_a, summary_b, columns=('omega_hat', 'mean_jx',
                                                   'mean_jy', 'var_y')):
    """Relative discrepancies E|a - b| / E|a| per recorded time, on paired
    trajectories that share streams."""
    fa, fb = summary_a.trajectories, summary_b.trajectories
    if len(fa) != len(fb):
        raise ValueError("Summaries hold {} and {} trajectories."
                         .format(len(fa), len(fb)))
    t = fa[0]['t'].to_numpy()
    if not np.allclose(t, fb[0]['t'].to_numpy()):
        raise ValueError("Summaries do not share a time grid.")
    out = {'t': t}
    for column in columns:
        a, b = _stack(fa, column), _stack(fb, column)
        scale = np.abs(a).mean(axis=0)
        with np.errstate(divide='ignore', invalid='ignore'):
            out[column] = np.where(scale > 0,
                                   np.abs(a - b).mean(axis=0) / scale, 0.)
    return pd.DataFrame(out)


def coverage(summary, k=3., t_min=0.):
    """Fraction of samples with |omega - omega_hat| <= k sqrt(aMSE(t))."""
    t = summary.frame['t'].to_numpy()
    amse = summary.frame['amse'].to_numpy()
    mask = (t >= t_min) & (amse > 0)
    err = np.abs(_stack(summary.trajectories, 'omega_true')
                 - _stack(summary.trajectories, 'omega_hat'))
    return float(np.mean(err[:, mask] <= k * np.sqrt(amse[mask])))
