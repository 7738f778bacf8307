"""
Invariant suite behind the `validate` command.

Each check returns a CheckResult; `validate` runs them all, prints a line per
check and stores the outcome through the Reporter. The fast checks always
run. The ensemble checks reproduce the tracking acceptance figures on
reduced ensembles and take minutes.
"""

from collections import namedtuple

import numpy as np
from scipy.integrate import solve_ivp

from .bounds import BoundParams, cs_limit, cs_limit_static, cs_recursion, \
    cs_recursion_closed_form, kf_amse_noiseless, kf_ss_error
from .cog import lg_model, vy_exact
from .engine import compare_engines, coverage, run_ensemble, run_trajectory
from .filters import EkfModel, ekf_drift, ekf_jacobians_ou, \
    ekf_jacobians_vdp, integrate_riccati, lg_filter_init, lg_filter_step, \
    nees, nees_interval
from .outputs import steady_value
from .sme import SensorParams
from .spin import squeezing_db
from .stochastic import OuParams, RngStream, VdpParams, wiener_increment
from .util import NumericalError

__all__ = ['CheckResult', 'check_kalman_closed_form', 'check_steady_state',
           'check_quantum_limits', 'check_recursion', 'check_vy_exact',
           'check_jacobians', 'check_trajectory_invariants', 'check_nees',
           'check_cog_vs_sme', 'check_constant_tracking', 'check_ou_tracking',
           'check_vdp_coverage', 'CHECKS', 'ENSEMBLE_CHECKS', 'validate']

CheckResult = namedtuple('CheckResult', ['name', 'passed', 'error',
                                         'tolerance'])


def _relative(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.abs(b)))


def check_kalman_closed_form(N_values=(1e3, 1e6, 1e9), M=1., sigma0=0.5,
                             tol=1e-6):
    worst = 0.
    ou = OuParams(0., 0.)
    for N in N_values:
        p = SensorParams(N, M)
        t = np.linspace(1e-3 / M, 1. / M, 50)
        grid = np.concatenate([[0.], t])
        sigma = integrate_riccati(lambda s: lg_model(s, p, ou),
                                  np.diag([0., sigma0 ** 2]), grid)
        worst = max(worst, _relative(sigma[1:, 1, 1],
                                     kf_amse_noiseless(t, N, M, 1., sigma0)))
    return CheckResult('kalman_closed_form', worst <= tol, worst, tol)


def check_steady_state(N_values=(1e5, 1e9), M=1e5, q_omega=1e14,
                       kappa_coll=0.1, tol=5e-3):
    worst = 0.
    ou = OuParams(0., q_omega)
    for N in N_values:
        p = SensorParams(N, M, 1., kappa_coll)
        t_end = 50. * (4. / (N ** 2 * M * q_omega)) ** 0.25 \
            + 50. * np.sqrt(kappa_coll / q_omega)
        sigma = integrate_riccati(lambda s: lg_model(s, p, ou, steady=True),
                                  np.diag([0., 1e8]), [0., t_end],
                                  progress=True)
        expected = kf_ss_error(N, M, 1., q_omega, kappa_coll)
        worst = max(worst, _relative(sigma[-1, 1, 1], expected))
    return CheckResult('steady_state', worst <= tol, worst, tol)


def check_quantum_limits():
    """Steady bound for the realistic OU setting with and without
    collective dephasing."""
    cases = [(BoundParams(1e4, 0., 100., 1e13), 0.021),
             (BoundParams(1e4, 1e-6, 100., 1e13), 0.32)]
    worst = 0.
    for bp, expected in cases:
        value = np.sqrt(cs_limit(np.inf, bp))
        rounded = float('{:.2g}'.format(value))
        worst = max(worst, abs(rounded - expected) / expected)
    return CheckResult('quantum_limits', worst == 0., worst, 0.)


def check_recursion(sets=20, seed=0, tol=1e-3, closed_tol=1e-12):
    rng = np.random.default_rng(seed)
    worst, worst_closed = 0., 0.
    for _ in range(sets):
        bp = BoundParams(10. ** rng.uniform(0, 4), 10. ** rng.uniform(-3, 0),
                         0., 1e6, 10. ** rng.uniform(-1, 1))
        t_ss = np.sqrt(bp.kappa_Q / bp.q_omega)
        dt = 1e-4 * t_ss
        k = 20000
        v = cs_recursion(k, dt, bp)
        worst = max(worst, _relative(v, cs_limit(k * dt, bp)))
        worst_closed = max(worst_closed,
                           _relative(cs_recursion_closed_form(k, dt, bp), v))
    passed = worst <= tol and worst_closed <= closed_tol
    return CheckResult('recursion', passed, max(worst, worst_closed), tol)


def check_vy_exact(tol=1e-4):
    worst = 0.
    for M, kc in ((0.1, 0.005), (0.005, 0.1)):
        p = SensorParams(100, M, 1., kc)
        J = p.J
        t_end = 1. / (M + kc)

        def rhs(t, v):
            return -4. * M * v ** 2 + kc * J ** 2 * np.exp(-(M + kc) * t)

        t = np.linspace(0., t_end, 200)
        sol = solve_ivp(rhs, (0., t_end), [J / 2.], method='Radau',
                        t_eval=t, rtol=1e-12, atol=1e-12)
        worst = max(worst, _relative(vy_exact(t, p), sol.y[0]))
    return CheckResult('vy_exact', worst <= tol, worst, tol)


def _finite_difference(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    columns = []
    for i in range(len(x)):
        step = h * max(1., abs(x[i]))
        e = np.zeros_like(x)
        e[i] = step
        columns.append((f(x + e) - f(x - e)) / (2. * step))
    return np.array(columns).T


def check_jacobians(states=100, seed=0, tol=1e-6):
    rng = np.random.default_rng(seed)
    p = SensorParams(100, 0.05, 0.8, 0.005, 0.01)
    ou = EkfModel('ou', OuParams(0.01, 1e-2, 0.3))
    vdp = EkfModel('vdp', VdpParams(1e3, 1., 0.00098, 1., 0.003))
    worst = 0.
    for _ in range(states):
        spin = np.concatenate([rng.uniform(1., 5., 2),
                               rng.uniform(0.1, 1., 4)])
        u = rng.normal()
        for model, jacobians, tail in (
                (ou, ekf_jacobians_ou, rng.normal(size=1)),
                (vdp, ekf_jacobians_vdp,
                 np.array([rng.uniform(0.1, 1.) * rng.choice([-1., 1.]),
                           rng.normal(), rng.normal()]))):
            x = np.concatenate([spin, tail])
            F = jacobians(x, u, p, model.params)[0]
            F_fd = _finite_difference(lambda v: ekf_drift(v, u, p, model), x)
            worst = max(worst, float(np.max(np.abs(F - F_fd))
                                     / np.max(np.abs(F))))
    return CheckResult('jacobians', worst <= tol, worst, tol)


def _scenario(doc):
    from .config import build_scenario
    return build_scenario(doc)


def check_trajectory_invariants(cfg=None, steps=1000):
    """Closed-loop run with density-matrix validity checked at every step."""
    if cfg is None:
        cfg = _scenario({
            'engine': 'sme',
            'sensor': {'N': 50, 'M': 0.05, 'kappa_coll': 0.005},
            'signal': {'variant': 'constant', 'omega0': 1.},
            'grid': {'dt': 0.02, 'T': 0.02 * steps},
            'ensemble': {'size': 2},
        })
    try:
        run_trajectory(cfg, 0, check_every=1)
    except NumericalError as e:
        print("Invariant violated: {}".format(e))
        return CheckResult('trajectory_invariants', False, 1., 0.)
    return CheckResult('trajectory_invariants', True, 0., 0.)


def _cog_vs_sme_doc(engine, size, T):
    return {
        'name': 'cog_vs_sme_{}'.format(engine),
        'engine': engine,
        'sensor': {'N': 50, 'M': 0.05, 'kappa_coll': 0.005},
        'signal': {'variant': 'constant', 'omega0': 1.},
        'grid': {'dt': 0.01, 'T': T, 'record_every': 10},
        'ensemble': {'size': size},
    }


def check_cog_vs_sme(size=200, tol=0.02, workers=1):
    """Mean relative omega_hat discrepancy between paired CoG and SME
    ensembles up to t = 1 / (M + kappa_c)."""
    T = 1. / (0.05 + 0.005)
    summaries = [run_ensemble(_scenario(_cog_vs_sme_doc(engine, size, T)),
                              workers=workers, progress=False)
                 for engine in ('cog', 'sme')]
    diff = compare_engines(*summaries)
    worst = float(diff['omega_hat'].max())
    return CheckResult('cog_vs_sme', worst <= tol, worst, tol)


def check_constant_tracking(size=200, N=50, T=10., factor=1.5, workers=1):
    """SME tracking of a constant field: over the middle half of the run the
    aMSE stays within factor of the static bound, and conditional squeezing
    appears."""
    cfg = _scenario({
        'name': 'constant_tracking',
        'engine': 'sme',
        'sensor': {'N': N, 'M': 0.3, 'kappa_coll': 0.02},
        'signal': {'variant': 'constant', 'omega0': 1.},
        'grid': {'T': T, 'record_every': 25},
        'ensemble': {'size': size},
    })
    frame = run_ensemble(cfg, workers=workers, progress=False).frame
    t = frame['t'].to_numpy()
    mid = (t >= T / 4.) & (t <= 3. * T / 4.)
    bound = cs_limit_static(t[mid], BoundParams(0., 0.02, 0., N, 0.5))
    ratio = float(np.mean(frame['amse'].to_numpy()[mid] / bound))
    error = max(ratio, 1. / ratio)
    passed = error <= factor and np.nanmin(frame['xi2_cond']) < 1.
    return CheckResult('constant_tracking', bool(passed), error, factor)


def check_ou_tracking(size=100, T=0.005, interval=(0.15, 0.30),
                      min_db=10., workers=1):
    """Realistic OU field on the CoG engine: steady root aMSE inside
    interval and peak conditional squeezing of at least min_db."""
    cfg = _scenario({
        'name': 'ou_tracking',
        'engine': 'cog',
        'sensor': {'N': 1e13, 'M': 1e-8, 'kappa_coll': 0.,
                   'kappa_loc': 100.},
        'signal': {'variant': 'ou', 'omega0': 1e4, 'draw_from_prior': True,
                   'ou': {'chi': 0.01, 'q_omega': 1e4, 'omega_bar': 1e4}},
        'prior': {'mu0': 1e4, 'sigma0': 707.1},
        'grid': {'T': T, 'record_every': 10},
        'ensemble': {'size': size},
    })
    frame = run_ensemble(cfg, workers=workers, progress=False).frame
    error = float(np.sqrt(steady_value(frame, 'amse', fraction=0.5)))
    peak = float(squeezing_db(np.nanmin(frame['xi2_cond'])))
    print("ou_tracking: steady error {:.3g} rad/s, peak squeezing {:.3g} dB"
          .format(error, peak))
    passed = interval[0] <= error <= interval[1] and peak >= min_db
    return CheckResult('ou_tracking', bool(passed), error, interval[1])


def check_vdp_coverage(size=100, T=0.022, t_min=0.02, k=3., level=0.95,
                       workers=1):
    """Fraction of VdP samples within k sqrt(aMSE) after one cycle."""
    cfg = _scenario({
        'name': 'vdp_coverage',
        'engine': 'cog',
        'sensor': {'N': 1e13, 'M': 1e-8, 'kappa_coll': 0.,
                   'kappa_loc': 100.},
        'signal': {'variant': 'vdp'},
        'prior': {'sigma0': 0.01},
        'estimator': {'kind': 'ekf', 'sigma_nu': 0.01,
                      'sigma_upsilon': 0.01},
        'grid': {'T': T, 'record_every': 50},
        'ensemble': {'size': size},
    })
    summary = run_ensemble(cfg, workers=workers, progress=False)
    value = coverage(summary, k=k, t_min=t_min)
    return CheckResult('vdp_coverage', value >= level, value, level)


def check_nees(runs=500, seed=0, T=1., dt=0.005, skip=0.2, level=0.95):
    """Run-averaged NEES of the (<Jy>, omega) filter on paths drawn from its
    own linear-Gaussian model, averaged over t >= skip * T."""
    p = SensorParams(1000, 0.01, 1., 1e-4)
    ou = OuParams(0.1, 1e-4)
    sigma0 = 0.01
    n_steps = int(round(T / dt))
    start = int(np.ceil(skip * n_steps))
    total = np.zeros(n_steps - start)
    for run in range(runs):
        rng = RngStream(seed, run)
        x = np.array([0., sigma0 * rng.standard_normal()])
        fs = lg_filter_init(0., sigma0)
        for k in range(n_steps):
            t = k * dt
            model = lg_model(t, p, ou)
            dW = wiener_increment(rng, dt, size=2)
            # the record shares dW[0] with the <Jy> noise
            dy = float(model.H[0] @ x) * dt + np.sqrt(p.eta) * dW[0]
            x = x + model.F @ x * dt + model.G @ dW
            fs = lg_filter_step(fs, dy, t, dt, p, ou)
            if k >= start:
                total[k - start] += nees(x, fs.x_hat, fs.sigma)
    value = float(np.mean(total / runs))
    low, high = nees_interval(2, runs, level)
    error = max(low - value, value - high, 0.)
    return CheckResult('nees', bool(low <= value <= high), error, high - low)


CHECKS = [check_jacobians, check_quantum_limits, check_recursion,
          check_vy_exact, check_kalman_closed_form, check_steady_state,
          check_trajectory_invariants]
ENSEMBLE_CHECKS = [check_nees, check_cog_vs_sme, check_constant_tracking,
                   check_ou_tracking, check_vdp_coverage]


def validate(cfg=None, reporter=None, reporter_log_root=None,
             ensemble=False, workers=1):
    """Run every fast check, and with ensemble also the ensemble checks;
    with cfg also replay one of its trajectories under per-step validity
    checks. Returns True when all pass."""
    results = [check() for check in CHECKS]
    if cfg is not None:
        result = check_trajectory_invariants(cfg)
        results.append(result._replace(name='scenario_invariants'))
    if ensemble:
        results.append(check_nees())
        results.extend(check(workers=workers)
                       for check in ENSEMBLE_CHECKS[1:])
    for r in results:
        print("{:<24s} {} (error {:.3g}, tolerance {:.3g})".format(
            r.name, 'PASS' if r.passed else 'FAIL', r.error, r.tolerance))
    if reporter is not None:
        report = reporter(reporter_log_root, 'validate')
        for r in results:
            report.add(r.name, {'passed': bool(r.passed),
                                'error': float(r.error),
                                'tolerance': float(r.tolerance)})
        report.write()
    return all(r.passed for r in results)
