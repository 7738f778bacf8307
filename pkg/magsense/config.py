import argparse
import copy
import json
import os
import shutil
import warnings
from os.path import join as ospj

import munch
import yaml

from .bounds import BoundParams
from .control import LqrWeights
from .sme import MAX_FULL_HILBERT_N, SensorParams
from .stochastic import SIGNAL_VARIANTS, OuParams, VdpParams
from .units import measurement_strength
from .util import ConfigError, Logger, Reporter, check_positive

__all__ = ['mch', 'str2bool', 'DEFAULTS', 'load_scenario', 'merge_defaults',
           'dt_guard', 'configure_dt', 'apply_probe', 'check_dependency',
           'build_scenario', 'configure_log_folder', 'configure_log',
           'configure_reporter', 'get_configs']

_ENGINES = ('cog', 'sme', 'sme-full-hilbert')
_ESTIMATORS = ('none', 'kf', 'ekf')
_CONTROLLERS = ('none', 'compensation', 'lqr')
_COMMANDS = ('run', 'bounds', 'validate')


def mch(**kwargs):
    return munch.Munch(dict(**kwargs))


def str2bool(v):
    if v.lower() in ('yes', 'true', 't', 'y', '1'):
        return True
    elif v.lower() in ('no', 'false', 'f', 'n', '0'):
        return False
    else:
        raise argparse.ArgumentTypeError('Boolean value expected.')


DEFAULTS = mch(
    name='scenario',
    engine='cog',
    sensor=mch(N=200, M=0.3, eta=1., kappa_coll=0.02, kappa_loc=0.),
    probe=None,
    signal=mch(
        variant='constant', omega0=1., draw_from_prior=False,
        ou=mch(chi=0., q_omega=0., omega_bar=0.),
        vdp=mch(p=1e3, k=1., m=0.00098, c=1., T=0.003, nu0=0.0045,
                omega0=0.0045, upsilon0=0.0045, q_omega=2.5e5)),
    prior=mch(mu0=1.5, sigma0=0.5),
    estimator=mch(kind='ekf', mismatch=None, sigma_nu=0.,
                  sigma_upsilon=0.),
    controller=mch(kind='lqr', lam=None, p_J=None, nu=1., u_max=None),
    grid=mch(dt=None, T=1., record_every=1),
    ensemble=mch(size=100),
    seed=0,
    output=mch(keep_trajectories=False, wigner_times=[], wigner_n_theta=None,
               wigner_n_phi=None),
)


def merge_defaults(doc, defaults=DEFAULTS):
    """Fill missing keys of a scenario document from the defaults tree."""
    unknown = set(doc) - set(defaults)
    if unknown:
        raise ConfigError("Unknown scenario keys: {}."
                          .format(', '.join(sorted(unknown))))
    merged = copy.deepcopy(dict(defaults))
    for key, value in doc.items():
        default = defaults.get(key)
        if isinstance(default, dict) and isinstance(value, dict):
            merged[key] = merge_defaults(value, default)
        else:
            merged[key] = value
    return munch.munchify(merged)


def load_scenario(path):
    """Parse a JSON or YAML scenario document and fill defaults."""
    if not os.path.isfile(path):
        raise ConfigError("Scenario file not found: {}".format(path))
    with open(path, 'r') as f:
        text = f.read()
    try:
        if path.endswith(('.yml', '.yaml')):
            doc = yaml.safe_load(text)
        else:
            doc = json.loads(text)
    except (ValueError, yaml.YAMLError) as e:
        raise ConfigError("Cannot parse scenario {}: {}".format(path, e))
    if not isinstance(doc, dict):
        raise ConfigError("Scenario {} must hold a mapping.".format(path))
    return merge_defaults(doc)


def dt_guard(sensor):
    """Largest admissible step: 1 / (10 (M + kc) max(1, N M / (M + kc)))."""
    rate = sensor.M + sensor.kappa_coll
    if rate == 0:
        return float('inf')
    return 1. / (10. * rate * max(1., sensor.N * sensor.M / rate))


def apply_probe(cfg):
    if not cfg.probe:
        return cfg
    probe = cfg.probe
    try:
        cfg.sensor.M = measurement_strength(
            probe.power, probe.detuning,
            **{k: probe[k] for k in ('wavelength', 'area', 'f_osc')
               if k in probe})
    except (KeyError, AttributeError, ValueError) as e:
        raise ConfigError("Invalid probe block: {}".format(e))
    return cfg


def configure_dt(cfg):
    """Derive grid.dt from the guard rule when absent and write it back."""
    guard = dt_guard(cfg.sensor)
    if cfg.grid.dt is None:
        cfg.grid.dt = min(0.5 * guard, cfg.grid.T / 10.)
    return cfg


def check_dependency(cfg):
    if cfg.engine not in _ENGINES:
        raise ConfigError("engine must be one of {}; it is {}."
                          .format(_ENGINES, cfg.engine))
    if cfg.estimator.kind not in _ESTIMATORS:
        raise ConfigError("estimator.kind must be one of {}; it is {}."
                          .format(_ESTIMATORS, cfg.estimator.kind))
    if cfg.controller.kind not in _CONTROLLERS:
        raise ConfigError("controller.kind must be one of {}; it is {}."
                          .format(_CONTROLLERS, cfg.controller.kind))
    if cfg.signal.variant not in SIGNAL_VARIANTS:
        raise ConfigError("signal.variant must be one of {}; it is {}."
                          .format(SIGNAL_VARIANTS, cfg.signal.variant))
    try:
        sensor = SensorParams(**cfg.sensor)
        OuParams(**cfg.signal.ou)
        if cfg.signal.variant == 'vdp':
            VdpParams(**cfg.signal.vdp)
        if cfg.estimator.mismatch:
            OuParams(**cfg.estimator.mismatch)
        if cfg.controller.kind == 'lqr' and cfg.controller.p_J is not None:
            LqrWeights(cfg.controller.p_J, nu=cfg.controller.nu)
        if cfg.controller.lam is not None:
            check_positive('controller.lam', cfg.controller.lam,
                           strict=False)
        BoundParams(0., sensor.kappa_coll, sensor.kappa_loc, sensor.N,
                    cfg.prior.sigma0)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e))
    if cfg.engine != 'cog' and int(sensor.N) != sensor.N:
        raise ConfigError("Density-matrix engines need an integer N; "
                          "it is {}.".format(sensor.N))
    if cfg.engine == 'sme' and sensor.kappa_loc != 0:
        raise ConfigError("engine=sme needs kappa_loc = 0; use "
                          "sme-full-hilbert for local dephasing.")
    if cfg.engine == 'sme-full-hilbert' and sensor.N > MAX_FULL_HILBERT_N:
        raise ConfigError("engine=sme-full-hilbert needs N <= {}; it is {}."
                          .format(MAX_FULL_HILBERT_N, sensor.N))
    if cfg.output.wigner_times and cfg.engine != 'sme':
        raise ConfigError("output.wigner_times needs engine=sme; it is {}."
                          .format(cfg.engine))
    if any(not 0 <= t <= cfg.grid.T for t in cfg.output.wigner_times):
        raise ConfigError("output.wigner_times must lie in [0, grid.T].")
    if cfg.estimator.kind == 'kf' and cfg.signal.variant == 'vdp':
        raise ConfigError("The linear-Gaussian filter cannot track a vdp "
                          "signal; use estimator.kind=ekf.")
    if cfg.controller.kind != 'none' and cfg.estimator.kind == 'none':
        raise ConfigError("controller.kind={} needs an estimator."
                          .format(cfg.controller.kind))
    if cfg.ensemble.size < 2:
        raise ConfigError("ensemble.size must be >= 2; it is {}."
                          .format(cfg.ensemble.size))
    if not cfg.grid.T > 0:
        raise ConfigError("grid.T must be > 0; it is {}.".format(cfg.grid.T))
    if cfg.grid.dt is not None:
        guard = dt_guard(sensor)
        if not 0 < cfg.grid.dt <= guard:
            raise ConfigError("grid.dt must be in (0, {:.3g}]; it is {}."
                              .format(guard, cfg.grid.dt))
    if int(cfg.grid.record_every) < 1:
        raise ConfigError("grid.record_every must be >= 1.")
    if cfg.seed < 0:
        raise ConfigError("seed must be >= 0; it is {}.".format(cfg.seed))


def build_scenario(doc):
    """Scenario mapping (or file path) to a validated Munch."""
    cfg = load_scenario(doc) if isinstance(doc, str) \
        else merge_defaults(dict(doc))
    apply_probe(cfg)
    check_dependency(cfg)
    configure_dt(cfg)
    return cfg


def configure_log_folder(args):
    log_folder = ospj(args.out, args.experiment_name)

    if os.path.isdir(log_folder):
        if args.override_cache:
            shutil.rmtree(log_folder, ignore_errors=True)
        else:
            raise ConfigError("Experiment with the same name exists: {}; "
                              "pass --override_cache to replace it."
                              .format(log_folder))
    try:
        os.makedirs(log_folder)
    except OSError as e:
        raise ConfigError("Cannot create log folder {}: {}"
                          .format(log_folder, e))
    return log_folder


def configure_log(args):
    log_file_name = ospj(args.log_folder, 'log.log')
    Logger(log_file_name)


def configure_reporter(args):
    reporter_log_root = ospj(args.log_folder, 'reports')
    if not os.path.isdir(reporter_log_root):
        os.makedirs(reporter_log_root)
    return Reporter, reporter_log_root


def get_parser():
    parser = argparse.ArgumentParser(
        description='Simulate, filter and bound a continuously monitored '
                    'atomic magnetometer.')
    parser.add_argument('command', choices=_COMMANDS)

    # Util
    parser.add_argument('--config', type=str, default=None,
                        help='scenario document (JSON or YAML)')
    parser.add_argument('--out', type=str, default='runs')
    parser.add_argument('--seed', type=int, default=None,
                        help='overrides the scenario seed')
    parser.add_argument('--workers', default=1, type=int,
                        help='trajectory worker processes (default: 1)')
    parser.add_argument('--keep-trajectories', '--keep_trajectories',
                        dest='keep_trajectories', type=str2bool, nargs='?',
                        const=True, default=False)
    parser.add_argument('--experiment_name', type=str, default=None)
    parser.add_argument('--override_cache', type=str2bool, nargs='?',
                        const=True, default=False)

    # Tracking
    parser.add_argument('--neptune', type=str2bool, nargs='?', const=True,
                        default=False, help='stream metrics to neptune')
    parser.add_argument('--neptune_path', default='.neptune',
                        help='path to neptune credentials file')

    # Bound curves
    parser.add_argument('--t_min', type=float, default=None)
    parser.add_argument('--points', type=int, default=200)

    # Validation
    parser.add_argument('--ensemble_checks', type=str2bool, nargs='?',
                        const=True, default=False,
                        help='also run the ensemble acceptance checks')
    return parser


def get_configs(argv=None):
    args = munch.munchify(vars(get_parser().parse_args(argv)))

    if args.command in ('run', 'bounds') and args.config is None:
        raise ConfigError("--config is required for '{}'."
                          .format(args.command))
    args.scenario = build_scenario(args.config) if args.config \
        else build_scenario({})
    if args.seed is not None:
        args.scenario.seed = args.seed
    if args.keep_trajectories:
        args.scenario.output.keep_trajectories = True
    if args.workers < 1:
        warnings.warn("--workers < 1 runs serially.")
        args.workers = 1
    if args.experiment_name is None:
        args.experiment_name = '{}_{}'.format(args.scenario.name,
                                              args.command)

    args.log_folder = configure_log_folder(args)
    configure_log(args)
    args.reporter, args.reporter_log_root = configure_reporter(args)
    return args
