"""
Command-line entry point.

    python scripts/magsense_main.py run --config scenarios/constant_n200.json
    python scripts/magsense_main.py bounds --config scenarios/ou_realistic.json
    python scripts/magsense_main.py validate
    python scripts/magsense_main.py validate --ensemble_checks --workers 4

Exit codes: 0 success, 2 invalid scenario or flags, 3 numerical failure.
"""

import sys

import numpy as np

from magsense.bounds import timescales
from magsense.config import get_configs
from magsense.engine import coverage, run_ensemble, scenario_bound
from magsense.logger import init_log, send_log, set_log_property
from magsense.outputs import emit_outputs, steady_value, write_bound, \
    write_manifest
from magsense.spin import squeezing_db
from magsense.util import ConfigError, NumericalError
from magsense.validation import validate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class Runner(object):
    def __init__(self, args):
        self.args = args
        self.cfg = args.scenario
        self.reporter = args.reporter

    def report(self, step, values):
        reporter_instance = self.reporter(self.args.reporter_log_root, step)
        for key, val in values.items():
            reporter_instance.add(key=key, val=val)
            send_log(key, val)
        reporter_instance.write()

    def run(self):
        cfg = self.cfg
        print("Scenario {}: engine={}, N={}, {} trajectories, dt={:.3g}"
              .format(cfg.name, cfg.engine, cfg.sensor.N, cfg.ensemble.size,
                      cfg.grid.dt))
        summary = run_ensemble(cfg, workers=self.args.workers)
        paths = emit_outputs(summary, cfg, self.args.log_folder)
        frame = summary.frame
        values = {
            'amse_steady': steady_value(frame, 'amse'),
            'sigma_oo_steady': steady_value(frame, 'sigma_oo'),
            'xi2_cond_min': float(np.nanmin(frame['xi2_cond'])),
            'xi2_uncond_min': float(np.nanmin(frame['xi2_uncond'])),
            'coverage_3sigma': coverage(summary, k=3.,
                                        t_min=self.args.t_min or 0.),
            'clamps': summary.counters['clamps'],
        }
        values['squeezing_db_max'] = float(squeezing_db(
            values['xi2_cond_min']))
        for key, val in values.items():
            print("{:<20s} {:.6g}".format(key, val))
        self.report('run', values)
        print("Wrote {} files to {}".format(len(paths), self.args.log_folder))

    def bounds(self):
        cfg = self.cfg
        t_min = self.args.t_min or cfg.grid.T / self.args.points
        t = np.linspace(t_min, cfg.grid.T, self.args.points)
        bound = scenario_bound(cfg, t)
        if bound is None:
            raise ConfigError("No bound for signal.variant={} or for "
                              "kappa_Q = 0.".format(cfg.signal.variant))
        write_bound(bound, self.args.log_folder)
        write_manifest(cfg, self.args.log_folder)
        q = cfg.signal.ou.q_omega if cfg.signal.variant == 'ou' else 0.
        scales = timescales(cfg.sensor.N, cfg.sensor.M, cfg.sensor.eta, q,
                            cfg.sensor.kappa_coll)
        values = {'sqrt_v_cs_final': float(bound['sqrt_v_cs'].iloc[-1])}
        values.update({k: float(v) for k, v in scales._asdict().items()})
        for key, val in values.items():
            print("{:<20s} {:.6g}".format(key, val))
        self.report('bounds', values)

    def validate(self):
        cfg = self.cfg if self.args.config else None
        return validate(cfg, self.reporter, self.args.reporter_log_root,
                        ensemble=self.args.ensemble_checks,
                        workers=self.args.workers)


def main(argv=None):
    try:
        args = get_configs(argv)
    except ConfigError as e:
        print("Config error: {}".format(e), file=sys.stderr)
        return EXIT_CONFIG
    init_log(args)
    for key in ('engine', 'seed'):
        set_log_property(key, args.scenario[key])
    runner = Runner(args)

    print("===========================================================")
    try:
        if args.command == 'run':
            runner.run()
        elif args.command == 'bounds':
            runner.bounds()
        elif not runner.validate():
            print("Validation failed.")
            return EXIT_NUMERICAL
    except ConfigError as e:
        print("Config error: {}".format(e), file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print("Numerical failure: {}".format(e), file=sys.stderr)
        print("Replay with seed={} stream_id={}".format(
            e.diagnostics.get('seed'), e.diagnostics.get('stream_id')),
            file=sys.stderr)
        return EXIT_NUMERICAL
    print("===========================================================")
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
