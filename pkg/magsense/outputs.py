"""
File artifacts of a run: ensemble, trajectory, bound and Wigner CSVs plus a
manifest that echoes the full scenario.
"""

import json
import os
from os.path import join as ospj

import munch
import numpy as np

from .spin import DickeState, wigner_grid, wigner_sphere, write_wigner_csv

__all__ = ['ENSEMBLE_FILE', 'BOUND_FILE', 'MANIFEST_FILE', 'emit_outputs',
           'write_manifest', 'read_manifest', 'write_bound', 'steady_value']

ENSEMBLE_FILE = 'ensemble.csv'
BOUND_FILE = 'bound.csv'
MANIFEST_FILE = 'manifest.json'
_FLOAT_FORMAT = '%.17g'


def _writable(folder):
    if not os.path.isdir(folder):
        os.makedirs(folder)
    if not os.access(folder, os.W_OK):
        raise OSError("Output folder is not writable: {}".format(folder))


def write_bound(bound, folder):
    path = ospj(folder, BOUND_FILE)
    bound.to_csv(path, index=False, float_format=_FLOAT_FORMAT)
    return path


def write_manifest(cfg, folder, counters=None):
    from . import __version__
    manifest = {
        'version': __version__,
        'seed': cfg.seed,
        'dt': cfg.grid.dt,
        'scenario': munch.unmunchify(cfg),
        'counters': counters or {},
    }
    path = ospj(folder, MANIFEST_FILE)
    with open(path, 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def read_manifest(path):
    """Scenario mapping stored in a manifest; feed it to build_scenario to
    reproduce the run."""
    with open(path, 'r') as f:
        return json.load(f)['scenario']


def _write_wigner(states, cfg, folder):
    N = int(cfg.sensor.N)
    n_theta = cfg.output.wigner_n_theta or N + 1
    n_phi = cfg.output.wigner_n_phi or 2 * N + 1
    grid = wigner_grid(n_theta, n_phi)
    paths = []
    for t, rho in sorted(states.items()):
        field = wigner_sphere(DickeState(N, rho, check=False), grid)
        path = ospj(folder, 'wigner_t{:.6g}.csv'.format(t))
        write_wigner_csv(field, path)
        paths.append(path)
    return paths


def emit_outputs(summary, cfg, folder):
    """Write every artifact of an ensemble run into folder.

    Returns the list of written paths.
    """
    _writable(folder)
    paths = []
    path = ospj(folder, ENSEMBLE_FILE)
    summary.frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT)
    paths.append(path)
    if cfg.output.keep_trajectories:
        traj_folder = ospj(folder, 'trajectories')
        _writable(traj_folder)
        width = len(str(len(summary.trajectories) - 1))
        for stream_id, frame in enumerate(summary.trajectories):
            path = ospj(traj_folder,
                        'stream_{:0{}d}.csv'.format(stream_id, width))
            frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT)
            paths.append(path)
    if summary.bound is not None:
        paths.append(write_bound(summary.bound, folder))
    if summary.states:
        paths.extend(_write_wigner(summary.states, cfg, folder))
    paths.append(write_manifest(cfg, folder, summary.counters))
    return paths


def steady_value(frame, column, fraction=0.2):
    """Mean of column over the last fraction of the time grid."""
    values = frame[column].to_numpy(dtype=float)
    start = int(np.floor(len(values) * (1. - fraction)))
    return float(np.nanmean(values[start:]))
