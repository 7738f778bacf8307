import json
import os
import sys

import numpy as np

__all__ = ['Logger', 'Reporter', 'ConfigError', 'NumericalError',
           'check_positive', 'check_square', 'check_density_validity',
           'check_covariance_validity', 'symmetrize']


class ConfigError(ValueError):
    """Invalid scenario document or command-line flag."""


class NumericalError(RuntimeError):
    """An invariant of the simulation or of a filter was violated."""

    def __init__(self, message, **diagnostics):
        super(NumericalError, self).__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        msg = super(NumericalError, self).__str__()
        if not self.diagnostics:
            return msg
        details = ', '.join('{}={}'.format(k, v)
                            for k, v in sorted(self.diagnostics.items()))
        return '{} ({})'.format(msg, details)


class Logger(object):
    """Log stdout messages."""

    def __init__(self, outfile):
        self.terminal = sys.stdout
        self.log = open(outfile, "w")
        sys.stdout = self

    def write(self, message):
        self.terminal.write(message)
        self.log.write(message)

    def flush(self):
        self.terminal.flush()
        self.log.flush()


class Reporter(object):
    def __init__(self, reporter_log_root, step):
        self.log_file = os.path.join(reporter_log_root, str(step))
        self.step = step
        self.report_dict = {
            'summary': True,
            'step': self.step,
        }

    def add(self, key, val):
        if isinstance(val, np.generic):
            val = val.item()
        self.report_dict.update({key: val})

    def write(self):
        log_file = self.log_file
        while os.path.isfile(log_file):
            log_file += '_'
        with open(log_file, 'w') as f:
            f.write(json.dumps(self.report_dict))
        return log_file


def check_positive(name, value, strict=True):
    if not np.isfinite(value):
        raise ValueError("{} must be finite; it is {}.".format(name, value))
    if strict and value <= 0:
        raise ValueError("{} must be > 0; it is {}.".format(name, value))
    if not strict and value < 0:
        raise ValueError("{} must be >= 0; it is {}.".format(name, value))


def check_square(name, matrix, dim=None):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("{} must be a square matrix; it has shape {}."
                         .format(name, matrix.shape))
    if dim is not None and matrix.shape[0] != dim:
        raise ValueError("{} must be {}x{}; it is {}x{}."
                         .format(name, dim, dim, *matrix.shape))


def symmetrize(matrix):
    return 0.5 * (matrix + matrix.conj().T)


def check_density_validity(rho, trace_tol=1e-10, herm_tol=1e-12,
                           pos_tol=1e-10, **diagnostics):
    """
    Args:
        rho: numpy.ndarray(dtype=complex, shape=(d, d))
    Raises:
        NumericalError if the trace, Hermiticity or positivity residual
        exceeds its tolerance.
    """
    if not np.all(np.isfinite(rho)):
        raise NumericalError("Density matrix contains non-finite entries.",
                             **diagnostics)
    trace_err = abs(np.trace(rho) - 1.)
    if trace_err > trace_tol:
        raise NumericalError("Density matrix trace drifted.",
                             trace_error=trace_err, **diagnostics)
    herm_err = np.max(np.abs(rho - rho.conj().T))
    if herm_err > herm_tol:
        raise NumericalError("Density matrix is not Hermitian.",
                             hermiticity_error=herm_err, **diagnostics)
    min_eig = np.linalg.eigvalsh(symmetrize(rho)).min()
    if min_eig < -pos_tol:
        raise NumericalError("Density matrix lost positivity.",
                             min_eigenvalue=min_eig, **diagnostics)
    return trace_err, herm_err, min_eig


def check_covariance_validity(sigma, clip_tol=1e-8, **diagnostics):
    """Symmetrize a covariance and clip tiny negative eigenvalues.

    Returns the repaired covariance and the symmetrization residual. Negative
    eigenvalues below -clip_tol raise NumericalError.
    """
    if not np.all(np.isfinite(sigma)):
        raise NumericalError("Covariance contains non-finite entries.",
                             **diagnostics)
    residual = np.max(np.abs(sigma - sigma.T)) if sigma.size else 0.
    sigma = 0.5 * (sigma + sigma.T)
    eigvals, eigvecs = np.linalg.eigh(sigma)
    if eigvals.min() < -clip_tol * max(1., np.abs(eigvals).max()):
        raise NumericalError("Covariance lost positive semi-definiteness.",
                             min_eigenvalue=eigvals.min(), **diagnostics)
    if eigvals.min() < 0:
        eigvals = np.clip(eigvals, 0., None)
        sigma = (eigvecs * eigvals) @ eigvecs.T
    return sigma, residual
