"""
Collective spin operators on the symmetric (j = N/2) Dicke subspace.

Basis ordering is fixed as m = +j, +j-1, ..., -j: index i holds m = j - i.
"""

from collections import namedtuple
from functools import lru_cache

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.special import gammaln

from .util import NumericalError, check_density_validity

try:
    from scipy.special import sph_harm_y
except ImportError:  # scipy < 1.15
    sph_harm_y = None

__all__ = ['CollectiveOps', 'DickeState', 'SpinMoments', 'WignerField',
           'build_collective_operators', 'css_x', 'rotate_state', 'moments',
           'squeezing_wineland', 'squeezing_db', 'squeezing_regimes',
           'clebsch_gordan', 'wigner_coefficients', 'wigner_grid',
           'wigner_sphere', 'project_wigner', 'write_wigner_csv']

CollectiveOps = namedtuple('CollectiveOps',
                           ['N', 'Jx', 'Jy', 'Jz', 'Jplus', 'Jminus'])
SpinMoments = namedtuple('SpinMoments', ['mean', 'cov'])
WignerField = namedtuple('WignerField',
                         ['theta', 'phi', 'values', 'weights',
                          'imag_residual'])


class DickeState(object):
    """Density matrix on the (N+1)-dimensional symmetric subspace."""

    def __init__(self, N, rho, check=True):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (N + 1, N + 1):
            raise ValueError("rho must be {0}x{0} for N={1}; it is {2}."
                             .format(N + 1, N, rho.shape))
        if check:
            check_density_validity(rho)
        self.N = N
        self.rho = rho

    @property
    def purity(self):
        return float(np.real(np.sum(self.rho * self.rho.T)))


@lru_cache(maxsize=8)
def build_collective_operators(N):
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer; it is {}.".format(N))
    N = int(N)
    j = N / 2.
    m = j - np.arange(N + 1)
    # J+ |j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>, and m+1 sits one index up
    plus = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    Jplus = np.diag(plus, k=1).astype(complex)
    Jminus = Jplus.T.copy()
    Jz = np.diag(m).astype(complex)
    Jx = 0.5 * (Jplus + Jminus)
    Jy = -0.5j * (Jplus - Jminus)
    for op in (Jx, Jy, Jz, Jplus, Jminus):
        op.setflags(write=False)
    return CollectiveOps(N, Jx, Jy, Jz, Jplus, Jminus)


def css_x(N):
    """Coherent spin state pointing along +x."""
    k = N - np.arange(N + 1)  # k = N/2 + m
    log_amp = 0.5 * (gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1)) \
        - 0.5 * N * np.log(2.)
    psi = np.exp(log_amp)
    psi /= np.linalg.norm(psi)
    return DickeState(N, np.outer(psi, psi).astype(complex))


def rotate_state(state, ops, axis, angle):
    J = {'x': ops.Jx, 'y': ops.Jy, 'z': ops.Jz}[axis]
    U = scipy.linalg.expm(-1j * angle * J)
    return DickeState(state.N, U @ state.rho @ U.conj().T)


def moments(state, ops):
    """Means and symmetrized covariances of (Jx, Jy, Jz)."""
    if state.rho.shape != ops.Jx.shape:
        raise ValueError("State dimension {} does not match operators {}."
                         .format(state.rho.shape, ops.Jx.shape))
    rho = state.rho
    trace_err = abs(np.trace(rho) - 1.)
    if trace_err > 1e-6:
        raise NumericalError("State trace deviates from 1.",
                             trace_error=trace_err)
    J = (ops.Jx, ops.Jy, ops.Jz)
    rho_J = [rho @ op for op in J]
    mean = np.array([np.real(np.trace(p)) for p in rho_J])
    cov = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            # Re Tr(rho Ja Jb) = <{Ja, Jb}>/2 for Hermitian Ja, Jb
            second = np.real(np.sum(rho_J[a] * J[b].T))
            cov[a, b] = cov[b, a] = second - mean[a] * mean[b]
    return SpinMoments(mean, cov)


def squeezing_wineland(v_perp, mean_s, N):
    if mean_s == 0:
        raise ValueError("Squeezing parameter undefined for zero mean spin.")
    return N * v_perp / mean_s ** 2


def squeezing_db(xi2):
    return -10. * np.log10(xi2)


def squeezing_regimes(t, p):
    """Short- and long-time conditional squeezing predictions and t*."""
    J = p.N / 2.
    grow = np.exp((p.M + p.kappa_coll) * t / 2.)
    short = (1. + 2. * J * t * p.kappa_coll) \
        / (1. + 2. * J * t * p.M * p.eta) * grow
    if p.kappa_coll == 0 or p.M * p.eta == 0:
        return short, 0. * grow, np.inf
    long = np.sqrt(p.kappa_coll / (p.eta * p.M)) * grow
    t_star = 1. / (2. * J * np.sqrt(p.M * p.kappa_coll * p.eta))
    return short, long, t_star


def _highest_weight(j1, j2, k, m1):
    """<j1 m1; j2 k-m1 | k k> over the array m1; zero where k - m1 is not a
    projection of j2. The closed form has a single term."""
    m2 = k - m1
    valid = np.abs(m2) <= j2
    m2 = np.where(valid, m2, 0.)
    log_norm = 0.5 * (gammaln(2 * k + 2) + gammaln(j1 + j2 - k + 1)
                      - gammaln(j1 + j2 + k + 2) - gammaln(k + j1 - j2 + 1)
                      - gammaln(k - j1 + j2 + 1))
    log_m = 0.5 * (gammaln(j1 + m1 + 1) + gammaln(j2 + m2 + 1)
                   - gammaln(j1 - m1 + 1) - gammaln(j2 - m2 + 1))
    sign = np.where(np.rint(j1 - m1) % 2, -1., 1.)
    return np.where(valid, sign * np.exp(log_norm + log_m), 0.)


def _coupled_columns(j1, j2, k):
    """Yield (q, c) for q = k, k-1, ..., -k with c[i] = <j1 m1; j2 q-m1|k q>
    and m1 = j1 - i, lowering |k,q> with J1- + J2-."""
    m1 = j1 - np.arange(int(round(2 * j1)) + 1)
    # J1- takes index i-1 (m1 + 1) to index i (m1)
    up = np.sqrt((j1 + m1 + 1) * (j1 - m1))
    c = _highest_weight(j1, j2, k, m1)
    for step in range(int(round(2 * k)) + 1):
        q = k - step
        if step:
            m2 = q - m1
            down = np.sqrt(np.clip((j2 + m2 + 1) * (j2 - m2), 0., None))
            lowered = down * c
            lowered[1:] += up[1:] * c[:-1]
            c = lowered / np.sqrt((k + q + 1) * (k - q))
        yield q, c


def clebsch_gordan(j1, m1, j2, m2, k, q):
    """<j1,m1;j2,m2|k,q> in the Condon-Shortley convention."""
    args = [int(round(2 * v)) for v in (j1, m1, j2, m2, k, q)]
    dj1, dm1, dj2, dm2, dk, dq = args
    if abs(dm1) > dj1 or abs(dm2) > dj2:
        raise ValueError("Projections must satisfy |m| <= j; got "
                         "({}, {}) and ({}, {}).".format(j1, m1, j2, m2))
    if dq != dm1 + dm2 or abs(dq) > dk:
        return 0.
    if dk < abs(dj1 - dj2) or dk > dj1 + dj2:
        return 0.
    if (dj1 + dj2 + dk) % 2 or (dj1 - dm1) % 2 or (dj2 - dm2) % 2:
        return 0.
    i = (dj1 - dm1) // 2
    for level, c in _coupled_columns(dj1 / 2., dj2 / 2., dk / 2.):
        if int(round(2 * level)) == dq:
            return float(c[i])


def _multipoles(state):
    """rho_kq as {q: array over k = |q|, ..., N}."""
    N = state.N
    idx = np.arange(N + 1)
    bands = {}
    for q in range(-N, N + 1):
        col = idx + q
        ok = (col >= 0) & (col <= N)
        band = np.zeros(N + 1, dtype=complex)
        band[ok] = state.rho[idx[ok], col[ok]]
        # (-1)^(J - m1 - q) with m1 = J - i
        bands[q] = band * np.where((idx - q) % 2, -1., 1.)
    out = {q: np.zeros(N + 1 - abs(q), dtype=complex) for q in bands}
    for k in range(N + 1):
        for q, c in _coupled_columns(N / 2., N / 2., k):
            q = int(round(q))
            out[q][k - abs(q)] = bands[q] @ c
    return out


def wigner_coefficients(state):
    """Multipole coefficients rho_kq, returned as a dict keyed by (k, q)."""
    coeffs = {}
    for q, values in _multipoles(state).items():
        for offset, value in enumerate(values):
            coeffs[(abs(q) + offset, q)] = value
    return coeffs


def _legendre_column(q, kmax, theta):
    """Y_kq(theta, 0) for k = q, ..., kmax and q >= 0 by the normalized
    three-term recurrence in k."""
    x, s = np.cos(theta), np.sin(theta)
    out = np.empty((kmax - q + 1, len(theta)))
    log_c = 0.5 * (np.log(2. * q + 1.) - np.log(4. * np.pi)
                   + gammaln(2 * q + 1) - 2. * q * np.log(2.)
                   - 2. * gammaln(q + 1))
    out[0] = (-1.) ** q * np.exp(log_c) * s ** q
    if kmax > q:
        out[1] = np.sqrt(2. * q + 3.) * x * out[0]
    for k in range(q + 2, kmax + 1):
        kk, qq = float(k * k), float(q * q)
        a = np.sqrt((4. * kk - 1.) / (kk - qq))
        b = np.sqrt(((k - 1.) ** 2 - qq) * (2. * k + 1.)
                    / ((2. * k - 3.) * (kk - qq)))
        out[k - q] = a * x * out[k - q - 1] - b * out[k - q - 2]
    return out


def _ylm_column(q, kmax, theta):
    """Y_kq(theta, 0) for k = |q|, ..., kmax as a (kmax - |q| + 1, n) array."""
    theta = np.asarray(theta, dtype=float)
    if sph_harm_y is not None:
        k = np.arange(abs(q), kmax + 1)[:, None]
        return np.real(sph_harm_y(k, q, theta[None, :], 0.))
    # sph_harm of scipy < 1.15 underflows past degree ~85
    col = _legendre_column(abs(q), kmax, theta)
    return col if q >= 0 or q % 2 == 0 else -col


def wigner_grid(n_theta, n_phi):
    """Gauss-Legendre nodes in cos(theta) times a uniform phi grid.

    Returns theta, phi axes and the (n_theta, n_phi) quadrature weights.
    """
    if n_theta < 1 or n_phi < 1:
        raise ValueError("Grid must be non-empty; got {}x{}."
                         .format(n_theta, n_phi))
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = 2. * np.pi * np.arange(n_phi) / n_phi
    weights = np.outer(w, np.full(n_phi, 2. * np.pi / n_phi))
    return theta, phi, weights


def wigner_sphere(state, grid):
    """W(theta, phi) of a Dicke state on the Bloch sphere.

    theta is the polar angle from +z and phi = 0 points along +x.
    """
    theta, phi, weights = grid
    if len(theta) == 0 or len(phi) == 0:
        raise ValueError("Wigner grid must be non-empty.")
    theta, phi = np.asarray(theta), np.asarray(phi)
    field = np.zeros((len(theta), len(phi)), dtype=complex)
    for q, values in _multipoles(state).items():
        column = values @ _ylm_column(q, state.N, theta)
        field += np.outer(column, np.exp(1j * q * phi))
    field *= np.sqrt((state.N + 1) / (4. * np.pi))
    return WignerField(theta, phi, field.real, weights,
                       float(np.max(np.abs(field.imag))))


def project_wigner(field, N, k, q):
    """Recover rho_kq from a sampled field by spherical-harmonic quadrature."""
    if abs(q) > k or k > N:
        raise ValueError("Need |q| <= k <= N; got k={}, q={}, N={}."
                         .format(k, q, N))
    y = _ylm_column(q, k, field.theta)[-1]
    integral = np.sum(field.weights * field.values
                      * np.outer(y, np.exp(-1j * q * field.phi)))
    return integral / np.sqrt((N + 1) / (4. * np.pi))


def write_wigner_csv(field, path):
    th, ph = np.meshgrid(field.theta, field.phi, indexing='ij')
    frame = pd.DataFrame({'theta': th.ravel(), 'phi': ph.ravel(),
                          'value': field.values.ravel()})
    frame.to_csv(path, index=False)
    return frame
