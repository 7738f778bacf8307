"""
Conditional evolution under the homodyne stochastic master equation

    drho = -i(w+u)[Jz, rho] dt + kc D[Jz] rho dt + (kl/2) sum_j D[sz_j] rho dt
           + M D[Jy] rho dt + sqrt(eta M) H[Jy] rho dW,
    dy   = 2 eta sqrt(M) <Jy> dt + sqrt(eta) dW,

integrated with a positivity-preserving Kraus step followed by trace
renormalization. Local dephasing leaves the symmetric subspace, so it is only
available on the full 2^N space for small N.
"""

from collections import namedtuple
from functools import lru_cache

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .spin import DickeState, SpinMoments, build_collective_operators, \
    moments
from .util import NumericalError, check_density_validity, check_positive

__all__ = ['SensorParams', 'StepRecord', 'FullHilbertOps', 'superop_D',
           'superop_H', 'sme_step', 'sme_step_full_hilbert',
           'full_hilbert_operators', 'css_x_full', 'moments_full',
           'check_state', 'lindblad_rhs', 'integrate_unconditional',
           'unconditional_average', 'MAX_FULL_HILBERT_N']

MAX_FULL_HILBERT_N = 12


class SensorParams(namedtuple('SensorParams', ['N', 'M', 'eta', 'kappa_coll',
                                               'kappa_loc'])):
    __slots__ = ()

    def __new__(cls, N, M, eta=1., kappa_coll=0., kappa_loc=0.):
        check_positive('N', N)
        check_positive('M', M, strict=False)
        check_positive('kappa_coll', kappa_coll, strict=False)
        check_positive('kappa_loc', kappa_loc, strict=False)
        if not 0 <= eta <= 1:
            raise ValueError("eta must be in [0, 1]; it is {}.".format(eta))
        return super(SensorParams, cls).__new__(
            cls, N, float(M), float(eta), float(kappa_coll),
            float(kappa_loc))

    @property
    def J(self):
        return self.N / 2.


StepRecord = namedtuple('StepRecord', ['dy', 'dW', 'moments'])
FullHilbertOps = namedtuple('FullHilbertOps',
                            ['N', 'Jx', 'Jy', 'Jz', 'jz_diag', 'sz_diag',
                             'jy_dense', 'jy2_dense'])


@lru_cache(maxsize=8)
def _jy_squared(N):
    Jy = build_collective_operators(N).Jy
    return Jy @ Jy


def superop_D(L, rho):
    Ld = L.conj().T
    LdL = Ld @ L
    return L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)


def superop_H(L, rho):
    Ld = L.conj().T
    Lrho = L @ rho
    rhoLd = rho @ Ld
    return Lrho + rhoLd - np.trace(Lrho + rhoLd) * rho


def _kraus_update(rho, phase, L, L2, LdL, mean_l, extra, dt, dW, eta):
    """One Kraus step shared by the symmetric and full-space engines.

    phase: diagonal of the rotation generator (w+u) Jz dt
    L, L2, LdL: measured operator sqrt(M) Jy, its square and L^dag L
    extra: list of (unmonitored operator application, L^dag L) pairs
    """
    dim = rho.shape[0]
    dr = 2. * np.sqrt(eta) * mean_l * dt + dW
    kraus = np.eye(dim, dtype=complex) \
        + np.sqrt(eta) * dr * L \
        + 0.5 * eta * (dr * dr - dt) * L2 \
        - 0.5 * dt * LdL
    for _, cdc in extra:
        kraus = kraus - 0.5 * dt * cdc
    numer = kraus @ rho @ kraus.conj().T
    if eta < 1:
        numer += (1. - eta) * dt * (L @ rho @ L.conj().T)
    for apply, _ in extra:
        numer += dt * apply(rho)
    # Hamiltonian part is diagonal in this basis: apply it exactly
    rot = np.exp(-1j * phase)
    numer = rot[:, None] * numer * rot.conj()[None, :]
    numer = 0.5 * (numer + numer.conj().T)
    return numer / np.real(np.trace(numer)), dr


def check_state(rho, **diagnostics):
    return check_density_validity(rho, **diagnostics)


def sme_step(state, omega, u, dt, dW, params, ops=None, check=True,
             with_moments=True):
    """Advance a Dicke state by one conditional step.

    Returns the new DickeState and a StepRecord with the photocurrent
    increment dy = 2 eta sqrt(M) <Jy> dt + sqrt(eta) dW, built from the same
    dW that drives the backaction.
    """
    if params.kappa_loc != 0:
        raise ValueError("Symmetric-subspace engine needs kappa_loc = 0; "
                         "it is {}.".format(params.kappa_loc))
    if not dt > 0:
        raise ValueError("dt must be > 0; it is {}.".format(dt))
    if ops is None:
        ops = build_collective_operators(state.N)
    rho = state.rho
    sqrt_m = np.sqrt(params.M)
    Jy, jz = ops.Jy, np.real(np.diag(ops.Jz))
    L = sqrt_m * Jy
    mean_jy = np.real(np.sum(rho * Jy.T))
    extra = []
    if params.kappa_coll > 0:
        kc = params.kappa_coll
        extra.append((lambda r: kc * jz[:, None] * r * jz[None, :],
                      kc * np.diag(jz ** 2)))
    Jy2 = _jy_squared(state.N)
    new_rho, dr = _kraus_update(rho, (omega + u) * jz * dt, L,
                                params.M * Jy2, params.M * Jy2,
                                sqrt_m * mean_jy, extra, dt, dW, params.eta)
    if check:
        check_state(new_rho, omega=omega, u=u, dW=dW)
    new_state = DickeState(state.N, new_rho, check=False)
    dy = 2. * params.eta * sqrt_m * mean_jy * dt + np.sqrt(params.eta) * dW
    record = StepRecord(dy, dW, moments(new_state, ops)
                        if with_moments else None)
    return new_state, record


def _site_operator(op, site, N):
    left = sp.identity(2 ** site, format='csr')
    right = sp.identity(2 ** (N - site - 1), format='csr')
    return sp.kron(sp.kron(left, op), right, format='csr')


def full_hilbert_operators(N):
    if N > MAX_FULL_HILBERT_N:
        raise ValueError("Full Hilbert space engine supports N <= {}; "
                         "it is {}.".format(MAX_FULL_HILBERT_N, N))
    sx = sp.csr_matrix(np.array([[0., 1.], [1., 0.]], dtype=complex))
    sy = sp.csr_matrix(np.array([[0., -1j], [1j, 0.]]))
    sz = sp.csr_matrix(np.array([[1., 0.], [0., -1.]], dtype=complex))
    Jx = sum(_site_operator(sx, j, N) for j in range(N)) * 0.5
    Jy = sum(_site_operator(sy, j, N) for j in range(N)) * 0.5
    sz_diag = np.array([np.real(_site_operator(sz, j, N).diagonal())
                        for j in range(N)])
    jz_diag = 0.5 * sz_diag.sum(axis=0)
    Jz = sp.diags(jz_diag.astype(complex), format='csr')
    jy_dense = Jy.toarray()
    return FullHilbertOps(N, Jx, Jy, Jz, jz_diag, sz_diag, jy_dense,
                          jy_dense @ jy_dense)


def css_x_full(N):
    psi = np.full(2 ** N, 2. ** (-N / 2.), dtype=complex)
    return np.outer(psi, psi.conj())


def moments_full(rho, ops):
    J = (ops.Jx, ops.Jy, ops.Jz)
    rho_J = [np.asarray(rho @ op) for op in J]
    mean = np.array([np.real(np.trace(p)) for p in rho_J])
    cov = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            second = np.real(J[b].T.multiply(rho_J[a]).sum())
            cov[a, b] = cov[b, a] = second - mean[a] * mean[b]
    return SpinMoments(mean, cov)


def sme_step_full_hilbert(rho, omega, u, dt, dW, params, ops=None,
                          check=True, with_moments=True):
    """Same contract as sme_step on the 2^N product space, with local
    dephasing (kappa_loc / 2) sum_j D[sz_j]."""
    N = int(params.N)
    if N > MAX_FULL_HILBERT_N:
        raise ValueError("Full Hilbert space engine supports N <= {}; "
                         "it is {}.".format(MAX_FULL_HILBERT_N, N))
    if not dt > 0:
        raise ValueError("dt must be > 0; it is {}.".format(dt))
    if ops is None:
        ops = full_hilbert_operators(N)
    dim = 2 ** N
    sqrt_m = np.sqrt(params.M)
    Jy, Jy2 = ops.jy_dense, ops.jy2_dense
    L = sqrt_m * Jy
    mean_jy = np.real(np.sum(rho * Jy.T))
    extra = []
    if params.kappa_coll > 0:
        kc, jz = params.kappa_coll, ops.jz_diag
        extra.append((lambda r: kc * jz[:, None] * r * jz[None, :],
                      kc * np.diag(jz ** 2)))
    if params.kappa_loc > 0:
        half = 0.5 * params.kappa_loc
        sz = ops.sz_diag

        def local(r):
            out = np.zeros_like(r)
            for d in sz:
                out += d[:, None] * r * d[None, :]
            return half * out
        extra.append((local, half * N * np.eye(dim)))
    new_rho, dr = _kraus_update(rho, (omega + u) * ops.jz_diag * dt, L,
                                params.M * Jy2, params.M * Jy2,
                                sqrt_m * mean_jy, extra, dt, dW, params.eta)
    if check:
        check_state(new_rho, omega=omega, u=u, dW=dW)
    dy = 2. * params.eta * sqrt_m * mean_jy * dt + np.sqrt(params.eta) * dW
    record = StepRecord(dy, dW, moments_full(new_rho, ops)
                        if with_moments else None)
    return new_rho, record


def lindblad_rhs(rho, omega, u, params, ops):
    """Unconditional master equation: the measurement only adds M D[Jy]."""
    out = -1j * (omega + u) * (ops.Jz @ rho - rho @ ops.Jz)
    out += params.M * superop_D(ops.Jy, rho)
    if params.kappa_coll > 0:
        out += params.kappa_coll * superop_D(ops.Jz, rho)
    return out


def integrate_unconditional(rho0, t_grid, omega, params, u=0.):
    """Deterministic integration of the unconditional master equation."""
    dim = rho0.shape[0]
    ops = build_collective_operators(dim - 1)

    def rhs(_, y):
        rho = y.reshape(dim, dim)
        return lindblad_rhs(rho, omega, u, params, ops).ravel()

    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]),
                    np.asarray(rho0, dtype=complex).ravel(),
                    t_eval=t_grid, rtol=1e-9, atol=1e-11)
    if not sol.success:
        raise NumericalError("Master equation integration failed.",
                             message=sol.message)
    return [sol.y[:, i].reshape(dim, dim) for i in range(len(t_grid))]


def unconditional_average(trajectories, states=None):
    """Pointwise ensemble means over trajectories sharing one time grid.

    Args:
        trajectories: list of pandas.DataFrame with a 't' column
        states: optional list (per trajectory) of density-matrix sequences
    Returns:
        mean frame and, when states are given, the averaged states.
    """
    if len(trajectories) < 2:
        raise ValueError("Need at least 2 trajectories; got {}."
                         .format(len(trajectories)))
    grid = trajectories[0]['t'].to_numpy()
    for frame in trajectories[1:]:
        if not np.array_equal(frame['t'].to_numpy(), grid):
            raise ValueError("Trajectories do not share a time grid.")
    stacked = np.stack([frame.to_numpy(dtype=float)
                        for frame in trajectories])
    mean = pd.DataFrame(stacked.mean(axis=0),
                        columns=trajectories[0].columns)
    if states is None:
        return mean, None
    if len(states) != len(trajectories):
        raise ValueError("Got {} state sequences for {} trajectories."
                         .format(len(states), len(trajectories)))
    avg = [np.mean([seq[i] for seq in states], axis=0)
           for i in range(len(states[0]))]
    return mean, avg
