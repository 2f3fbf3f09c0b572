"""Energy functions, Ising mappings, spin readout and heterogeneity metrics.

Each energy here is the Lyapunov function of one drift in ``oscim.model``:

    energy_complex     sl / ampphase   (da/dt = -dE/da*)
    energy_phase       poim-phase, oim (dtheta/dt = -dE/dtheta)
    energy_stationary  stationary      (dE/dt = -|dE/dphi|^2 along the flow)
    energy_ah          phase energy with frozen heterogeneous amplitudes
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SymmetryError
from .graph import ising_energy
from .model import CouplingSet, OscillatorParams

FD_STEP = 1e-5
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    onsite: float
    normal_coupling: float
    conjugate_coupling: float


@dataclass(frozen=True, eq=False)
class HeterogeneityReport:
    ah: float
    r_star: np.ndarray
    j_effective: np.ndarray


def _offdiag(m):
    m = np.array(m, dtype=float)
    np.fill_diagonal(m, 0.0)
    return m


def _real(z, scale, what):
    z = np.asarray(z)
    if np.any(np.abs(z.imag) > IMAG_TOL * np.maximum(1.0, scale)):
        raise SymmetryError(f"{what} has an imaginary part; J and G must be real symmetric")
    return z.real


def energy_complex(a, params: OscillatorParams, coupling: CouplingSet, xi=None) -> EnergyBreakdown:
    """Complex-form energy of the conjugate Stuart-Landau network.

    The coupling sums are evaluated as written (no symmetrisation), so an
    asymmetric ``J`` or ``G`` leaves an imaginary residue and raises
    ``SymmetryError``.  Leading batch axes on ``a`` give array-valued fields.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape[-1] != coupling.n or a.shape[-1] != params.n:
        raise DimensionError(f"state has {a.shape[-1]} oscillators, expected {coupling.n}")
    xi = coupling.xi if xi is None else xi
    ac = np.conj(a)
    mod2 = (a * ac).real
    ep = np.exp(1j * params.phi_p)
    onsite = np.sum(-params.mu * mod2 + 0.5 * params.alpha * mod2**2
                    - 0.5 * params.kappa * (ep * ac**2 + np.conj(ep) * a**2), axis=-1)
    J, G = _offdiag(coupling.J), _offdiag(coupling.G)
    if not (np.allclose(J, J.T, rtol=0, atol=1e-12) and np.allclose(G, G.T, rtol=0, atol=1e-12)):
        raise SymmetryError("energy is only defined for symmetric J and G")
    # sum_{i != j} J_ij (a_i a_j* + a_i* a_j), written out index by index
    normal = -0.5 * xi * (np.einsum("...i,ij,...j->...", a, J, ac)
                          + np.einsum("...i,ij,...j->...", ac, J, a))
    conj = -0.5 * xi * (np.einsum("...i,ij,...j->...", a, G, a)
                        + np.einsum("...i,ij,...j->...", ac, G, ac))
    total = onsite + normal + conj
    scale = np.abs(onsite) + np.abs(normal) + np.abs(conj)
    _real(total, np.max(scale), "energy")
    onsite = _real(onsite, np.max(scale), "onsite energy")
    return EnergyBreakdown(
        total=_as_scalar(total.real),
        onsite=_as_scalar(onsite),
        normal_coupling=_as_scalar(normal.real),
        conjugate_coupling=_as_scalar(conj.real),
    )


def _as_scalar(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def energy_phase(theta, Ks, K, J, G=None):
    """Phase energy minimised by the phase-only machines.

    With ``G=None`` the conjugate coupling equals ``J`` (equal split) and this
    is ``-(Ks/2) sum cos 2th_i - K sum_{i != j} J_ij cos th_i cos th_j``.  Pass
    ``G`` explicitly for any other split; ``G=0`` gives the OIM energy.
    """
    theta = np.asarray(theta, dtype=float)
    J = np.asarray(J, dtype=float)
    if theta.shape[-1] != J.shape[0]:
        raise DimensionError(f"theta has {theta.shape[-1]} entries, J is {J.shape}")
    c, s = np.cos(theta), np.sin(theta)
    onsite = -0.5 * Ks * np.sum(np.cos(2.0 * theta), axis=-1)
    J = _offdiag(J)
    # cos(th_i - th_j) = c_i c_j + s_i s_j ; cos(th_i + th_j) = c_i c_j - s_i s_j
    if G is None:
        pair = -K * np.einsum("...i,ij,...j->...", c, J, c)
    else:
        G = _offdiag(G)
        pair = -0.5 * K * (np.einsum("...i,ij,...j->...", c, J + G, c)
                           + np.einsum("...i,ij,...j->...", s, J - G, s))
    return _as_scalar(onsite + pair)


def energy_stationary(phi, t, K, J):
    """Lab-frame energy ``-(K/4) sum_{i != j} J_ij [cos(ph_i - ph_j) + cos(2t + ph_i + ph_j)]``."""
    phi = np.asarray(phi, dtype=float)
    J = np.asarray(J, dtype=float)
    if phi.shape[-1] != J.shape[0]:
        raise DimensionError(f"phi has {phi.shape[-1]} entries, J is {J.shape}")
    # the bracket equals 2 cos(t + ph_i) cos(t + ph_j)
    u = np.cos(np.asarray(t)[..., None] + phi) if np.ndim(t) else np.cos(t + phi)
    return _as_scalar(-0.5 * K * np.einsum("...i,ij,...j->...", u, _offdiag(J), u))


def energy_ah(r, theta, Ks, K, J):
    """Phase energy with heterogeneous (frozen) amplitudes ``r``."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    J = np.asarray(J, dtype=float)
    if r.shape != theta.shape or theta.shape[-1] != J.shape[0]:
        raise DimensionError(f"r {r.shape}, theta {theta.shape} and J {J.shape} disagree")
    rc = r * np.cos(theta)
    onsite = -0.5 * Ks * np.sum(r**2 * np.cos(2.0 * theta), axis=-1)
    return _as_scalar(onsite - 0.5 * K * np.einsum("...i,ij,...j->...", rc, _offdiag(J), rc))


def phase_energy_to_ising(s, Ks, K, J):
    """Ising form of ``energy_phase`` at binary phases: ``(-2K sum_{i<j} J s s, C1)``."""
    s = np.asarray(s, dtype=float)
    n = s.shape[-1]
    return 2.0 * K * ising_energy(_offdiag(J), s), -0.5 * n * Ks


def ah_energy_to_ising(s, r_star, Ks, K, J):
    """Weighted Ising form of ``energy_ah`` at binary phases: ``(ising part, C2)``.

    ``energy_ah == ising part - C2`` with ``ising part = -(K/2) sum_{i != j} Jt s s``
    over the rescaled couplings ``Jt_ij = r_i r_j J_ij``.
    """
    r_star = np.asarray(r_star, dtype=float)
    jt = effective_couplings(r_star, J)
    return K * ising_energy(jt, s), 0.5 * Ks * np.sum(r_star**2, axis=-1)


def effective_couplings(r_star, J):
    r_star = np.asarray(r_star, dtype=float)
    return r_star[:, None] * r_star[None, :] * _offdiag(J)


def spin_readout(theta) -> np.ndarray:
    """``sign(cos theta)`` with ``cos theta == 0`` resolved to +1."""
    return np.where(np.cos(np.asarray(theta, dtype=float)) < 0, -1, 1)


def heterogeneity_report(r_star, J) -> HeterogeneityReport:
    """Coefficient of variation (population std) of ``r_star`` and the rescaled couplings."""
    r_star = np.asarray(r_star, dtype=float)
    mean = r_star.mean()
    if mean <= 0:
        raise ValueError("mean amplitude must be positive")
    return HeterogeneityReport(
        ah=float(r_star.std() / mean),
        r_star=r_star,
        j_effective=effective_couplings(r_star, J),
    )


def amplitude_heterogeneity(r_star):
    """Batched coefficient of variation along the last axis."""
    r_star = np.asarray(r_star, dtype=float)
    return r_star.std(axis=-1) / r_star.mean(axis=-1)


def wirtinger_grad_fd(E, a, h=FD_STEP):
    """Central-difference ``dE/da*`` = (dE/dx + i dE/dy) / 2 for real-valued ``E``."""
    a = np.asarray(a, dtype=complex)
    grad = np.empty_like(a)
    for k in np.ndindex(a.shape):
        steps = []
        for d in (h, 1j * h):
            ap, am = a.copy(), a.copy()
            ap[k] += d
            am[k] -= d
            steps.append((float(E(ap)) - float(E(am))) / (2.0 * h))
        grad[k] = 0.5 * (steps[0] + 1j * steps[1])
    return grad


def real_grad_fd(E, x, h=FD_STEP):
    """Central-difference gradient of a real function of a real vector."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for k in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        grad[k] = (float(E(xp)) - float(E(xm))) / (2.0 * h)
    return grad
