"""Parameters, state representations and drift terms of every oscillator model.

Model catalog (tag -> dynamics):

    sl          conjugate Stuart-Landau network in complex amplitudes a_i
    ampphase    the same network in amplitude-phase variables (r_i, theta_i)
    poim-phase  phase-only parametric machine (normal + conjugate coupling)
    oim         canonical Kuramoto-style machine (no conjugate coupling)
    stationary  equal-split phase machine in the lab (stationary) frame
    dopo        single normalized DOPO in quadratures (c, s)

All drift functions broadcast over leading batch axes: the oscillator index
is always the last axis.  Angles are kept unwrapped; wrapping only happens at
readout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SymmetryError
from .graph import IsingInstance

R_FLOOR = 1e-9

MODELS = ("sl", "ampphase", "poim-phase", "oim", "stationary", "dopo")
REPRESENTATIONS = ("complex", "amp_phase", "phase_only", "stationary_phase")


class ClampedDivisionWarning(RuntimeWarning):
    """An amplitude fell below R_FLOOR inside the phase equation."""


def _vec(x, n, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.full(n, float(x))
    if x.shape[-1] != n:
        raise DimensionError(f"{name} has length {x.shape[-1]}, expected {n}")
    return x


@dataclass(frozen=True, eq=False)
class OscillatorParams:
    """Per-oscillator gain ``mu``, saturation ``alpha``, pump ``kappa``; global pump phase.

    ``mu`` may carry leading batch axes (one gain vector per trial).
    """

    mu: np.ndarray
    alpha: np.ndarray
    kappa: np.ndarray
    phi_p: float = 0.0

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        n = mu.shape[-1] if mu.ndim else None
        alpha = np.asarray(self.alpha, dtype=float)
        kappa = np.asarray(self.kappa, dtype=float)
        if n is None:
            n = alpha.shape[-1] if alpha.ndim else (kappa.shape[-1] if kappa.ndim else 1)
        object.__setattr__(self, "mu", _vec(mu, n, "mu"))
        object.__setattr__(self, "alpha", _vec(alpha, n, "alpha"))
        object.__setattr__(self, "kappa", _vec(kappa, n, "kappa"))
        object.__setattr__(self, "phi_p", float(self.phi_p))
        if np.any(self.alpha <= 0):
            raise ValueError("alpha must be positive")
        if np.any(self.kappa < 0):
            raise ValueError("kappa must be non-negative")

    @property
    def n(self) -> int:
        return self.alpha.shape[-1]

    @classmethod
    def uniform(cls, n, mu, alpha=1.0, kappa=0.0, phi_p=0.0) -> "OscillatorParams":
        return cls(mu=_vec(mu, n, "mu"), alpha=_vec(alpha, n, "alpha"),
                   kappa=_vec(kappa, n, "kappa"), phi_p=phi_p)

    @classmethod
    def from_dict(cls, d: dict, n: int) -> "OscillatorParams":
        """Build from a parameter file; scalars broadcast to length ``n``."""
        return cls.uniform(n, d.get("mu", 0.6), d.get("alpha", 1.0),
                           d.get("kappa", 0.05), d.get("phi_p", 0.0))


def _check_coupling_matrix(m, name):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=0, atol=1e-12):
        raise SymmetryError(f"{name} must be symmetric")
    if np.any(np.diag(m) != 0):
        raise SymmetryError(f"{name} must have a zero diagonal")
    return m


@dataclass(frozen=True, eq=False)
class CouplingSet:
    """Normal (``J``) and conjugate (``G``) couplings with global gain ``xi``."""

    J: np.ndarray
    G: np.ndarray
    xi: float = 1.0
    gamma: float = 0.5

    def __post_init__(self):
        J = _check_coupling_matrix(self.J, "J")
        G = _check_coupling_matrix(self.G, "G")
        if J.shape != G.shape:
            raise DimensionError(f"J {J.shape} and G {G.shape} differ in shape")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "xi", float(self.xi))

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def effective(self) -> np.ndarray:
        """Readout coupling ``J + G``."""
        return self.J + self.G


def split_couplings(instance: IsingInstance, gamma: float = 0.5, xi: float = 1.0) -> CouplingSet:
    """``J = gamma W``, ``G = (1 - gamma) W`` so that ``J + G == W`` for every split."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    w = instance.weights
    return CouplingSet(J=gamma * w, G=(1.0 - gamma) * w, xi=xi, gamma=gamma)


@dataclass(frozen=True, eq=False)
class NetworkState:
    """A network state tagged by representation.

    complex           ``a``
    amp_phase         ``r``, ``theta``
    phase_only        ``theta``
    stationary_phase  ``phi`` at time ``t``
    """

    representation: str
    a: np.ndarray | None = None
    r: np.ndarray | None = None
    theta: np.ndarray | None = None
    phi: np.ndarray | None = None
    t: float = 0.0

    def __post_init__(self):
        populated = {
            "complex": ("a",),
            "amp_phase": ("r", "theta"),
            "phase_only": ("theta",),
            "stationary_phase": ("phi",),
        }
        if self.representation not in populated:
            raise ValueError(f"unknown representation {self.representation!r}")
        want = populated[self.representation]
        for name in ("a", "r", "theta", "phi"):
            present = getattr(self, name) is not None
            if present != (name in want):
                raise ValueError(f"{self.representation} state must populate exactly {want}")
        if self.r is not None and np.any(np.asarray(self.r) < 0):
            raise ValueError("amplitudes must be non-negative")

    @classmethod
    def from_complex(cls, a) -> "NetworkState":
        return cls("complex", a=np.asarray(a, dtype=complex))

    @classmethod
    def from_amp_phase(cls, r, theta) -> "NetworkState":
        return cls("amp_phase", r=np.asarray(r, dtype=float), theta=np.asarray(theta, dtype=float))

    @classmethod
    def from_phases(cls, theta) -> "NetworkState":
        return cls("phase_only", theta=np.asarray(theta, dtype=float))

    @classmethod
    def from_stationary(cls, phi, t=0.0) -> "NetworkState":
        return cls("stationary_phase", phi=np.asarray(phi, dtype=float), t=float(t))

    def to_complex(self) -> "NetworkState":
        if self.representation == "complex":
            return self
        if self.representation == "amp_phase":
            return NetworkState.from_complex(self.r * np.exp(1j * self.theta))
        raise ValueError(f"{self.representation} state has no amplitude")

    def to_amp_phase(self) -> "NetworkState":
        if self.representation == "amp_phase":
            return self
        if self.representation == "complex":
            return NetworkState.from_amp_phase(np.abs(self.a), np.angle(self.a))
        raise ValueError(f"{self.representation} state has no amplitude")

    def as_array(self) -> np.ndarray:
        """Packed array the integrators step (amp_phase packs r, theta on axis -2)."""
        if self.representation == "complex":
            return np.array(self.a, dtype=complex)
        if self.representation == "amp_phase":
            return np.stack([self.r, self.theta], axis=-2).astype(float)
        if self.representation == "phase_only":
            return np.array(self.theta, dtype=float)
        return np.array(self.phi, dtype=float)


@dataclass(frozen=True)
class DopoParams:
    """Normalized DOPO pump rate with the physical rates used for rescaling."""

    p0: float
    gamma_s: float = 1.0
    alpha_nl: float = 1.0
    phi_p: float = 0.0

    def __post_init__(self):
        if self.gamma_s <= 0 or self.alpha_nl <= 0:
            raise ValueError("gamma_s and alpha_nl must be positive")


@dataclass(frozen=True, eq=False)
class DopoMapping:
    """Single-oscillator Stuart-Landau parameters equivalent to a DOPO.

    ``a(t) = amplitude_scale * z(time_scale * t)``: one unit of oscillator
    time is ``time_scale`` units of normalized DOPO time.
    """

    params: OscillatorParams
    amplitude_scale: float
    time_scale: float = field(default=1.0)


def dopo_to_sl_params(dopo: DopoParams) -> DopoMapping:
    if dopo.gamma_s <= 0 or dopo.alpha_nl <= 0:
        raise ValueError("gamma_s and alpha_nl must be positive")
    params = OscillatorParams.uniform(
        1, mu=-dopo.gamma_s, alpha=dopo.alpha_nl, kappa=dopo.p0 * dopo.gamma_s, phi_p=dopo.phi_p
    )
    return DopoMapping(params, float(np.sqrt(dopo.gamma_s / dopo.alpha_nl)), float(dopo.gamma_s))


def _mv(x, m):
    """``x @ m`` over the last axis; einsum keeps each row's bits independent of batch size."""
    return np.einsum("...j,jk->...k", x, m)


def _check_n(x, n):
    if x.shape[-1] != n:
        raise DimensionError(f"state has {x.shape[-1]} oscillators, couplings have {n}")


def sl_rhs(a, params: OscillatorParams, coupling: CouplingSet, xi=None):
    """da/dt of the conjugate Stuart-Landau network.

    ``xi`` overrides ``coupling.xi`` (used when the gain follows a schedule).
    """
    a = np.asarray(a)
    _check_n(a, coupling.n)
    _check_n(a, params.n)
    xi = coupling.xi if xi is None else xi
    ac = np.conj(a)
    onsite = (params.mu - params.alpha * (a.real**2 + a.imag**2)) * a
    pump = params.kappa * np.exp(1j * params.phi_p) * ac
    return onsite + pump + xi * (_mv(a, coupling.J) + _mv(ac, coupling.G))


def ampphase_rhs(r, theta, params: OscillatorParams, coupling: CouplingSet, xi=None,
                 r_floor=R_FLOOR):
    """(dr/dt, dtheta/dt) of the network in amplitude-phase form, any pump phase.

    The phase equation divides by ``r_i``; amplitudes below ``r_floor`` are
    clamped there and a ``ClampedDivisionWarning`` is emitted.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check_n(r, coupling.n)
    _check_n(theta, coupling.n)
    xi = coupling.xi if xi is None else xi
    r_dot, theta_dot, clamped = _ampphase(r, theta, params, coupling, xi, r_floor)
    if clamped:
        warnings.warn(f"{clamped} amplitude(s) below r_floor={r_floor:g}",
                      ClampedDivisionWarning, stacklevel=2)
    return r_dot, theta_dot


def _ampphase(r, theta, params, coupling, xi, r_floor):
    c, s = np.cos(theta), np.sin(theta)
    rc, rs = r * c, r * s
    J, G = coupling.J, coupling.G
    # sum_j J r_j cos(th_j - th_i) = c_i (J rc)_i + s_i (J rs)_i, and similarly for sin and G.
    Jrc, Jrs, Grc, Grs = _mv(rc, J), _mv(rs, J), _mv(rc, G), _mv(rs, G)
    normal_cos = c * Jrc + s * Jrs
    normal_sin = c * Jrs - s * Jrc
    conj_cos = c * Grc - s * Grs
    conj_sin = s * Grc + c * Grs
    two = 2.0 * theta - params.phi_p
    r_dot = ((params.mu - params.alpha * r**2) * r + params.kappa * r * np.cos(two)
             + xi * (normal_cos + conj_cos))
    low = r < r_floor
    clamped = int(np.count_nonzero(low))
    if clamped:
        r = np.where(low, r_floor, r)
    theta_dot = -params.kappa * np.sin(two) + xi * (normal_sin - conj_sin) / r
    return r_dot, theta_dot, clamped


def poim_phase_rhs(theta, Ks, K, J, G):
    """-Ks sin 2th_i - K sum_j [J_ij sin(th_i - th_j) + G_ij sin(th_i + th_j)]."""
    theta = np.asarray(theta, dtype=float)
    J = np.asarray(J, dtype=float)
    G = np.asarray(G, dtype=float)
    _check_n(theta, J.shape[0])
    _check_n(theta, G.shape[0])
    c, s = np.cos(theta), np.sin(theta)
    Jc, Js, Gc, Gs = _mv(c, J), _mv(s, J), _mv(c, G), _mv(s, G)
    diff = s * Jc - c * Js
    summ = s * Gc + c * Gs
    return -Ks * np.sin(2.0 * theta) - K * (diff + summ)


def oim_rhs(theta, Ks, K, J):
    """-Ks sin 2th_i - K sum_j J_ij sin(th_i - th_j)."""
    theta = np.asarray(theta, dtype=float)
    J = np.asarray(J, dtype=float)
    _check_n(theta, J.shape[0])
    c, s = np.cos(theta), np.sin(theta)
    return -Ks * np.sin(2.0 * theta) - K * (s * _mv(c, J) - c * _mv(s, J))


def stationary_rhs(phi, t, K, J):
    """Lab-frame phase drift with the carrier frequency normalized to 1.

    -(K/2) sum_j J_ij [sin(ph_i - ph_j) + sin(2t + ph_i + ph_j)] - 1
    """
    phi = np.asarray(phi, dtype=float)
    J = np.asarray(J, dtype=float)
    _check_n(phi, J.shape[0])
    c, s = np.cos(phi), np.sin(phi)
    diff = s * _mv(c, J) - c * _mv(s, J)
    # sin(2t + ph_i + ph_j) = sin(t + ph_i) cos(t + ph_j) + cos(t + ph_i) sin(t + ph_j)
    ct, st = np.cos(t + phi), np.sin(t + phi)
    summ = st * _mv(ct, J) + ct * _mv(st, J)
    return -0.5 * K * (diff + summ) - 1.0


def dopo_rhs(c, s, p0):
    """Uncoupled normalized DOPO quadratures (pump adiabatically eliminated)."""
    c = np.asarray(c, dtype=float)
    s = np.asarray(s, dtype=float)
    sat = c**2 + s**2
    return (-1.0 + p0) * c - sat * c, -(1.0 + p0) * s - sat * s


def dopo_complex_rhs(z, p0, phi_p=0.0):
    """The same DOPO written for ``z = c + i s``."""
    z = np.asarray(z, dtype=complex)
    return -z - (z.real**2 + z.imag**2) * z + p0 * np.exp(1j * phi_p) * np.conj(z)
