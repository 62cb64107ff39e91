"""Reduced single-packet model: coherent photon state times a TLS state.

Each packet follows one eigenbranch ``j`` of the instantaneous TLS
Hamiltonian

    H_TLS(z) = [[0, g z* - f], [g z - f, 0]]

with eigenfrequencies ``omega_{1/2} = -/+ |g z - f|``.  In the adiabatic
limit the coherent amplitude obeys

    i dz/dt = delta z -/+ (g/2) (z - f/g) / |z - f/g|

(upper sign for branch 1).  Everything here is a pure function of scalars.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DegeneratePoint, NearDegeneracy
from .model import SystemParams

DEGENERACY_FLOOR = 1e-9


def _sign(branch: int) -> int:
    if branch == 1:
        return -1
    if branch == 2:
        return 1
    raise ConfigError(f"branch must be 1 or 2, got {branch!r}")


@dataclass(frozen=True)
class BranchState:
    """One packet of the reduced model at time ``time``."""

    branch: int
    z: complex
    weight: float = 1.0
    time: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        _sign(self.branch)
        if not 0.0 <= self.weight <= 1.0 + 1e-12:
            raise ConfigError(f"weight must lie in [0, 1], got {self.weight}")


class TlsEigenpair(NamedTuple):
    omega: float
    phi_g: complex
    phi_x: complex


def _unit(z: complex, f: float, params: SystemParams, eps: float | None) -> complex:
    w = params.g * z - f
    floor = DEGENERACY_FLOOR * max(f, params.g) if eps is None else eps
    if abs(w) <= floor:
        raise DegeneratePoint(f"z = {z} is at the degeneracy point f/g = {f / params.g}")
    return w / abs(w)


def tls_eigenpair(z: complex, f: float, params: SystemParams, branch: int,
                  eps: float | None = None) -> TlsEigenpair:
    """Eigenvector of H_TLS(z) on ``branch``, with phi_g real and positive.

    The amplitudes satisfy conj(phi_g) * phi_x = -/+ (g z - f) / (2 |g z - f|).
    """
    s = _sign(branch)
    u = _unit(complex(z), f, params, eps)
    omega = s * abs(params.g * z - f)
    return TlsEigenpair(omega, complex(math.sqrt(0.5)), s * u * math.sqrt(0.5))


def lambda_of_z(z, f: float, params: SystemParams, branch: int, eps: float | None = None):
    """Signed LDS imbalance |<Phi+|phi_j>|^2 - |<Phi-|phi_j>|^2.

    Vectorized over ``z``.
    """
    s = _sign(branch)
    z = np.asarray(z, dtype=complex)
    w = z - f / params.g
    floor = DEGENERACY_FLOOR * max(f, params.g) if eps is None else eps
    if np.any(np.abs(w) * params.g <= floor):
        raise DegeneratePoint("lambda is undefined at z = f/g")
    lam = s * w.real / np.abs(w)
    return float(lam) if lam.ndim == 0 else lam


def transition_probability(z: complex, f0: float, f1: float, params: SystemParams,
                           branch_from: int, branch_to: int) -> float:
    """|<phi_j(f0), phi_k(f1)>|^2 at coherent amplitude ``z``."""
    a = tls_eigenpair(z, f0, params, branch_from)
    b = tls_eigenpair(z, f1, params, branch_to)
    amp = a.phi_g.conjugate() * b.phi_g + a.phi_x.conjugate() * b.phi_x
    return abs(amp) ** 2


def overlap_S(f0: float, f1: float, z: complex, params: SystemParams) -> float:
    """Weight transferred from branch 2 under ``f0`` to branch 1 under ``f1``."""
    return transition_probability(z, f0, f1, params, 2, 1)


def overlap_S_array(f0: float, f1: float, z, params: SystemParams) -> np.ndarray:
    """Vectorized ``overlap_S``; equals (1 - Re(conj(u0) u1)) / 2."""
    z = np.asarray(z, dtype=complex)
    w0 = params.g * z - f0
    w1 = params.g * z - f1
    return 0.5 * (1.0 - (np.conj(w0) * w1).real / (np.abs(w0) * np.abs(w1)))


def energy(z, f: float, params: SystemParams, branch: int):
    """<H> of the adiabatic branch: delta |z|^2 -/+ |g z - f|."""
    s = _sign(branch)
    z = np.asarray(z, dtype=complex)
    return params.delta * np.abs(z) ** 2 + s * np.abs(params.g * z - f)


@dataclass(frozen=True, eq=False)
class BranchTrajectory:
    times: np.ndarray
    z: np.ndarray
    branch: int
    f: float
    params: SystemParams

    @property
    def final(self) -> complex:
        return complex(self.z[-1])

    def energy(self) -> np.ndarray:
        return energy(self.z, self.f, self.params, self.branch)

    def energy_residual(self) -> np.ndarray:
        e = self.energy()
        return e - e[0]

    def lam(self) -> np.ndarray:
        return lambda_of_z(self.z, self.f, self.params, self.branch)

    def to_csv(self, path) -> None:
        rows = np.column_stack([self.times, self.z.real, self.z.imag,
                                np.abs(self.z) ** 2, self.lam(), self.energy_residual()])
        np.savetxt(path, rows, delimiter=",", fmt="%.17g",
                   header="t,re_z,im_z,abs_z2,lambda,energy_residual", comments="")


def default_dt(f: float, params: SystemParams) -> float:
    """1e-3 of the shorter of the detuning period and the resonant period."""
    periods = [4.0 * math.pi * f / params.g ** 2] if f > 0 else []
    if params.delta > 0:
        periods.append(2.0 * math.pi / params.delta)
    if not periods:
        raise ConfigError("need f > 0 or delta > 0 to pick a time step")
    return 1e-3 * min(periods)


def evolve_branch(z0: complex, branch: int, f: float, params: SystemParams, t_end: float,
                  dt: float | None = None, t0: float = 0.0,
                  eps: float | None = None) -> BranchTrajectory:
    """Integrate the adiabatic equation for ``z`` with fixed-step RK4.

    ``t_end`` is a duration. The last step is shortened so the trajectory
    ends exactly at ``t0 + t_end``.  Raises ``NearDegeneracy`` with the
    first contact time if ``|z - f/g|`` drops below ``eps``.
    """
    if t_end < 0:
        raise ConfigError("t_end must be >= 0")
    if dt is None:
        dt = default_dt(f, params)
    s = _sign(branch)
    g, d = params.g, params.delta
    c = f / g
    half_g = 0.5 * g * s
    floor = DEGENERACY_FLOOR * max(f, g) / g if eps is None else eps

    def rhs(z):
        w = z - c
        r = abs(w)
        if r <= floor:
            raise _Contact
        return -1j * (d * z + half_g * w / r)

    n_full = int(math.floor(t_end / dt + 1e-9))
    rest = t_end - n_full * dt
    steps = [dt] * n_full
    if rest > 1e-12 * max(dt, 1.0):
        steps.append(rest)
    times = np.empty(len(steps) + 1)
    zs = np.empty(len(steps) + 1, dtype=complex)
    z = complex(z0)
    t = t0
    times[0], zs[0] = t, z
    try:
        rhs(z)
        for i, h in enumerate(steps, 1):
            k1 = rhs(z)
            k2 = rhs(z + 0.5 * h * k1)
            k3 = rhs(z + 0.5 * h * k2)
            k4 = rhs(z + h * k3)
            z = z + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            t = t0 + (i * dt if i <= n_full else t_end)
            times[i], zs[i] = t, z
    except _Contact:
        raise NearDegeneracy(f"branch {branch} reached z = f/g near t = {t:.6g}", time=t) from None
    return BranchTrajectory(times, zs, branch, f, params)


class _Contact(Exception):
    pass


def rk4_step(z: complex, branch: int, f: float, params: SystemParams, h: float) -> complex:
    """A single RK4 step of length ``h`` (used for sub-step refinement)."""
    traj = evolve_branch(z, branch, f, params, h, dt=h)
    return traj.final


def turning_point(branch: int, f: float, params: SystemParams) -> float:
    """Real turning point of the trajectory started at z = 0."""
    _sign(branch)
    g, d = params.g, params.delta
    if d == 0:
        return 2.0 * f / g
    if branch == 1:
        if d <= g * g / (8.0 * f):
            return g / (2.0 * d) * (1.0 - math.sqrt(1.0 - 8.0 * f * d / g ** 2))
        return -g / d
    if d <= g * g / f:
        return g / (2.0 * d) * (math.sqrt(1.0 + 8.0 * f * d / g ** 2) - 1.0)
    return g / d


class OscillationFrequency(NamedTuple):
    omega: float
    valid: bool


def oscillation_frequency(branch: int, f: float, params: SystemParams) -> OscillationFrequency:
    """Class-D packet frequency delta / sqrt(1 +/- g^2 / (2 f delta)).

    ``valid`` is False outside f*delta >= g^2, where the expansion in
    1/delta is not trustworthy; ``omega`` is NaN where the root is imaginary.
    """
    s = _sign(branch)
    g, d = params.g, params.delta
    if d == 0 or f == 0:
        return OscillationFrequency(float("nan"), False)
    arg = 1.0 - s * g * g / (2.0 * f * d)
    omega = d / math.sqrt(arg) if arg > 0 else float("nan")
    return OscillationFrequency(omega, f * d >= g * g)


def closed_form_resonant(t, f: float, params: SystemParams, branch: int):
    """z(t) at delta = 0 from z(0) = 0: a circle of radius f/g about f/g."""
    s = _sign(branch)
    g = params.g
    t = np.asarray(t, dtype=float)
    return (f / g) * (1.0 - np.exp(-1j * s * g * g * t / (2.0 * f)))


def closed_form_large_detuning(t, f: float, params: SystemParams, branch: int):
    """Harmonic large-detuning limit: z(t) = -/+ (g/2delta)(1 - exp(-i delta t))."""
    s = _sign(branch)
    g, d = params.g, params.delta
    if d == 0:
        raise ConfigError("large-detuning form needs delta > 0")
    t = np.asarray(t, dtype=float)
    return s * g / (2.0 * d) * (1.0 - np.exp(-1j * d * t))


def real_axis_crossings(traj: BranchTrajectory) -> list[tuple[float, complex]]:
    """Times and positions where Im z changes sign, refined quadratically.

    Crossings at the very first sample are skipped.
    """
    im = traj.z.imag
    t = traj.times
    out = []
    for k in range(1, len(im) - 1):
        a, b = im[k], im[k + 1]
        if a == 0.0 and k > 0 and np.sign(im[k - 1]) != np.sign(b) and im[k - 1] != 0.0:
            out.append((float(t[k]), complex(traj.z[k])))
            continue
        if a * b < 0:
            # fit Im z through three samples around the sign change
            j = k - 1 if k > 1 else k
            tt, yy = t[j:j + 3], im[j:j + 3]
            root = _quadratic_root(tt, yy, t[k], t[k + 1])
            frac = (root - t[k]) / (t[k + 1] - t[k])
            zc = traj.z[k] + frac * (traj.z[k + 1] - traj.z[k])
            out.append((float(root), complex(zc.real, 0.0)))
    return out


def _quadratic_root(tt, yy, lo, hi) -> float:
    coef = np.polyfit(tt - lo, yy, 2)
    roots = np.roots(coef)
    roots = [r.real + lo for r in roots if abs(r.imag) < 1e-12 and -1e-12 <= r.real <= hi - lo + 1e-12]
    if roots:
        return float(min(roots))
    ya, yb = np.interp([lo, hi], tt, yy)
    return float(lo + (hi - lo) * ya / (ya - yb))


def half_period(branch: int, f: float, params: SystemParams, dt: float | None = None) -> float:
    """Time of the first return of z(t) (from z = 0) to the real axis."""
    if params.delta > 0:
        guess = 2.0 * math.pi / params.delta
    else:
        guess = 4.0 * math.pi * f / params.g ** 2
    if dt is None:
        dt = 1e-4 * guess
    traj = evolve_branch(0.0, branch, f, params, 1.5 * guess, dt=dt)
    crossings = real_axis_crossings(traj)
    if not crossings:
        raise ArithmeticError("no return to the real axis found")
    return crossings[0][0]


def adiabatic_phase(traj: BranchTrajectory) -> float:
    """Integral of omega_j along the trajectory (trapezoidal)."""
    s = _sign(traj.branch)
    omega = s * np.abs(traj.params.g * traj.z - traj.f)
    return float(np.trapezoid(omega, traj.times))


def coherent_tls_amplitudes(z: complex, f: float, params: SystemParams, branch: int,
                            phase: float = 0.0) -> tuple[complex, complex]:
    """(alpha, beta) of the adiabatic branch including the dynamical phase."""
    pair = tls_eigenpair(z, f, params, branch)
    rot = cmath.exp(-1j * phase)
    return pair.phi_g * rot, pair.phi_x * rot
