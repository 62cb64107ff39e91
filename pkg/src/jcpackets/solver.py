"""Exact dynamics in the truncated bare basis with fixed-step RK4.

For a constant drive level the RK4 update of i dpsi/dt = H psi is the
linear map ``M = T4(-i H dt)`` with ``T4`` the fourth-order Taylor
polynomial.  The default ``method="propagator"`` forms ``M`` once per drive
level and applies ``M**k`` for whole sampling strides; this is the same
scheme as stepping ``k`` times, evaluated with dense linear algebra.
``method="stepwise"`` applies the Hamiltonian matrix-free at every step.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NormDriftError, UnderTruncationError
from .model import (DEFAULT_TAIL_THRESHOLD, TAIL_WIDTH, DriveProtocol, FockState, SystemParams,
                    hamiltonian_action, hamiltonian_matrix, lds_amplitudes)

log = logging.getLogger(__name__)

DT_FACTOR = 0.01
DEFAULT_STRIDE = 0.1
DEFAULT_NORM_TOL = 1e-6
LDS_FLOOR = 1e-12


# --- observables -------------------------------------------------------------

def _pn(psi: np.ndarray) -> np.ndarray:
    return np.abs(psi[0::2]) ** 2 + np.abs(psi[1::2]) ** 2


def photon_distribution(state: FockState) -> np.ndarray:
    """P_n = |<G,n|psi>|^2 + |<X,n|psi>|^2."""
    return _pn(state.psi)


def mean_photon_number(state: FockState) -> float:
    p = _pn(state.psi)
    return float(np.dot(np.arange(p.size), p))


def lds_inversion(state: FockState) -> float:
    """Sum over n of |<Phi+,n|psi>|^2 - |<Phi-,n|psi>|^2 (= 2 Re sum conj(c_G) c_X)."""
    return float(2.0 * np.vdot(state.amps_g, state.amps_x).real)


def lds_measure(state: FockState, floor: float = LDS_FLOOR) -> np.ndarray:
    """Photon-number resolved LDS imbalance; NaN where P_n <= floor."""
    plus, minus = lds_amplitudes(state)
    pp, pm = np.abs(plus) ** 2, np.abs(minus) ** 2
    tot = pp + pm
    out = np.full(tot.size, np.nan)
    ok = tot > floor
    out[ok] = (pp[ok] - pm[ok]) / tot[ok]
    return out


def expectation_H(state: FockState, params: SystemParams, f: float) -> float:
    val = np.vdot(state.psi, hamiltonian_action(state.psi, params, f))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"<H> has imaginary part {val.imag:g}")
    return float(val.real)


# --- time stepping -----------------------------------------------------------

def estimate_omega_max(n_max: int, params: SystemParams, f_max: float) -> float:
    return 2.0 * f_max + params.delta * n_max + 2.0 * params.g * math.sqrt(n_max)


def default_dt(n_max: int, params: SystemParams, f_max: float) -> float:
    return DT_FACTOR / estimate_omega_max(n_max, params, f_max)


def rk4_step(psi: np.ndarray, params: SystemParams, f: float, dt: float) -> np.ndarray:
    def rhs(v):
        return -1j * hamiltonian_action(v, params, f)

    k1 = rhs(psi)
    k2 = rhs(psi + 0.5 * dt * k1)
    k3 = rhs(psi + 0.5 * dt * k2)
    k4 = rhs(psi + dt * k3)
    return psi + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


class _Propagator:
    """Powers of the single-step RK4 map for one drive level."""

    def __init__(self, n_max, params, f, dt):
        a = -1j * dt * hamiltonian_matrix(n_max, params, f).toarray()
        eye = np.eye(a.shape[0], dtype=complex)
        m = eye + a / 4.0
        m = eye + (a / 3.0) @ m
        m = eye + (a / 2.0) @ m
        self._pow2 = [eye + a @ m]
        self._cache: dict[int, np.ndarray] = {}

    def _p2(self, i):
        while len(self._pow2) <= i:
            last = self._pow2[-1]
            self._pow2.append(last @ last)
        return self._pow2[i]

    def matrix(self, k: int) -> np.ndarray:
        if k not in self._cache:
            out = None
            for i in range(k.bit_length()):
                if k >> i & 1:
                    out = self._p2(i) if out is None else self._p2(i) @ out
            self._cache[k] = out
        return self._cache[k]

    def apply(self, psi, k):
        return psi if k == 0 else self.matrix(k) @ psi


class _Stepper:
    def __init__(self, params, f, dt):
        self.params, self.f, self.dt = params, f, dt

    def apply(self, psi, k):
        for _ in range(k):
            psi = rk4_step(psi, self.params, self.f, self.dt)
        return psi


@dataclass(eq=False)
class Trajectory:
    """Sampled exact evolution on the half-open grid [0, t_end)."""

    times: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    mean_n: np.ndarray
    inversion: np.ndarray
    pn: np.ndarray
    params: SystemParams
    protocol: DriveProtocol
    dt: float
    final_state: FockState
    snapshots: dict = field(default_factory=dict)
    states: np.ndarray | None = None

    @property
    def n_max(self) -> int:
        return self.final_state.n_max

    def state_at(self, t: float) -> FockState:
        """Stored state closest to ``t`` (snapshots first, then all samples)."""
        for ts, st in self.snapshots.items():
            if abs(ts - t) < 1e-9:
                return st
        if self.states is None:
            raise KeyError(f"no state stored at t = {t}")
        k = int(np.argmin(np.abs(self.times - t)))
        return FockState(self.states[k], float(self.times[k]))

    def lds_measures(self) -> np.ndarray:
        if self.states is None:
            raise ValueError("evolve with keep_states=True to get l_n(t)")
        return np.array([lds_measure(FockState(s)) for s in self.states])

    def write_observables(self, path) -> None:
        rows = np.column_stack([self.times, self.norm, self.energy, self.mean_n, self.inversion])
        _savecsv(path, rows, "t,norm,energy,mean_n,lds_inversion")

    def write_pn(self, path) -> None:
        header = "t," + ",".join(f"P{n}" for n in range(self.n_max + 1))
        rows = np.column_stack([self.times, self.pn]) if len(self.times) else np.empty((0, 0))
        _savecsv(path, rows, header)

    def write_lds_measure(self, path) -> None:
        header = "t," + ",".join(f"l{n}" for n in range(self.n_max + 1))
        rows = (np.column_stack([self.times, self.lds_measures()])
                if len(self.times) else np.empty((0, 0)))
        _savecsv(path, rows, header)


def _savecsv(path, rows, header):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def evolve(initial: FockState, params: SystemParams, protocol: DriveProtocol, t_end: float,
           dt: float | None = None, sample_stride: float = DEFAULT_STRIDE,
           snapshot_times=(), keep_states: bool = False, method: str = "propagator",
           norm_tol: float = DEFAULT_NORM_TOL,
           tail_threshold: float = DEFAULT_TAIL_THRESHOLD) -> Trajectory:
    """Integrate i dpsi/dt = H(f(t)) psi from t = 0.

    Samples are taken at k * sample_stride for k * sample_stride < t_end.
    ``dt`` is shrunk so that a stride is a whole number of steps; step
    times of the protocol are snapped to that grid.  Raises
    ``UnderTruncationError`` or ``NormDriftError`` at the first failing sample.
    """
    if t_end < 0:
        raise ConfigError("t_end must be >= 0")
    if sample_stride <= 0:
        raise ConfigError("sample_stride must be positive")
    n_max = initial.n_max
    if dt is None:
        dt = default_dt(n_max, params, protocol.f_max)
    if dt <= 0:
        raise ConfigError("dt must be positive")
    per_sample = max(1, math.ceil(sample_stride / dt - 1e-9))
    dt = sample_stride / per_sample
    n_samples = math.ceil(t_end / sample_stride - 1e-9) if t_end > 0 else 0
    total_steps = n_samples * per_sample

    # drive level per step index
    bounds = []
    for tau, f in protocol.steps:
        k = int(round(tau / dt))
        if abs(k * dt - tau) > 1e-9 * max(1.0, tau):
            warnings.warn(f"step time {tau} snapped to {k * dt}", stacklevel=2)
        bounds.append((k, f))

    def level_at(k):
        f = bounds[0][1]
        for kb, fb in bounds:
            if kb <= k:
                f = fb
        return f

    def next_change(k):
        for kb, _ in bounds:
            if kb > k:
                return kb
        return None

    if method == "propagator":
        make = lambda f: _Propagator(n_max, params, f, dt)  # noqa: E731
    elif method == "stepwise":
        make = lambda f: _Stepper(params, f, dt)  # noqa: E731
    else:
        raise ConfigError(f"unknown method {method!r}")
    props: dict[float, object] = {}

    def prop(f):
        if f not in props:
            props[f] = make(f)
        return props[f]

    snap_steps = {}
    for ts in snapshot_times:
        k = int(round(ts / dt))
        snap_steps.setdefault(k, []).append(float(ts))

    times = np.arange(n_samples) * sample_stride
    norm = np.empty(n_samples)
    energy = np.empty(n_samples)
    mean_n = np.empty(n_samples)
    inversion = np.empty(n_samples)
    pn = np.empty((n_samples, n_max + 1))
    states = np.empty((n_samples, 2 * (n_max + 1)), dtype=complex) if keep_states else None
    snapshots = {}
    nvec = np.arange(n_max + 1)

    psi = np.array(initial.psi, dtype=complex)
    norm0 = float(np.vdot(psi, psi).real)
    stops = sorted(set([s * per_sample for s in range(n_samples)] +
                       [k for k in snap_steps if 0 <= k <= int(round(t_end / dt))]))
    k = 0
    for stop in stops:
        while k < stop:
            f = level_at(k)
            nc = next_change(k)
            upto = stop if nc is None else min(stop, nc)
            psi = prop(f).apply(psi, upto - k)
            k = upto
        t = k * dt
        for ts in snap_steps.get(k, ()):
            snapshots[ts] = FockState(psi.copy(), t)
        if k % per_sample or k >= total_steps:
            continue
        s = k // per_sample
        f = level_at(k)
        p = _pn(psi)
        nrm = float(p.sum())
        if abs(nrm - norm0) > norm_tol:
            raise NormDriftError(f"norm drift {nrm - norm0:.3g} at t = {t:.6g}", time=t)
        tail = float(p[n_max + 1 - TAIL_WIDTH:].sum())
        if tail > tail_threshold:
            raise UnderTruncationError(
                f"tail occupation {tail:.3g} exceeds {tail_threshold:g} at t = {t:.6g} "
                f"(n_max = {n_max})", time=t)
        norm[s] = nrm
        energy[s] = np.vdot(psi, hamiltonian_action(psi, params, f)).real
        mean_n[s] = float(np.dot(nvec, p))
        inversion[s] = 2.0 * np.vdot(psi[0::2], psi[1::2]).real
        pn[s] = p
        if keep_states:
            states[s] = psi
    # advance to t_end so the final state is available
    end_step = int(round(t_end / dt))
    while k < end_step:
        f = level_at(k)
        nc = next_change(k)
        upto = end_step if nc is None else min(end_step, nc)
        psi = prop(f).apply(psi, upto - k)
        k = upto
    for ts in snap_steps.get(k, ()):
        snapshots.setdefault(ts, FockState(psi.copy(), k * dt))
    return Trajectory(times, norm, energy, mean_n, inversion, pn, params, protocol, dt,
                      FockState(psi, k * dt), snapshots, states)
