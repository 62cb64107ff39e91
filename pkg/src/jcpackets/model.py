"""Driven Jaynes-Cummings model in the rotating frame of the drive.

Units: hbar = 1 and the coupling g sets the scale, so times are g*t and
frequencies are in units of g.

The state vector interleaves the two TLS ladders::

    psi = [G0, X0, G1, X1, ..., GN, XN]

With this ordering the Hamiltonian is a tridiagonal matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from .errors import ConfigError

SQRT_HALF = 1.0 / math.sqrt(2.0)
TAIL_WIDTH = 5
DEFAULT_TAIL_THRESHOLD = 1e-10


@dataclass(frozen=True)
class SystemParams:
    """Coupling ``g`` and cavity-drive detuning ``delta`` (hbar = 1)."""

    g: float = 1.0
    delta: float = 0.0
    hbar_convention: bool = field(default=True, init=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.g) and self.g > 0):
            raise ConfigError(f"coupling g must be positive, got {self.g}")
        if not math.isfinite(self.delta):
            raise ConfigError(f"detuning must be finite, got {self.delta}")
        if self.delta < 0:
            raise ConfigError("negative detuning is not supported")


@dataclass(frozen=True)
class DriveProtocol:
    """Piecewise-constant driving strength.

    ``steps`` holds ``(tau_j, f_j)`` pairs with ``tau_0 = 0``. The level
    ``f_j`` applies on the right-open interval ``[tau_j, tau_{j+1})``.
    """

    steps: tuple[tuple[float, float], ...]

    def __post_init__(self):
        steps = tuple((float(t), float(f)) for t, f in self.steps)
        if not steps:
            raise ConfigError("a protocol needs at least one level")
        if steps[0][0] != 0.0:
            raise ConfigError("the first step must start at t = 0")
        taus = [t for t, _ in steps]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ConfigError("step times must be strictly increasing")
        if any(not (math.isfinite(f) and f >= 0) for _, f in steps):
            raise ConfigError("driving strengths must be finite and >= 0")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def constant(cls, f: float) -> "DriveProtocol":
        return cls(((0.0, f),))

    @classmethod
    def from_levels(cls, f0: float, changes: Iterable[tuple[float, float]] = ()) -> "DriveProtocol":
        return cls(((0.0, f0), *changes))

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.steps])

    @property
    def levels(self) -> np.ndarray:
        return np.array([f for _, f in self.steps])

    @property
    def f_max(self) -> float:
        return max(f for _, f in self.steps)

    def __call__(self, t: float) -> float:
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.steps[max(int(idx), 0)][1]

    def extend(self, tau: float, f: float) -> "DriveProtocol":
        return DriveProtocol(self.steps + ((tau, f),))

    def segments(self, t_end: float):
        """Yield ``(t_start, t_stop, f)`` for each interval inside [0, t_end)."""
        for j, (tau, f) in enumerate(self.steps):
            if tau >= t_end:
                break
            stop = self.steps[j + 1][0] if j + 1 < len(self.steps) else t_end
            yield tau, min(stop, t_end), f

    def to_text(self) -> str:
        return "".join(f"{t:.17g} {f:.17g}\n" for t, f in self.steps)

    @classmethod
    def from_text(cls, text: str) -> "DriveProtocol":
        steps = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"protocol line {lineno}: expected 'tau f'")
            try:
                steps.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ConfigError(f"protocol line {lineno}: {exc}") from None
        return cls(tuple(steps))


@dataclass(frozen=True, eq=False)
class FockState:
    """Amplitudes over the bare states |G,n>, |X,n> for n = 0..n_max."""

    psi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex)
        if psi.ndim != 1 or psi.size < 4 or psi.size % 2:
            raise ConfigError("state vector must have even length >= 4")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def from_ladders(cls, amps_g, amps_x, time=0.0) -> "FockState":
        amps_g = np.asarray(amps_g, dtype=complex)
        amps_x = np.asarray(amps_x, dtype=complex)
        if amps_g.shape != amps_x.shape:
            raise ConfigError("ladders must have equal length")
        psi = np.empty(2 * amps_g.size, dtype=complex)
        psi[0::2] = amps_g
        psi[1::2] = amps_x
        return cls(psi, time)

    @property
    def n_max(self) -> int:
        return self.psi.size // 2 - 1

    @property
    def amps_g(self) -> np.ndarray:
        return self.psi[0::2]

    @property
    def amps_x(self) -> np.ndarray:
        return self.psi[1::2]

    def norm2(self) -> float:
        return float(np.vdot(self.psi, self.psi).real)

    def tail_occupation(self, width: int = TAIL_WIDTH) -> float:
        p = np.abs(self.amps_g) ** 2 + np.abs(self.amps_x) ** 2
        return float(p[self.n_max + 1 - width:].sum())

    def is_under_truncated(self, threshold: float = DEFAULT_TAIL_THRESHOLD) -> bool:
        return self.tail_occupation() > threshold


def hamiltonian_action(psi: np.ndarray, params: SystemParams, f: float) -> np.ndarray:
    """Return H psi for an interleaved state vector (matrix-free)."""
    cg = psi[0::2]
    cx = psi[1::2]
    n = np.arange(cg.size)
    out = np.empty_like(psi)
    hg = params.delta * n * cg - f * cx
    hx = params.delta * n * cx - f * cg
    # a sigma_+ couples |G,n> -> |X,n-1> with sqrt(n)
    sq = params.g * np.sqrt(n[1:])
    hg[1:] += sq * cx[:-1]
    hx[:-1] += sq * cg[1:]
    out[0::2] = hg
    out[1::2] = hx
    return out


def apply_hamiltonian(state: FockState, params: SystemParams, f: float) -> np.ndarray:
    """H|psi> as an interleaved amplitude vector (not normalized)."""
    if f < 0:
        raise ConfigError("driving strength must be >= 0")
    return hamiltonian_action(state.psi, params, f)


def hamiltonian_matrix(n_max: int, params: SystemParams, f: float) -> sp.csr_matrix:
    """Sparse tridiagonal Hamiltonian in the interleaved bare basis."""
    dim = 2 * (n_max + 1)
    diag = params.delta * np.repeat(np.arange(n_max + 1), 2).astype(float)
    off = np.empty(dim - 1)
    off[0::2] = -f  # G_n <-> X_n
    off[1::2] = params.g * np.sqrt(np.arange(1, n_max + 1))  # X_{n-1} <-> G_n
    return sp.diags([off, diag, off], [-1, 0, 1], format="csr")


def lds_amplitudes(state: FockState) -> tuple[np.ndarray, np.ndarray]:
    """Return (<Phi+,n|psi>, <Phi-,n|psi>) for n = 0..n_max."""
    cg, cx = state.amps_g, state.amps_x
    return (cg + cx) * SQRT_HALF, (cg - cx) * SQRT_HALF


to_lds = lds_amplitudes


def from_lds(plus, minus, time: float = 0.0) -> FockState:
    plus = np.asarray(plus, dtype=complex)
    minus = np.asarray(minus, dtype=complex)
    return FockState.from_ladders((plus + minus) * SQRT_HALF, (plus - minus) * SQRT_HALF, time)


def make_initial_state(kind: str, n_max: int) -> FockState:
    """|G,0>, |Phi+,0> or |Phi-,0> in a basis truncated at ``n_max``."""
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    g = np.zeros(n_max + 1, dtype=complex)
    x = np.zeros(n_max + 1, dtype=complex)
    if kind == "ground":
        g[0] = 1.0
    elif kind == "lds_plus":
        g[0], x[0] = SQRT_HALF, SQRT_HALF
    elif kind == "lds_minus":
        g[0], x[0] = SQRT_HALF, -SQRT_HALF
    else:
        raise ConfigError(f"unknown initial state {kind!r}")
    return FockState.from_ladders(g, x)


def coherent_amplitudes(z: complex, n_max: int) -> np.ndarray:
    """Fock amplitudes of the coherent state |z>, truncated at n_max."""
    amps = np.zeros(n_max + 1, dtype=complex)
    if z == 0:
        amps[0] = 1.0
        return amps
    n = np.arange(n_max + 1)
    log_mag = -0.5 * abs(z) ** 2 + n * math.log(abs(z)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(z))


def product_state(tls: Sequence[complex], z: complex, n_max: int, time: float = 0.0) -> FockState:
    """(alpha|G> + beta|X>) x |z>, the single-packet variational ansatz."""
    alpha, beta = tls
    c = coherent_amplitudes(z, n_max)
    return FockState.from_ladders(alpha * c, beta * c, time)


def truncation_for(max_abs_z2: float) -> int:
    """Cutoff for a packet whose mean photon number peaks at ``max_abs_z2``.

    Coherent packets have Poissonian width ~ sqrt(n), hence the
    8-sigma margin plus a fixed offset.
    """
    m = math.ceil(max(max_abs_z2, 0.0))
    return int(m + math.ceil(8.0 * math.sqrt(m)) + 20)
