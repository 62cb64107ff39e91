"""Post-processing of exact states and trajectories.

* Wigner function of the photonic reduced state, from the position-space
  wavefunctions of the two TLS ladders.
* Maximum tracking of |W| across snapshots.
* Packet detection in P_n.
* Spectrum of the mean photon number and peak matching.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal

from .errors import LostTrack, NoPeak
from .model import FockState

WIGNER_BOUND = 2.0 / math.pi


# --- Wigner function ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WignerGrid:
    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray  # shape (len(im_axis), len(re_axis))
    time: float = 0.0

    def integral(self) -> float:
        dx = self.re_axis[1] - self.re_axis[0]
        dy = self.im_axis[1] - self.im_axis[0]
        return float(self.values.sum() * dx * dy)

    def argmax_abs(self) -> complex:
        i, j = np.unravel_index(np.argmax(np.abs(self.values)), self.values.shape)
        return complex(self.re_axis[j], self.im_axis[i])

    def to_csv(self, path) -> None:
        re, im = np.meshgrid(self.re_axis, self.im_axis)
        with open(path, "w") as fh:
            fh.write("re,im,W\n")
            for a, b, w in zip(re.ravel(), im.ravel(), self.values.ravel()):
                fh.write(f"{a:.17g},{b:.17g},{w:.17g}\n")


def _ladders(state) -> list[np.ndarray]:
    if isinstance(state, FockState):
        return [np.asarray(state.amps_g), np.asarray(state.amps_x)]
    arr = np.asarray(state, dtype=complex)
    return [arr] if arr.ndim == 1 else list(arr)


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Oscillator eigenfunctions psi_n(x), n = 0..n_max, shape (n_max + 1, len(x)).

    Upward three-term recursion, which is stable for the normalized
    functions; a running log scale keeps exp(-x^2/2) from underflowing.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n_max + 1, x.size))
    log_scale = -0.5 * x ** 2 - 0.25 * math.log(math.pi)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    out[0] = cur
    scales = np.zeros((n_max + 1, x.size))
    for n in range(n_max):
        nxt = math.sqrt(2.0 / (n + 1)) * x * cur - math.sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > 1e100
        if big.any():
            cur[big] *= 1e-100
            prev[big] *= 1e-100
            log_scale[big] += 100.0 * math.log(10.0)
        out[n + 1] = cur
        scales[n + 1] = log_scale
    scales[0] = -0.5 * x ** 2 - 0.25 * math.log(math.pi)
    with np.errstate(under="ignore"):
        return out * np.exp(scales)


def _hermite_sums(vecs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """sum_n v_n psi_n(x) for each row v of ``vecs``, without storing psi_n."""
    x = np.asarray(x, dtype=float)
    log_scale = -0.5 * x ** 2 - 0.25 * math.log(math.pi)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    acc = vecs[:, :1] * cur
    for n in range(vecs.shape[1] - 1):
        prev, cur = cur, math.sqrt(2.0 / (n + 1)) * x * cur - math.sqrt(n / (n + 1)) * prev
        big = np.abs(cur) > 1e100
        if big.any():
            cur[big] *= 1e-100
            prev[big] *= 1e-100
            acc[:, big] *= 1e-100
            log_scale[big] += 100.0 * math.log(10.0)
        acc += vecs[:, n + 1:n + 2] * cur
    with np.errstate(under="ignore"):
        return acc * np.exp(log_scale)


def _quadrature(dim: int, p_max: float):
    """Half-line nodes and trapezoid weights for the y integral."""
    k_max = math.sqrt(2.0 * dim + 1.0)
    length = k_max + 8.0
    h = 0.5 * math.pi / (2.0 * k_max + 2.0 * p_max + 4.0)
    y = np.arange(0.0, length + h, h)
    w = np.full(y.size, h)
    w[0] = 0.5 * h
    return y, w


def wigner_at(state, points) -> np.ndarray:
    """W(z) of the photonic reduced state at complex ``points``.

    With z = (x + i p) / sqrt(2) and real oscillator wavefunctions,

        W(z) = (2 / pi) sum_ladders int psi*(x + y) psi(x - y) exp(2 i p y) dy,

    normalized so that the integral over d^2 z is one and the vacuum gives
    2 / pi.  ``state`` is a FockState (the TLS is traced out) or a vector
    (or stack of vectors) of photonic amplitudes.
    """
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    flat = points.ravel()
    vecs = np.array(_ladders(state))
    dim = vecs.shape[1]
    xs = math.sqrt(2.0) * flat.real
    ps = math.sqrt(2.0) * flat.imag
    y, w = _quadrature(dim, float(np.max(np.abs(ps))) if ps.size else 0.0)
    out = np.empty(flat.size)
    rows = np.unique(xs)
    per_chunk = max(1, 200_000 // (2 * y.size))
    for c in range(0, rows.size, per_chunk):
        xr = rows[c:c + per_chunk]
        nodes = np.concatenate([(xr[:, None] + y).ravel(), (xr[:, None] - y).ravel()])
        sums = _hermite_sums(vecs, nodes)
        half = xr.size * y.size
        plus = sums[:, :half].reshape(len(vecs), xr.size, y.size)
        minus = sums[:, half:].reshape(len(vecs), xr.size, y.size)
        prod = (np.conj(plus) * minus).sum(axis=0)
        for k, x0 in enumerate(xr):
            sel = np.nonzero(xs == x0)[0]
            phase = np.exp(2j * np.outer(ps[sel], y))
            out[sel] = 2.0 * (phase @ (w * prod[k])).real
    return (WIGNER_BOUND * out).reshape(points.shape)


def default_half_width(state, cutoff: float = 1e-6) -> float:
    p = sum(np.abs(v) ** 2 for v in _ladders(state))
    support = np.nonzero(p > cutoff * p.max())[0]
    return math.sqrt(float(support.max()) if support.size else 0.0) + 3.0


def wigner(state, half_width: float | None = None, points: int = 101,
           center: complex = 0.0, time: float | None = None) -> WignerGrid:
    """Sample W on a square grid of ``points`` x ``points`` around ``center``."""
    if half_width is None:
        half_width = default_half_width(state)
    re = center.real + np.linspace(-half_width, half_width, points)
    im = center.imag + np.linspace(-half_width, half_width, points)
    zz = re[None, :] + 1j * im[:, None]
    t = time if time is not None else getattr(state, "time", 0.0)
    return WignerGrid(re, im, wigner_at(state, zz), t)


def wigner_laguerre(rho: np.ndarray, points) -> np.ndarray:
    """W from the Fock-basis series sum_{mn} rho_mn W_{|m><n|}(z).

    Independent of the position-space route; slow and only stable for
    small |z|, for checks only.
    """
    from scipy.special import eval_genlaguerre, gammaln

    points = np.asarray(points, dtype=complex)
    r2 = 4.0 * np.abs(points) ** 2
    dim = rho.shape[0]
    total = np.zeros(points.shape, dtype=complex)
    for m in range(dim):
        for n in range(dim):
            if rho[m, n] == 0:
                continue
            lo, hi = min(m, n), max(m, n)
            k = hi - lo
            coef = (-1) ** lo * np.exp(0.5 * (gammaln(lo + 1) - gammaln(hi + 1)))
            base = coef * np.exp(-0.5 * r2) * eval_genlaguerre(lo, k, r2)
            zpow = (2.0 * points) ** k
            # <n|W|m>: the |m><n| element carries conj(2z)^k for m > n
            phase = np.conj(zpow) if m > n else zpow
            total += rho[m, n] * base * phase
    return (WIGNER_BOUND * total).real


# --- maximum tracking -----------------------------------------------------------

@dataclass
class Track:
    seed: complex
    times: list = field(default_factory=list)
    z: list = field(default_factory=list)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.z, dtype=complex)


def _quadratic_peak(vals: np.ndarray) -> tuple[float, float]:
    """Vertex offset (in grid units) of a quadratic fitted to a 3x3 patch."""
    gx = 0.5 * (vals[1, 2] - vals[1, 0])
    gy = 0.5 * (vals[2, 1] - vals[0, 1])
    hxx = vals[1, 2] - 2.0 * vals[1, 1] + vals[1, 0]
    hyy = vals[2, 1] - 2.0 * vals[1, 1] + vals[0, 1]
    hxy = 0.25 * (vals[2, 2] - vals[2, 0] - vals[0, 2] + vals[0, 0])
    det = hxx * hyy - hxy ** 2
    if hxx >= 0 or det <= 0:
        return 0.0, 0.0
    dx = -(hyy * gx - hxy * gy) / det
    dy = -(hxx * gy - hxy * gx) / det
    return float(np.clip(dx, -1, 1)), float(np.clip(dy, -1, 1))


def _patch(state, center, step):
    offs = np.array([-1.0, 0.0, 1.0]) * step
    zz = center + offs[None, :] + 1j * offs[:, None]
    return np.abs(wigner_at(state, zz))


def local_abs_max(state, guess: complex, radius: float = 0.6, spacing: float = 0.1,
                  refine: bool = True) -> complex:
    """Local maximum of |W| within ``radius`` of ``guess``.

    A coarse grid locates the maximum to ``spacing``; two nested 3x3
    quadratic fits then refine it.
    """
    offs = np.arange(-radius, radius + 1e-12, spacing)
    zz = guess + offs[None, :] + 1j * offs[:, None]
    mask = np.abs(zz - guess) <= radius + 1e-12
    vals = np.where(mask, np.abs(wigner_at(state, zz)), -np.inf)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    best = complex(zz[i, j])
    if abs(best - guess) > radius - spacing:
        raise LostTrack(f"no local maximum of |W| within {radius} of {guess:.4g}")
    if not refine:
        return best
    step = spacing
    for _ in range(2):
        dx, dy = _quadratic_peak(_patch(state, best, step))
        best = best + step * complex(dx, dy)
        step /= 5.0
    return best


def wigner_max_track(states, times, seeds, radius: float = 0.6, spacing: float = 0.1,
                     max_radius: float | None = None) -> list[Track]:
    """Follow local maxima of |W| through ``states`` by nearest continuation.

    When no maximum lies within ``radius`` the search radius is doubled, up
    to ``max_radius``, before giving up.  A spread packet has a flat ridge
    of |W| along its orbit and its maximum can jump along the ridge.
    """
    tracks = [Track(complex(s)) for s in seeds]
    limit = radius if max_radius is None else max(radius, max_radius)
    for st, t in zip(states, times):
        for tr in tracks:
            guess = tr.z[-1] if tr.z else tr.seed
            r = radius
            while True:
                try:
                    z = local_abs_max(st, guess, r, spacing)
                    break
                except LostTrack:
                    if r >= limit:
                        raise
                    r = min(2.0 * r, limit)
            tr.z.append(z)
            tr.times.append(float(t))
    return tracks


# --- packets --------------------------------------------------------------------

@dataclass(frozen=True)
class Packet:
    center: float
    mass: float
    lo: int
    hi: int
    peak: int


def detect_packets(pn, smooth_width: int = 3, prominence: float = 0.005,
                   min_separation: int = 4) -> tuple[list[Packet], float]:
    """Split P_n into packets between minima of the smoothed distribution.

    Returns ``(packets, residue)`` where ``residue`` is the probability not
    assigned to any packet (all of it when no peak qualifies).
    """
    pn = np.asarray(pn, dtype=float)
    if smooth_width > 1:
        kernel = np.ones(smooth_width) / smooth_width
        smooth = np.convolve(pn, kernel, mode="same")
    else:
        smooth = pn.copy()
    padded = np.concatenate([[0.0], smooth, [0.0]])
    peaks, _ = signal.find_peaks(padded, prominence=prominence, distance=min_separation)
    peaks = peaks - 1
    if peaks.size == 0:
        return [], float(pn.sum())
    edges = [0]
    for a, b in zip(peaks, peaks[1:]):
        edges.append(int(a + np.argmin(smooth[a:b + 1])))
    edges.append(pn.size)
    packets = []
    n = np.arange(pn.size)
    for k, pk in enumerate(peaks):
        lo, hi = edges[k], edges[k + 1]
        seg = pn[lo:hi]
        mass = float(seg.sum())
        center = float(np.dot(n[lo:hi], seg) / mass) if mass > 0 else float(pk)
        packets.append(Packet(center, mass, lo, hi - 1, int(pk)))
    residue = float(pn.sum() - sum(p.mass for p in packets))
    return packets, residue


def packets_to_jsonl(packets, time: float | None = None) -> str:
    lines = []
    for p in packets:
        rec = asdict(p)
        if time is not None:
            rec = {"t": time, **rec}
        lines.append(json.dumps(rec, sort_keys=True))
    return "".join(line + "\n" for line in lines)


# --- spectrum -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Spectrum:
    freqs: np.ndarray
    magnitudes: np.ndarray
    window_length: float
    n_samples: int

    @property
    def bin_width(self) -> float:
        return 2.0 * math.pi / self.window_length

    def one_sided_power(self) -> float:
        """Sum of |X_k|^2 / n^2 over all two-sided bins, from the one-sided data."""
        w = np.full(self.magnitudes.size, 2.0)
        w[0] = 1.0
        if self.n_samples % 2 == 0:
            w[-1] = 1.0
        return float(np.sum(w * self.magnitudes ** 2))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("freq,magnitude\n")
            for a, b in zip(self.freqs, self.magnitudes):
                fh.write(f"{a:.17g},{b:.17g}\n")


def spectrum(series, times, window: str = "rect", detrend: bool = True) -> Spectrum:
    """One-sided magnitude spectrum |FFT|/n of a uniformly sampled series.

    Frequencies are angular, in units of g, spaced by 2 pi / T with
    T = n * dt.
    """
    x = np.asarray(series, dtype=float)
    t = np.asarray(times, dtype=float)
    if x.size != t.size or x.size < 2:
        raise ValueError("need matching series and times with at least two samples")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-12):
        raise ValueError("times must be uniformly spaced")
    if detrend:
        x = x - x.mean()
    if window == "hann":
        x = x * np.hanning(x.size)
    elif window != "rect":
        raise ValueError(f"unknown window {window!r}")
    mags = np.abs(np.fft.rfft(x)) / x.size
    freqs = 2.0 * math.pi * np.fft.rfftfreq(x.size, dt)
    return Spectrum(freqs, mags, x.size * dt, x.size)


@dataclass
class PeakMatch:
    expected: float
    freq: float
    magnitude: float
    offset_bins: float
    width_bins: float


@dataclass
class PeakReport:
    matches: list
    ratio: float | None
    low_confidence: bool


def peak_report(spec: Spectrum, expected, prominence_frac: float = 0.05,
                max_offset_bins: float = 3.0, broad_bins: float = 4.0) -> PeakReport:
    """Match each expected frequency to the nearest prominent peak.

    ``ratio`` is magnitude(first) / magnitude(second) when two frequencies
    are given.  ``low_confidence`` is set when a matched peak is wider than
    ``broad_bins`` at half prominence.
    """
    mags = spec.magnitudes
    peaks, props = signal.find_peaks(mags, prominence=prominence_frac * mags.max())
    widths = signal.peak_widths(mags, peaks, rel_height=0.5)[0] if peaks.size else np.array([])
    matches = []
    for om in expected:
        if peaks.size == 0:
            raise NoPeak(f"no peak near {om:.6g}")
        k = int(np.argmin(np.abs(spec.freqs[peaks] - om)))
        off = (spec.freqs[peaks[k]] - om) / spec.bin_width
        if abs(off) > max_offset_bins:
            raise NoPeak(f"nearest peak to {om:.6g} is {off:.2f} bins away")
        matches.append(PeakMatch(float(om), float(spec.freqs[peaks[k]]), float(mags[peaks[k]]),
                                 float(off), float(widths[k])))
    ratio = matches[0].magnitude / matches[1].magnitude if len(matches) >= 2 else None
    low = any(m.width_bins > broad_bins for m in matches)
    return PeakReport(matches, ratio, low)
