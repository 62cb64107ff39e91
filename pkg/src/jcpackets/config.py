"""Run configuration files: INI-style sections of ``key = value`` lines.

Example::

    [system]
    g = 1
    delta = 0.1

    [drive]
    f0 = 5
    steps = 11 15          ; "tau f" pairs separated by commas
    # or: protocol_file = steps.txt

    [run]
    initial = ground
    t_end = 100
    sample_stride = 0.1

    [analysis]
    wigner_times = 40, 80
    packet_times = 40
    spectrum = yes

Unknown sections or keys raise ``ConfigError``.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import DriveProtocol, SystemParams

INITIAL_KINDS = ("ground", "lds_plus", "lds_minus")

SCHEMA = {
    "system": {"g", "delta"},
    "drive": {"f0", "steps", "protocol_file"},
    "run": {"initial", "t_end", "dt", "sample_stride", "nmax", "norm_tol", "tail_threshold",
            "method"},
    "analysis": {"wigner_times", "wigner_points", "wigner_half_width", "packet_times",
                 "spectrum", "window", "lds_measure"},
    "reduced": {"branch", "f", "z0", "t_end", "dt"},
    "synth": {"strategy", "n_packets", "weights", "f_levels", "guard_radius", "min_delay", "dt"},
}


@dataclass
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    protocol: DriveProtocol | None = None
    initial: str = "ground"
    t_end: float = 0.0
    dt: float | None = None
    sample_stride: float = 0.1
    nmax: int | None = None
    norm_tol: float = 1e-6
    tail_threshold: float = 1e-10
    method: str = "propagator"
    wigner_times: tuple = ()
    wigner_points: int = 101
    wigner_half_width: float | None = None
    packet_times: tuple = ()
    spectrum: bool = False
    window: str = "rect"
    lds_measure: bool = False
    reduced: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.initial not in INITIAL_KINDS:
            raise ConfigError(f"initial must be one of {INITIAL_KINDS}, got {self.initial!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ConfigError("t_end must be finite and >= 0")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.sample_stride > 0:
            raise ConfigError("sample_stride must be positive")
        if self.nmax is not None and self.nmax < 1:
            raise ConfigError("nmax must be >= 1")
        if self.window not in ("rect", "hann"):
            raise ConfigError("window must be rect or hann")
        if self.method not in ("propagator", "stepwise"):
            raise ConfigError("method must be propagator or stepwise")
        if self.wigner_points < 3:
            raise ConfigError("wigner_points must be >= 3")
        for t in (*self.wigner_times, *self.packet_times):
            if not 0 <= t <= self.t_end:
                raise ConfigError(f"analysis time {t} outside [0, t_end]")
        return self


def _float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None


def _floats(section, key, raw):
    return tuple(_float(section, key, x) for x in raw.replace(",", " ").split())


def _int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not an integer: {raw!r}") from None


def _bool(section, key, raw):
    v = raw.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: not a boolean: {raw!r}")


def parse_steps(text: str) -> list[tuple[float, float]]:
    """``"11 15, 49.4 5"`` -> [(11, 15), (49.4, 5)]."""
    out = []
    for chunk in text.split(","):
        parts = chunk.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise ConfigError(f"[drive] steps: expected 'tau f' pairs, got {chunk.strip()!r}")
        out.append((_float("drive", "steps", parts[0]), _float("drive", "steps", parts[1])))
    return out


def load_config(path, base_dir=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir if base_dir is not None else path.parent)


def parse_config(text: str, base_dir=".") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(cp[section]) - SCHEMA[section]
        if extra:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")

    cfg = RunConfig()
    if cp.has_section("system"):
        s = cp["system"]
        g = _float("system", "g", s.get("g", "1"))
        d = _float("system", "delta", s.get("delta", "0"))
        try:
            cfg.params = SystemParams(g, d)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    if cp.has_section("drive"):
        s = cp["drive"]
        try:
            if "protocol_file" in s:
                if "steps" in s or "f0" in s:
                    raise ConfigError("[drive] protocol_file excludes f0/steps")
                p = Path(base_dir) / s["protocol_file"]
                cfg.protocol = DriveProtocol.from_text(p.read_text())
            else:
                if "f0" not in s:
                    raise ConfigError("[drive] needs f0 or protocol_file")
                f0 = _float("drive", "f0", s["f0"])
                cfg.protocol = DriveProtocol.from_levels(f0, parse_steps(s.get("steps", "")))
        except OSError as exc:
            raise ConfigError(f"cannot read protocol file: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    if cp.has_section("run"):
        s = cp["run"]
        cfg.initial = s.get("initial", cfg.initial).strip()
        if "t_end" in s:
            cfg.t_end = _float("run", "t_end", s["t_end"])
        if "dt" in s:
            cfg.dt = _float("run", "dt", s["dt"])
        if "sample_stride" in s:
            cfg.sample_stride = _float("run", "sample_stride", s["sample_stride"])
        if "nmax" in s:
            cfg.nmax = _int("run", "nmax", s["nmax"])
        if "norm_tol" in s:
            cfg.norm_tol = _float("run", "norm_tol", s["norm_tol"])
        if "tail_threshold" in s:
            cfg.tail_threshold = _float("run", "tail_threshold", s["tail_threshold"])
        cfg.method = s.get("method", cfg.method).strip()

    if cp.has_section("analysis"):
        s = cp["analysis"]
        if "wigner_times" in s:
            cfg.wigner_times = _floats("analysis", "wigner_times", s["wigner_times"])
        if "wigner_points" in s:
            cfg.wigner_points = _int("analysis", "wigner_points", s["wigner_points"])
        if "wigner_half_width" in s:
            cfg.wigner_half_width = _float("analysis", "wigner_half_width", s["wigner_half_width"])
        if "packet_times" in s:
            cfg.packet_times = _floats("analysis", "packet_times", s["packet_times"])
        if "spectrum" in s:
            cfg.spectrum = _bool("analysis", "spectrum", s["spectrum"])
        if "lds_measure" in s:
            cfg.lds_measure = _bool("analysis", "lds_measure", s["lds_measure"])
        cfg.window = s.get("window", cfg.window).strip()

    if cp.has_section("reduced"):
        s = cp["reduced"]
        red = {}
        if "branch" in s:
            red["branch"] = _int("reduced", "branch", s["branch"])
        for key in ("f", "t_end", "dt"):
            if key in s:
                red[key] = _float("reduced", key, s[key])
        if "z0" in s:
            try:
                red["z0"] = complex(s["z0"].replace(" ", ""))
            except ValueError:
                raise ConfigError(f"[reduced] z0: not a complex number: {s['z0']!r}") from None
        cfg.reduced = red

    if cp.has_section("synth"):
        s = cp["synth"]
        syn = {}
        if "strategy" in s:
            syn["strategy"] = s["strategy"].strip()
        if "n_packets" in s:
            syn["n_packets"] = _int("synth", "n_packets", s["n_packets"])
        if "weights" in s:
            syn["weights"] = _floats("synth", "weights", s["weights"])
        if "f_levels" in s:
            syn["f_levels"] = _floats("synth", "f_levels", s["f_levels"])
        for key in ("guard_radius", "min_delay", "dt"):
            if key in s:
                syn[key] = _float("synth", key, s[key])
        cfg.synth = syn

    return cfg.validate()
