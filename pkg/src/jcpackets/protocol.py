"""Step protocols in the reduced model: branch trees, step timing, synthesis.

A sudden change of the drive from ``f0`` to ``f1`` re-expands every packet
in the eigenbasis of ``H_TLS`` at the new drive.  A packet on branch ``j``
at amplitude ``z`` feeds the other branch with weight

    S = |<phi_j(f0), phi_k(f1)>|^2,   k != j

and keeps ``1 - S`` on its own branch.  Both children start from ``z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from . import variational as var
from .classifier import classify
from .errors import ConfigError, GuardBand, InfeasibleGeometry, NotAttained
from .model import DriveProtocol, SystemParams, truncation_for

PRUNE_THRESHOLD = 1e-3
GUARD_RADIUS = 0.5
S_TOL = 1e-4
NEAR_DEGENERACY_RADIUS = 4.0


@dataclass(frozen=True)
class Node:
    state: var.BranchState
    label: tuple[int, ...]
    parent: int | None
    created_at_step: int
    times: np.ndarray = field(default=None, repr=False)
    z: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class BranchTree:
    """Packets of the reduced model under a protocol built step by step.

    ``leaves`` index into ``nodes``; every leaf state sits at ``time``.
    """

    params: SystemParams
    protocol: DriveProtocol
    nodes: tuple[Node, ...]
    leaves: tuple[int, ...]
    time: float = 0.0
    dt: float | None = None
    prune_threshold: float = PRUNE_THRESHOLD

    @property
    def f_current(self) -> float:
        return self.protocol.steps[-1][1]

    def leaf_states(self) -> list[var.BranchState]:
        return [self.nodes[i].state for i in self.leaves]

    def leaf_weights(self) -> np.ndarray:
        return np.array([self.nodes[i].state.weight for i in self.leaves])

    def leaf_labels(self) -> list[tuple[int, ...]]:
        return [self.nodes[i].label for i in self.leaves]

    def max_abs_z2(self) -> float:
        vals = [0.0]
        for node in self.nodes:
            if node.z is not None and node.z.size:
                vals.append(float(np.max(np.abs(node.z) ** 2)))
            vals.append(abs(node.state.z) ** 2)
        return max(vals)


def make_tree(params: SystemParams, f0: float, initial: str = "ground",
              dt: float | None = None, prune_threshold: float = PRUNE_THRESHOLD) -> BranchTree:
    """Root packets at z = 0: both branches for |G,0>, one for |Phi+/-,0>."""
    weights = {"ground": (0.5, 0.5), "lds_plus": (1.0, 0.0), "lds_minus": (0.0, 1.0)}
    if initial not in weights:
        raise ConfigError(f"unknown initial state {initial!r}")
    nodes = []
    for branch, w in zip((1, 2), weights[initial]):
        if w > 0:
            nodes.append(Node(var.BranchState(branch, 0j, w, 0.0), (branch,), None, 0))
    return BranchTree(params, DriveProtocol.constant(f0), tuple(nodes),
                      tuple(range(len(nodes))), 0.0, dt, prune_threshold)


def advance(tree: BranchTree, t: float) -> BranchTree:
    """Evolve every leaf under the current drive up to absolute time ``t``."""
    if t < tree.time - 1e-12:
        raise ConfigError(f"cannot advance backwards to {t} from {tree.time}")
    if t - tree.time <= 1e-12:
        return tree
    f = tree.f_current
    dt = tree.dt or var.default_dt(f, tree.params)
    nodes = list(tree.nodes)
    for i in tree.leaves:
        node = nodes[i]
        st = node.state
        traj = var.evolve_branch(st.z, st.branch, f, tree.params, t - tree.time, dt=dt, t0=tree.time)
        times = traj.times if node.times is None else np.concatenate([node.times, traj.times[1:]])
        zs = traj.z if node.z is None else np.concatenate([node.z, traj.z[1:]])
        phase = st.phase + var.adiabatic_phase(traj)
        nodes[i] = replace(node, state=replace(st, z=traj.final, time=t, phase=phase),
                           times=times, z=zs)
    return replace(tree, nodes=tuple(nodes), time=t)


def apply_step(tree: BranchTree, f_new: float, t_step: float) -> BranchTree:
    """Switch the drive to ``f_new`` at ``t_step`` and split every leaf."""
    if t_step <= tree.protocol.steps[-1][0]:
        raise ConfigError("step time must come after all existing steps")
    tree = advance(tree, t_step)
    f_old = tree.f_current
    step_index = len(tree.protocol.steps)
    nodes = list(tree.nodes)
    leaves = []
    for i in tree.leaves:
        st = nodes[i].state
        other = 3 - st.branch
        s = var.transition_probability(st.z, f_old, f_new, tree.params, st.branch, other)
        kids = sorted([(st.branch, st.weight * (1.0 - s)), (other, st.weight * s)])
        kept = [(k, w) for k, w in kids if w >= tree.prune_threshold]
        if len(kept) < len(kids):
            total = st.weight
            kept = [(k, total) for k, _ in kept] if kept else [(st.branch, total)]
        for k, w in kept:
            child = var.BranchState(k, st.z, min(w, 1.0), t_step, st.phase)
            nodes.append(Node(child, nodes[i].label + (k,), i, step_index,
                              np.array([t_step]), np.array([st.z])))
            leaves.append(len(nodes) - 1)
    return replace(tree, nodes=tuple(nodes), leaves=tuple(leaves),
                   protocol=tree.protocol.extend(t_step, f_new))


def replay(protocol: DriveProtocol, params: SystemParams, t_end: float, initial: str = "ground",
           dt: float | None = None, prune_threshold: float = PRUNE_THRESHOLD) -> BranchTree:
    tree = make_tree(params, protocol.steps[0][1], initial, dt, prune_threshold)
    for tau, f in protocol.steps[1:]:
        if tau >= t_end:
            break
        tree = apply_step(tree, f, tau)
    return advance(tree, t_end)


def suggest_nmax(protocol: DriveProtocol, params: SystemParams, t_end: float,
                 initial: str = "ground", near_radius: float = NEAR_DEGENERACY_RADIUS) -> int:
    """Cutoff from the largest |z|^2 reached by any packet of the reduced model.

    The replay keeps every child, however light: a packet below the pruning
    threshold is invisible in P_n but still fills the top of the basis.
    A packet passing within ``near_radius`` of f/g sheds a small fragment
    onto the other branch there (the adiabatic picture breaks down), so the
    orbits launched next to f/g are included as well.
    """
    peak = 0.0
    for f in set(protocol.levels):
        if f > 0:
            for b in (1, 2):
                peak = max(peak, var.turning_point(b, f, params) ** 2)
    try:
        tree = replay(protocol, params, t_end, initial, prune_threshold=0.0)
    except var.NearDegeneracy:
        tree = None
    if tree is not None:
        peak = max(peak, tree.max_abs_z2())
        near = set()
        for node in tree.nodes:
            if node.z is None or node.times is None or not node.z.size:
                continue
            f = protocol(float(node.times[0]))
            if f > 0 and np.min(np.abs(node.z - f / params.g)) < near_radius:
                near.add((f, float(node.times[0])))
        for f, t0 in near:
            peak = max(peak, _fragment_peak(f, params, t_end - t0))
    return truncation_for(peak)


def _fragment_peak(f: float, params: SystemParams, duration: float) -> float:
    zc = f / params.g
    span = min(duration, _window_length(f, params))
    dt = min(var.default_dt(f, params), 1e-2)
    peak = 0.0
    for b in (1, 2):
        for off in (0.3, -0.3, 0.3j, -0.3j):
            try:
                tr = var.evolve_branch(zc + off, b, f, params, span, dt=dt)
            except var.NearDegeneracy:
                continue
            peak = max(peak, float(np.max(np.abs(tr.z) ** 2)))
    return peak


# --- step timing ----------------------------------------------------------------

def _window_length(f: float, params: SystemParams) -> float:
    if params.delta > 0:
        return 2.0 * 2.0 * math.pi / params.delta
    return 2.0 * 4.0 * math.pi * f / params.g ** 2


def solve_step_time(leaf: var.BranchState, f0: float, f1: float, target_S: float,
                    params: SystemParams, search_window: tuple[float, float] | None = None,
                    guard_radius: float = GUARD_RADIUS, dt: float | None = None,
                    tol: float = S_TOL) -> float:
    """Earliest time in ``search_window`` at which the switch weight hits ``target_S``.

    The leaf evolves under ``f0`` from ``leaf.time``; the window is absolute
    and defaults to two oscillation periods.  Crossings whose position lies
    within ``guard_radius`` of f1/g are skipped.
    """
    if not 0.0 <= target_S < 1.0:
        raise ConfigError("target_S must lie in [0, 1)")
    t0 = leaf.time
    lo, hi = search_window if search_window else (t0, t0 + _window_length(f0, params))
    if lo < t0 or hi <= lo:
        raise ConfigError("search window must start at or after the leaf time")
    if dt is None:
        dt = min(var.default_dt(f0, params), 1e-2)
    other = 2 if leaf.branch == 1 else 1
    traj = var.evolve_branch(leaf.z, leaf.branch, f0, params, hi - t0, dt=dt, t0=t0)

    def s_of(z):
        return var.transition_probability(z, f0, f1, params, leaf.branch, other)

    s = np.array([s_of(z) for z in traj.z])
    inside = traj.times >= lo - 1e-12
    idx = np.nonzero(inside)[0]
    if abs(s[idx[0]] - target_S) <= tol and abs(traj.z[idx[0]] - f1 / params.g) >= guard_radius:
        return float(traj.times[idx[0]])
    guarded = False
    diff = s - target_S
    for k in idx[:-1]:
        if diff[k] == 0.0 or diff[k] * diff[k + 1] < 0:
            za = complex(traj.z[k])
            ta = float(traj.times[k])
            h_max = float(traj.times[k + 1] - ta)

            def g_of(h):
                return s_of(var.rk4_step(za, leaf.branch, f0, params, h) if h > 0 else za) - target_S

            h = 0.0 if diff[k] == 0.0 else optimize.bisect(g_of, 0.0, h_max, xtol=1e-13)
            zt = var.rk4_step(za, leaf.branch, f0, params, h) if h > 0 else za
            if abs(zt - f1 / params.g) < guard_radius:
                guarded = True
                continue
            if abs(s_of(zt) - target_S) > tol:
                continue
            return ta + h
    if guarded:
        raise GuardBand("every crossing lies in the turning-point guard band")
    raise NotAttained(f"S never reaches {target_S:g} in [{lo:g}, {hi:g}]")


def lower_turning_time(leaf: var.BranchState, f: float, params: SystemParams,
                       dt: float | None = None) -> tuple[float, complex]:
    """First crossing of the real axis at the lower end of the leaf's orbit."""
    if dt is None:
        dt = min(var.default_dt(f, params), 1e-2)
    traj = var.evolve_branch(leaf.z, leaf.branch, f, params, 1.5 * _window_length(f, params),
                             dt=dt, t0=leaf.time)
    crossings = [c for c in var.real_axis_crossings(traj) if c[0] > leaf.time + 10 * dt]
    if len(crossings) < 2:
        raise InfeasibleGeometry("leaf orbit does not return to the real axis")
    a, b = crossings[0], crossings[1]
    return a if a[1].real <= b[1].real else b


# --- synthesis ------------------------------------------------------------------

def _targets(weights) -> list[float]:
    w = np.asarray(weights, dtype=float)
    return [float(w[k] / w[k:].sum()) for k in range(len(w) - 1)]


def _leaf_at(leaf: var.BranchState, f: float, params: SystemParams, t: float,
             dt: float | None) -> var.BranchState:
    if t <= leaf.time:
        return leaf
    step = dt or min(var.default_dt(f, params), 1e-2)
    traj = var.evolve_branch(leaf.z, leaf.branch, f, params, t - leaf.time, dt=step, t0=leaf.time)
    return replace(leaf, z=traj.final, time=t)


def synthesize(strategy: str, n_packets: int, weights, f_levels, params: SystemParams,
               guard_radius: float = GUARD_RADIUS, min_delay: float = 0.0,
               dt: float | None = None) -> DriveProtocol:
    """Step times that split the branch-2 packet into ``n_packets - 1`` parts.

    ``weights`` are the relative weights of the parts cut from the branch-2
    packet (in order of creation, the last one is what remains).
    ``direct-split`` uses one step per cut at levels ``f_levels[k]``.
    ``class-D-return`` alternates B->D cuts with D->B returns taken at the
    lower turning point of the remaining packet, where the switch is
    structure preserving.
    """
    if n_packets < 2:
        raise ConfigError("n_packets must be >= 2")
    f_levels = [float(f) for f in f_levels]
    if not f_levels:
        raise ConfigError("need at least one drive level")
    if n_packets == 2:
        return DriveProtocol.constant(f_levels[0])
    weights = np.asarray(weights, dtype=float)
    if weights.size != n_packets - 1:
        raise ConfigError("need one weight per packet cut from branch 2 (n_packets - 1)")
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ConfigError("weights must be positive and sum to 1")
    targets = _targets(weights)
    leaf = var.BranchState(2, 0j, 1.0, 0.0)
    protocol = DriveProtocol.constant(f_levels[0])

    if strategy == "direct-split":
        if len(f_levels) < n_packets - 1:
            raise ConfigError("direct-split needs n_packets - 1 drive levels")
        _require_class(f_levels[0], params, "BC")
        _require_class(f_levels[1], params, "D")
        for k, target in enumerate(targets):
            f0, f1 = f_levels[k], f_levels[k + 1]
            start = leaf.time + (min_delay if k else 0.0)
            window = (start, start + _window_length(f0, params))
            tau = solve_step_time(leaf, f0, f1, target, params, window, guard_radius, dt)
            leaf = _leaf_at(leaf, f0, params, tau, dt)
            protocol = protocol.extend(tau, f1)
        return protocol

    if strategy == "class-D-return":
        n_steps = 2 * len(targets) - 1
        if len(f_levels) < n_steps + 1:
            raise ConfigError(f"class-D-return needs {n_steps + 1} drive levels")
        for k, f in enumerate(f_levels[:n_steps + 1]):
            _require_class(f, params, "BC" if k % 2 == 0 else "D")
        level = 0
        for k, target in enumerate(targets):
            if k:
                f_d, f_b = f_levels[level], f_levels[level + 1]
                tau, _ = lower_turning_time(leaf, f_d, params, dt)
                leaf = _leaf_at(leaf, f_d, params, tau, dt)
                protocol = protocol.extend(tau, f_b)
                level += 1
            f0, f1 = f_levels[level], f_levels[level + 1]
            window = (leaf.time, leaf.time + _window_length(f0, params))
            try:
                tau = solve_step_time(leaf, f0, f1, target, params, window, guard_radius, dt)
            except NotAttained:
                raise InfeasibleGeometry(
                    f"the orbit does not enclose f/g = {f0 / params.g:g}; "
                    "the overlap stays small at all times") from None
            leaf = _leaf_at(leaf, f0, params, tau, dt)
            protocol = protocol.extend(tau, f1)
            level += 1
        return protocol

    raise ConfigError(f"unknown strategy {strategy!r}")


def _require_class(f: float, params: SystemParams, allowed: str) -> None:
    label = classify(f, params.delta, params).label
    if label not in allowed:
        raise ConfigError(f"drive level f = {f:g} is in class {label}, expected one of {allowed}")


# --- validation -----------------------------------------------------------------

@dataclass
class ProtocolReport:
    mode: str
    times: list
    packet_counts: list
    details: list
    warnings: list = field(default_factory=list)


def validate_protocol(protocol: DriveProtocol, params: SystemParams, mode: str = "reduced",
                      times=(), initial: str = "ground", n_max: int | None = None,
                      detect_kwargs: dict | None = None, **evolve_kwargs) -> ProtocolReport:
    """Replay a protocol in the reduced model or the exact solver.

    ``reduced``: leaf count, labels, weights and positions at each time.
    ``exact``: packets detected in P_n at each time.
    """
    times = sorted(float(t) for t in times)
    if not times:
        raise ConfigError("give at least one report time")
    if mode == "reduced":
        counts, details = [], []
        tree = replay(protocol, params, 0.0, initial)
        for t in times:
            tree = _replay_until(tree, protocol, t)
            counts.append(len(tree.leaves))
            details.append([{"label": lab, "branch": st.branch, "weight": st.weight, "z": st.z}
                            for lab, st in zip(tree.leaf_labels(), tree.leaf_states())])
        return ProtocolReport(mode, times, counts, details)
    if mode == "exact":
        from .analysis import detect_packets
        from .model import make_initial_state
        from .solver import evolve

        if n_max is None:
            n_max = suggest_nmax(protocol, params, times[-1], initial)
        traj = evolve(make_initial_state(initial, n_max), params, protocol, times[-1],
                      snapshot_times=times, **evolve_kwargs)
        counts, details, warns = [], [], []
        for t in times:
            pn = np.abs(traj.snapshots[t].amps_g) ** 2 + np.abs(traj.snapshots[t].amps_x) ** 2
            packets, residue = detect_packets(pn, **(detect_kwargs or {}))
            counts.append(len(packets))
            details.append(packets)
            if residue > 1e-2:
                warns.append(f"t = {t:g}: {residue:.3g} of the probability is outside packets")
        return ProtocolReport(mode, times, counts, details, warns)
    raise ConfigError(f"unknown mode {mode!r}")


def _replay_until(tree: BranchTree, protocol: DriveProtocol, t: float) -> BranchTree:
    for tau, f in protocol.steps[len(tree.protocol.steps):]:
        if tau > t:
            break
        tree = apply_step(tree, f, tau)
    return advance(tree, t)
