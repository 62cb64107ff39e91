import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jcpackets import variational as var
from jcpackets.errors import ConfigError, GuardBand, NotAttained
from jcpackets.model import DriveProtocol, SystemParams
from jcpackets.protocol import (apply_step, lower_turning_time, make_tree, replay,
                                solve_step_time, suggest_nmax, synthesize, validate_protocol)

P = SystemParams(1.0, 0.1)
THIRDS = [1 / 3, 1 / 3, 1 / 3]


def test_make_tree_roots():
    assert make_tree(P, 5.0).leaf_weights().tolist() == [0.5, 0.5]
    tree = make_tree(P, 5.0, "lds_minus")
    assert tree.leaf_labels() == [(2,)]
    with pytest.raises(ConfigError):
        make_tree(P, 5.0, "fock")


@settings(max_examples=15, deadline=None)
@given(taus=st.lists(st.floats(1.0, 15.0), min_size=1, max_size=3),
       levels=st.lists(st.floats(2.0, 25.0), min_size=3, max_size=3))
def test_weight_conservation(taus, levels):
    times = np.cumsum(taus)
    tree = make_tree(P, levels[0], prune_threshold=0.0)
    for t, f in zip(times, levels[1:]):
        try:
            tree = apply_step(tree, f, float(t))
        except var.NearDegeneracy:
            return
        assert tree.leaf_weights().sum() == pytest.approx(1.0, abs=1e-12)


def test_pruning_keeps_total_weight():
    prot = DriveProtocol.from_levels(5.0, [(11.0, 15.0), (30.0, 25.0)])
    tree = replay(prot, P, 40.0)
    assert np.all(tree.leaf_weights() >= 1e-3)
    assert tree.leaf_weights().sum() == pytest.approx(1.0, abs=1e-9)


def test_same_drive_leaves_tree_unchanged():
    tree = make_tree(P, 5.0)
    before = replay(DriveProtocol.constant(5.0), P, 7.0)
    after = apply_step(make_tree(P, 5.0), 5.0, 7.0)
    assert len(after.leaves) == len(before.leaves) == len(tree.leaves)
    assert after.leaf_weights().tolist() == before.leaf_weights().tolist()
    assert [s.z for s in after.leaf_states()] == [s.z for s in before.leaf_states()]
    assert [s.branch for s in after.leaf_states()] == [1, 2]


def test_step_order_enforced():
    tree = apply_step(make_tree(P, 5.0), 15.0, 3.0)
    with pytest.raises(ConfigError):
        apply_step(tree, 5.0, 2.0)


def test_structure_preserved_at_lower_turning_point():
    leaf = var.BranchState(2, 0j, 1.0, 0.0)
    t, z = lower_turning_time(leaf, 15.0, P)
    assert abs(z.imag) < 1e-9 and z.real < 5.0
    assert var.transition_probability(z, 15.0, 5.0, P, 2, 1) <= 1e-6
    tree = apply_step(make_tree(P, 15.0, "lds_minus"), 5.0, t)
    assert len(tree.leaves) == 1


def test_d_to_d_step_keeps_two_packets():
    # the step sheds only light children; the two original packets carry the weight
    prot = DriveProtocol.from_levels(15.0, [(15.0, 25.0)])
    tree = replay(prot, P, 40.0)
    heavy = [lab for lab, w in zip(tree.leaf_labels(), tree.leaf_weights()) if w > 0.05]
    assert heavy == [(1, 1), (2, 2)]
    assert tree.leaf_weights().max(initial=0) > 0.49
    assert sum(w for w in tree.leaf_weights() if w < 0.05) < 0.01


def test_b_to_d_step_makes_three_packets():
    prot = DriveProtocol.from_levels(5.0, [(11.0, 15.0)])
    tree = replay(prot, P, 40.0)
    heavy = [lab for lab, w in zip(tree.leaf_labels(), tree.leaf_weights()) if w > 0.05]
    assert heavy == [(1, 1), (2, 1), (2, 2)]


class TestStepTime:
    def test_first_third(self):
        tau = solve_step_time(var.BranchState(2, 0j), 5.0, 15.0, 1 / 3, P)
        assert tau == pytest.approx(10.5, abs=0.3)
        z = var.evolve_branch(0j, 2, 5.0, P, tau, dt=1e-3).final
        assert var.transition_probability(z, 5.0, 15.0, P, 2, 1) == pytest.approx(1 / 3, abs=1e-4)

    def test_zero_target_at_start(self):
        assert solve_step_time(var.BranchState(2, 0j), 5.0, 15.0, 0.0, P) == 0.0

    def test_not_attained(self):
        with pytest.raises(NotAttained):
            solve_step_time(var.BranchState(2, 0j), 15.0, 25.0, 0.5, P)

    def test_guard_band(self):
        with pytest.raises(GuardBand):
            solve_step_time(var.BranchState(2, 0j), 5.0, 15.0, 1 / 3, P, guard_radius=100.0)

    def test_bad_inputs(self):
        with pytest.raises(ConfigError):
            solve_step_time(var.BranchState(2, 0j), 5.0, 15.0, 1.0, P)
        with pytest.raises(ConfigError):
            solve_step_time(var.BranchState(2, 0j, 1.0, 5.0), 5.0, 15.0, 0.3, P, (1.0, 10.0))


class TestSynthesize:
    def test_class_d_return_5(self):
        prot = synthesize("class-D-return", 4, THIRDS, [5, 15, 5, 15], P)
        taus = [t for t, _ in prot.steps[1:]]
        assert np.allclose(taus, [10.5, 49.4, 58.2], atol=0.5)
        assert [f for _, f in prot.steps] == [5, 15, 5, 15]

    def test_class_d_return_8(self):
        prot = synthesize("class-D-return", 4, THIRDS, [8, 15, 8, 15], P)
        assert np.allclose([t for t, _ in prot.steps[1:]], [16.1, 46.5, 63.7], atol=0.5)

    @pytest.mark.parametrize("f2,delay,gap", [(5.4, 20.0, 23.0), (4.5, 45.0, 52.0)])
    def test_direct_split(self, f2, delay, gap):
        prot = synthesize("direct-split", 4, THIRDS, [5, 15, f2], P, min_delay=delay)
        (t1, _), (t2, _) = prot.steps[1], prot.steps[2]
        assert t1 == pytest.approx(10.5, abs=0.3)
        assert t2 - t1 == pytest.approx(gap, abs=0.5)

    def test_two_packets_is_constant(self):
        assert synthesize("direct-split", 2, [], [15.0], P) == DriveProtocol.constant(15.0)

    def test_deterministic(self):
        a = synthesize("class-D-return", 4, THIRDS, [5, 15, 5, 15], P)
        b = synthesize("class-D-return", 4, THIRDS, [5, 15, 5, 15], P)
        assert a.to_text() == b.to_text()

    def test_equal_thirds_in_replay(self):
        prot = synthesize("class-D-return", 4, THIRDS, [5, 15, 5, 15], P)
        rep = validate_protocol(prot, P, "reduced", times=[70.0], initial="lds_minus")
        split = [d["weight"] for d in rep.details[0] if d["label"][:3] in ((2, 2, 2), (2, 1, 1))]
        assert sum(split) == pytest.approx(1.0, abs=1e-6)
        for lab in ((2, 2, 2, 1), (2, 2, 2, 2)):
            w = [d["weight"] for d in rep.details[0] if d["label"] == lab]
            assert w[0] == pytest.approx(1 / 3, abs=1e-3)

    @pytest.mark.parametrize("kwargs", [
        dict(strategy="class-D-return", n_packets=4, weights=THIRDS, f_levels=[15, 25, 5, 15]),
        dict(strategy="direct-split", n_packets=4, weights=THIRDS, f_levels=[5, 6, 5]),
        dict(strategy="direct-split", n_packets=4, weights=[0.5, 0.2, 0.2], f_levels=[5, 15, 5]),
        dict(strategy="direct-split", n_packets=4, weights=[0.5, 0.5], f_levels=[5, 15, 5]),
        dict(strategy="class-D-return", n_packets=4, weights=THIRDS, f_levels=[5, 15]),
        dict(strategy="bogus", n_packets=3, weights=[0.5, 0.5], f_levels=[5, 15]),
        dict(strategy="direct-split", n_packets=1, weights=[], f_levels=[5]),
    ])
    def test_config_errors(self, kwargs):
        with pytest.raises(ConfigError):
            synthesize(params=P, **kwargs)


def test_suggest_nmax_covers_replay():
    prot = DriveProtocol.from_levels(15.0, [(15.0, 25.0)])
    n = suggest_nmax(prot, P, 40.0)
    tree = replay(prot, P, 40.0, prune_threshold=0.0)
    assert n >= tree.max_abs_z2() + 8 * math.sqrt(tree.max_abs_z2())


def test_validate_reduced_counts():
    rep = validate_protocol(DriveProtocol.constant(15.0), P, "reduced", times=[10.0, 40.0])
    assert rep.packet_counts == [2, 2]
    with pytest.raises(ConfigError):
        validate_protocol(DriveProtocol.constant(15.0), P, "reduced")
    with pytest.raises(ConfigError):
        validate_protocol(DriveProtocol.constant(15.0), P, "magic", times=[1.0])


def test_validate_exact_constant_drive():
    rep = validate_protocol(DriveProtocol.constant(15.0), P, "exact", times=[40.0],
                            tail_threshold=1e-6)
    assert rep.packet_counts == [2]
