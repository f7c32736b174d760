import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardy_ladder.behavior import (
    ProbIndex,
    behavior_from_array,
    behavior_from_json,
    behavior_from_table,
    ch_values,
    chsh_k,
    correlation,
    eq8_residual,
    hardy_report,
    hardy_zero_indices,
    mix,
    ns_residual,
    relation_error_constant,
    relation_residuals,
    swap_parties,
    uniform_behavior,
)
from hardy_ladder.bounds import DeterministicStrategy, extremal_ns_box, ns_mixture
from hardy_ladder.errors import DomainError, NegativeEntry, NotNormalized, SettingOutOfRange, WrongLength
from hardy_ladder.quantum import born_behavior

from conftest import perturb

P_K_QM_HALF_1 = 4 / 45  # 0.2 * (0.75 / 1.125)^2


def all_plus(K):
    return DeterministicStrategy((1,) * (K + 1), (1,) * (K + 1)).behavior()


class TestConstruction:
    def test_uniform(self):
        b = behavior_from_table(1, [0.25] * 16)
        assert b.k_param == 1
        assert b.table.shape == (2, 2, 2, 2)

    def test_not_normalized(self):
        with pytest.raises(NotNormalized):
            behavior_from_table(1, [0.5] * 16)

    def test_wrong_length(self):
        with pytest.raises(WrongLength):
            behavior_from_table(1, [0.25] * 15)
        with pytest.raises(WrongLength):
            behavior_from_table(2, [0.25] * 16)

    def test_negative(self):
        entries = [0.25] * 16
        entries[0], entries[1] = -1e-3, 0.251
        with pytest.raises(NegativeEntry):
            behavior_from_table(1, entries)

    def test_tiny_negative_is_clamped(self):
        entries = [0.5, -1e-16, 0.0, 0.5] * 4
        b = behavior_from_table(1, entries)
        assert b.p(0, 0, 1, -1) == 0.0

    def test_bad_k(self):
        with pytest.raises(DomainError):
            behavior_from_table(0, [0.25] * 4)

    def test_immutable(self):
        b = uniform_behavior(1)
        with pytest.raises(ValueError):
            b.table[0, 0, 0, 0] = 1.0

    def test_wire_order(self):
        # block (k=1, k'=0) gets (++, +-, -+, --) = (0.1, 0.2, 0.3, 0.4)
        entries = [0.25] * 16
        entries[8:12] = [0.1, 0.2, 0.3, 0.4]
        b = behavior_from_table(1, entries)
        assert b.p(1, 0, 1, 1) == 0.1
        assert b.p(1, 0, 1, -1) == 0.2
        assert b.p(1, 0, -1, 1) == 0.3
        assert b.p(1, 0, -1, -1) == 0.4

    def test_extremal_box_table_valid(self):
        b = behavior_from_table(1, extremal_ns_box(1).flat())
        assert ns_residual(b).max_residual == 0.0


class TestCorrelation:
    def test_extremal(self):
        box = extremal_ns_box(1)
        assert correlation(box, 1, 0) == 1.0
        assert correlation(box, 0, 0) == -1.0

    def test_uniform(self):
        assert correlation(uniform_behavior(2), 1, 2) == 0.0

    def test_out_of_range(self):
        with pytest.raises(SettingOutOfRange):
            correlation(uniform_behavior(1), 2, 0)
        with pytest.raises(SettingOutOfRange):
            correlation(uniform_behavior(1), 0, -1)

    @given(st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda v: sum(v) > 1e-3))
    def test_bounded(self, raw):
        blk = np.array(raw) / sum(raw)
        b = behavior_from_array(np.broadcast_to(blk.reshape(2, 2), (2, 2, 2, 2)))
        assert -1.0 - 1e-15 <= correlation(b, 0, 1) <= 1.0 + 1e-15


class TestChsh:
    def test_extremal_k1(self):
        assert chsh_k(extremal_ns_box(1)) == 4.0

    @pytest.mark.parametrize("K", [1, 2, 3, 6])
    def test_all_plus(self, K):
        assert chsh_k(all_plus(K)) == 2 * K

    def test_born(self):
        assert chsh_k(born_behavior(0.5, 1)) == pytest.approx(2 + 4 * P_K_QM_HALF_1, abs=1e-12)
        assert chsh_k(born_behavior(0.5, 1)) == pytest.approx(2.355556, abs=1e-6)


class TestChValues:
    def test_all_plus(self):
        assert ch_values(all_plus(2))[0] == 0.0

    def test_extremal(self):
        assert ch_values(extremal_ns_box(1))[0] == 0.5

    def test_born(self):
        assert ch_values(born_behavior(0.5, 1))[0] == pytest.approx(P_K_QM_HALF_1, abs=1e-12)


class TestNsResidual:
    def test_born(self):
        assert ns_residual(born_behavior(0.3, 2)).max_residual <= 1e-12

    def test_extremal(self):
        assert ns_residual(extremal_ns_box(3)).max_residual == 0.0

    def test_constructed_violation(self):
        # A0 = +1 always when paired with B0, fair coin when paired with B1
        t = np.full((2, 2, 2, 2), 0.25)
        t[0, 0] = [[0.5, 0.5], [0.0, 0.0]]
        rep = ns_residual(behavior_from_array(t))
        assert rep.max_residual == pytest.approx(0.5)
        assert rep.worst_constraint.party == "A"
        assert rep.worst_constraint.setting == 0
        assert rep.worst_constraint.remote == (0, 1)


class TestHardyReport:
    def test_extremal(self):
        r = hardy_report(extremal_ns_box(2))
        assert r.p_k == 0.5
        assert r.max_zero_violation == 0.0
        assert len(r.zero_terms) == 5

    def test_born(self):
        r = hardy_report(born_behavior(0.5, 1))
        assert r.p_k == pytest.approx(P_K_QM_HALF_1, abs=1e-12)
        assert r.max_zero_violation <= 1e-12

    def test_uniform(self):
        r = hardy_report(uniform_behavior(1))
        assert r.p_k == 0.25
        assert r.max_zero_violation == 0.25
        assert len(r.zero_terms) == 3

    def test_zero_indices(self):
        assert hardy_zero_indices(1) == [ProbIndex(0, 0, 1, 1), ProbIndex(1, 0, 1, -1), ProbIndex(0, 1, -1, 1)]
        assert len(hardy_zero_indices(7)) == 15


class TestRelations:
    def test_born(self):
        cere3, cere2 = relation_residuals(born_behavior(0.7, 3))
        assert cere3 <= 1e-9
        assert cere2 <= 1e-9

    def test_extremal(self):
        assert relation_residuals(extremal_ns_box(1)) == (0.0, 0.0)

    def test_mixture(self, rng):
        for _ in range(20):
            b = ns_mixture(2, rng)
            assert relation_residuals(b)[0] <= 1e-9

    def test_mixture_brute_force(self, rng):
        # recompute the chained sums from scratch on the mixture's raw table
        b = ns_mixture(2, rng)
        t = b.table
        E = lambda k, kp: t[k, kp, 0, 0] + t[k, kp, 1, 1] - t[k, kp, 0, 1] - t[k, kp, 1, 0]  # noqa: E731
        chsh = E(1, 0) + E(2, 1) + E(0, 1) + E(1, 2) + E(2, 2) - E(0, 0)
        ch = t[2, 2, 0, 0] - t[0, 0, 0, 0] - t[1, 0, 0, 1] - t[2, 1, 0, 1] - t[0, 1, 1, 0] - t[1, 2, 1, 0]
        assert chsh == pytest.approx(chsh_k(b), abs=1e-14)
        assert abs(chsh - 4 - 4 * ch) <= 1e-9

    def test_signaling_breaks_relation(self):
        t = np.full((2, 2, 2, 2), 0.25)
        t[1, 1] = [[1.0, 0.0], [0.0, 0.0]]
        b = behavior_from_array(t)
        assert ns_residual(b).max_residual == pytest.approx(0.5)
        # CHSH = 1, CH+ = 1 - 3(0.25)
        assert relation_residuals(b)[0] == pytest.approx(2.0)


@settings(max_examples=60, deadline=None)
@given(K=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_ns_mixtures_satisfy_general_relation(K, seed):
    b = ns_mixture(K, np.random.default_rng(seed))
    assert ns_residual(b).max_residual <= 1e-12
    assert relation_residuals(b)[0] <= 1e-9


@settings(max_examples=60, deadline=None)
@given(K=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_swap_invariance(K, seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(size=(K + 1, K + 1, 2, 2))
    b = behavior_from_array(t / t.sum(axis=(2, 3), keepdims=True))
    assert chsh_k(swap_parties(b)) == pytest.approx(chsh_k(b), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(K=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_ch_sum_identity(K, seed):
    # holds for any normalized table; NS is not needed for this one
    rng = np.random.default_rng(seed)
    t = rng.uniform(size=(K + 1, K + 1, 2, 2))
    b = behavior_from_array(t / t.sum(axis=(2, 3), keepdims=True))
    p, m = ch_values(b)
    assert p + m == pytest.approx((chsh_k(b) - 2 * K) / 2, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(
    K=st.integers(1, 5),
    x=st.floats(0.05, 0.95),
    w=st.floats(0, 1),
    scale=st.floats(1e-8, 1e-2),
    seed=st.integers(0, 2**32 - 1),
)
def test_eq8_stability_constant(K, x, w, scale, seed):
    # Hardy-satisfying NS behavior, then noise on every entry
    base = mix([born_behavior(x, K), extremal_ns_box(K)], [1 - w, w]) if 0 < w < 1 else born_behavior(x, K)
    b = perturb(base, scale, np.random.default_rng(seed))
    eps = max(ns_residual(b).max_residual, hardy_report(b).max_zero_violation)
    assert eq8_residual(b) <= relation_error_constant(K) * eps + 1e-12


def test_relation_constant_is_tight_enough_to_matter():
    assert relation_error_constant(1) == 20
    assert relation_error_constant(4) == 56


def test_pure_operations():
    b = born_behavior(0.4, 3)
    assert chsh_k(b) == chsh_k(b)
    assert hardy_report(b) == hardy_report(b)
    assert born_behavior(0.4, 3) == b


class TestSerialization:
    def test_json_roundtrip(self):
        b = born_behavior(0.37, 3)
        b2 = behavior_from_json(json.loads(json.dumps(b.to_json_dict())))
        assert np.max(np.abs(b2.table - b.table)) <= 1e-15

    def test_json_format(self):
        d = extremal_ns_box(1).to_json_dict()
        assert d["k"] == 1
        assert d["order"] == "kkp-rowmajor;pp,pm,mp,mm"
        assert len(d["table"]) == 16

    def test_bad_order(self):
        d = uniform_behavior(1).to_json_dict()
        d["order"] = "other"
        with pytest.raises(DomainError):
            behavior_from_json(d)

    def test_csv(self):
        text = born_behavior(0.5, 1).to_csv()
        lines = text.strip().splitlines()
        assert lines[0] == "k,kp,pp,pm,mp,mm"
        assert len(lines) == 5
        row = lines[-1].split(",")
        assert row[:2] == ["1", "1"]
        assert float(row[2]) == pytest.approx(P_K_QM_HALF_1, abs=1e-15)
