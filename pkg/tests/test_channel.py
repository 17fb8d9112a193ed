import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from listexp.channel import (
    ChannelError,
    Dmc,
    TupleJoint,
    as_distribution,
    bec,
    binary_divergence,
    bsc,
    composition_counts,
    conditional_divergence,
    empirical_joint_type,
    empirical_mutual_information,
    entropy,
    joint_mutual_information,
    kl_divergence,
    load_channel,
    multi_information,
    multi_information_kl,
    mutual_information,
)


def dirichlet_rows(seed, k, m):
    return np.random.default_rng(seed).dirichlet(np.ones(m), size=k)


def brute_mi(q, w):
    # plain double loop with explicit 0 ln 0 handling
    out = np.asarray(q) @ np.asarray(w)
    total = 0.0
    for x in range(len(q)):
        for y in range(len(out)):
            p = q[x] * w[x][y]
            if p > 0:
                total += p * math.log(w[x][y] / out[y])
    return total


class TestDmc:
    def test_rows_renormalized_within_tolerance(self):
        w = Dmc([[0.5 + 4e-10, 0.5], [0.2, 0.8]])
        assert np.allclose(w.matrix.sum(axis=1), 1.0, atol=1e-15)

    @pytest.mark.parametrize("bad", [
        [[0.5, 0.6], [0.5, 0.5]],
        [[-0.1, 1.1], [0.5, 0.5]],
        [[1.0]],
        [[0.5, 0.5]],
        [[np.nan, 1.0], [0.5, 0.5]],
    ])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ChannelError):
            Dmc(bad)

    def test_json_round_trip(self, tmp_path):
        w = bec(0.2)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(w.to_json()))
        assert load_channel(path) == w
        assert load_channel(path).fingerprint() == w.fingerprint()

    def test_declared_size_mismatch(self):
        with pytest.raises(ChannelError):
            Dmc.from_json({"input_size": 3, "output_size": 2, "matrix": [[1, 0], [0, 1]]})

    def test_missing_field(self):
        with pytest.raises(ChannelError):
            Dmc.from_json({"matrix": [[1, 0], [0, 1]]})


class TestInformation:
    def test_bsc_capacity_point(self):
        # 1 bit minus the binary entropy of 0.1, in nats
        h = -(0.1 * math.log(0.1) + 0.9 * math.log(0.9))
        assert mutual_information([0.5, 0.5], bsc(0.1)) == pytest.approx(math.log(2) - h, abs=1e-14)

    def test_noiseless_and_useless(self):
        assert mutual_information([0.3, 0.7], np.eye(2)) == pytest.approx(entropy([0.3, 0.7]))
        assert mutual_information([0.3, 0.7], [[0.4, 0.6], [0.4, 0.6]]) == pytest.approx(0.0, abs=1e-15)

    def test_matches_loop(self):
        for seed in range(20):
            k, m = 2 + seed % 3, 2 + (seed // 3) % 3
            w = dirichlet_rows(seed, k, m)
            q = np.random.default_rng(seed + 100).dirichlet(np.ones(k))
            assert mutual_information(q, w) == pytest.approx(brute_mi(q, w), abs=1e-13)

    def test_divergence_conventions(self):
        assert kl_divergence([0.0, 1.0], [0.5, 0.5]) == pytest.approx(math.log(2))
        assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf
        assert binary_divergence(0.0, 0.3) == pytest.approx(-math.log(0.7))
        with pytest.raises(ValueError):
            binary_divergence(1.2, 0.5)

    def test_conditional_divergence_off_support(self):
        w = bec(0.3)
        pt = [[0.5, 0.5, 0.0], [0.1, 0.5, 0.4]]
        assert conditional_divergence(pt, w, [0.5, 0.5]) == math.inf
        # only rows with q > 0 count
        assert conditional_divergence(pt, w, [1.0, 0.0]) == pytest.approx(
            0.5 * math.log(0.5 / 0.7) + 0.5 * math.log(0.5 / 0.3))

    def test_as_distribution(self):
        with pytest.raises(ChannelError):
            as_distribution([0.5, 0.6])
        with pytest.raises(ChannelError):
            as_distribution([0.5, 0.5], size=3)


class TestTypes:
    def test_empirical_equals_probabilistic_on_type(self):
        x = [0, 0, 1, 1, 1, 0, 1, 0]
        y = [0, 1, 1, 1, 0, 0, 1, 0]
        jt = empirical_joint_type(x, y, 2, 2)
        assert jt.counts.tolist() == [[3, 1], [1, 3]]
        joint = jt.normalized()
        q = joint.sum(axis=1)
        w = joint / q[:, None]
        assert empirical_mutual_information(jt) == pytest.approx(mutual_information(q, w), abs=1e-15)

    def test_mismatched_sequences(self):
        with pytest.raises(ChannelError):
            empirical_joint_type([0, 1], [0])

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5), st.integers(1, 60))
    def test_composition_rounding(self, raw, n):
        q = np.array(raw) / sum(raw)
        c = composition_counts(q, n)
        assert c.sum() == n
        assert np.all(np.abs(c - n * q) < 1.0)


class TestMultiInformation:
    def test_forms_agree_on_random_tables(self, rng):
        for order in (2, 3, 4):
            t = rng.dirichlet(np.ones(3 ** order)).reshape((3,) * order)
            assert multi_information(t) == pytest.approx(multi_information_kl(t), abs=1e-12)

    def test_product_has_zero(self):
        q = np.array([0.2, 0.8])
        t = np.multiply.outer(np.multiply.outer(q, q), q)
        assert multi_information(TupleJoint(t)) == pytest.approx(0.0, abs=1e-15)

    def test_two_coordinates_is_mutual_information(self, rng):
        t = rng.dirichlet(np.ones(6)).reshape(2, 3)
        assert multi_information(t) == pytest.approx(joint_mutual_information(t), abs=1e-13)

    def test_tuple_joint_marginals(self):
        t = TupleJoint(np.full((2, 2, 2), 0.125))
        assert t.order == 3
        for m in t.marginals():
            assert np.allclose(m, 0.5)


@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 10**6))
def test_mutual_information_bounds(k, m, seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(m) * 0.5, size=k)
    q = rng.dirichlet(np.ones(k))
    mi = mutual_information(q, w)
    assert -1e-15 <= mi <= min(entropy(q), math.log(m)) + 1e-12
