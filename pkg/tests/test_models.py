import math

import numpy as np
import pytest

from tnapprox.core import Tensor
from tnapprox.models import (
    brute_force_value,
    exact_contract_value,
    ising_lnz_spin_sum,
    ising_network,
    ising_weight_matrix,
    random_mpo,
    random_mps,
    random_network,
    random_regular_ising,
)
from tnapprox.network import TensorNetwork


@pytest.mark.parametrize("beta", [0.0, 0.3, 0.44, 0.65])
def test_weight_matrix_identity(beta):
    w = ising_weight_matrix(beta)
    want = np.array(
        [
            [math.exp(beta), math.exp(-beta)],
            [math.exp(-beta), math.exp(beta)],
        ]
    )
    assert np.allclose(w @ w.T, want, atol=1e-14)


def test_beta_zero_counts_configurations():
    for dims in [(2, 2), (3, 3), (2, 2, 2)]:
        net = ising_network(dims, 0.0)
        n = len(net.vertices)
        _, ln = exact_contract_value(net)
        assert abs(ln - n * math.log(2)) <= 1e-12 * n


def test_two_vertex_partition_function():
    net = ising_network([("a", "b")], 0.3)
    sign, ln = exact_contract_value(net)
    assert sign == 1.0
    assert abs(math.exp(ln) - 4 * math.cosh(0.3)) <= 1e-12


@pytest.mark.parametrize("dims", [(2, 2), (3, 3), (4, 4), (2, 2, 2)])
def test_ising_network_matches_spin_sum(dims):
    net = ising_network(dims, 0.44)
    _, ln = exact_contract_value(net)
    want = ising_lnz_spin_sum(dims, 0.44)
    assert abs(ln - want) <= 1e-10 * abs(want)


def test_ising_network_from_edge_list():
    # a triangle, Z = sum over 8 spin configurations
    net = ising_network([(0, 1), (1, 2), (0, 2)], 0.2)
    _, ln = exact_contract_value(net)
    z = 0.0
    for bits in range(8):
        s = [1 if bits >> i & 1 else -1 for i in range(3)]
        z += math.exp(0.2 * (s[0] * s[1] + s[1] * s[2] + s[0] * s[2]))
    assert abs(math.exp(ln) - z) <= 1e-10 * z


def test_brute_force_scalar():
    net = TensorNetwork()
    net.add("a", Tensor(np.array([1.0, 2.0]), ("x",)))
    net.add("b", Tensor(np.array([1.0, 2.0]), ("x",)))
    sign, ln = brute_force_value(net)
    assert sign == 1.0
    assert abs(math.exp(ln) - 5.0) <= 1e-14


def test_brute_force_matches_exact():
    for seed in range(5):
        net = random_network((2, 3), seed=seed)
        s1, l1 = brute_force_value(net)
        s2, l2 = exact_contract_value(net)
        assert s1 == s2
        assert abs(l1 - l2) <= 1e-10 * max(1.0, abs(l1))


def test_brute_force_matches_spin_sum():
    net = ising_network((4, 4), 0.3)
    _, ln = brute_force_value(net)
    assert abs(ln - ising_lnz_spin_sum((4, 4), 0.3)) <= 1e-10


def test_brute_force_rejects_open_network():
    net = TensorNetwork()
    net.add("a", Tensor(np.ones((2, 2)), ("x", "y")))
    net.add("b", Tensor(np.ones(2), ("x",)))
    with pytest.raises(ValueError):
        brute_force_value(net)


def test_random_network_reproducible():
    a = random_network((3, 3), seed=7)
    b = random_network((3, 3), seed=7)
    for v in a.vertices:
        assert np.array_equal(a.tensor(v).data, b.tensor(v).data)
    c = random_network((3, 3), seed=8)
    assert not np.array_equal(
        a.tensor((0, 0)).data, c.tensor((0, 0)).data
    )


def test_random_network_entry_range():
    net = random_network((3, 3), alpha=-0.25, seed=0)
    for v in net.vertices:
        d = net.tensor(v).data
        assert d.min() >= -0.25 and d.max() <= 1.0


def test_random_network_alpha_range():
    with pytest.raises(ValueError):
        random_network((2, 2), alpha=0.5)
    with pytest.raises(ValueError):
        random_network((2, 2), alpha=-1.5)


def test_random_regular_ising():
    net = random_regular_ising(8, 3, 0.2, seed=1)
    assert len(net.vertices) == 8
    for v in net.vertices:
        assert len(net.tensor(v).inds) == 3
    _, ln = exact_contract_value(net)
    assert math.isfinite(ln)


def test_random_mps_shapes():
    mps = random_mps(4, 2, 5, seed=0)
    assert [a.shape for a in mps] == [
        (1, 2, 5),
        (5, 2, 5),
        (5, 2, 5),
        (5, 2, 1),
    ]
    mps = random_mps(3, 2, 4, seed=0, left=3, right=2)
    assert mps[0].shape == (3, 2, 4)
    assert mps[-1].shape == (4, 2, 2)


def test_random_mpo_shapes():
    mpo = random_mpo(3, 2, 4, seed=0, left=2)
    assert [a.shape for a in mpo] == [(2, 2, 2, 4), (4, 2, 2, 4), (4, 2, 2, 1)]


def test_random_mps_reproducible():
    a = random_mps(4, 2, 3, seed=5)
    b = random_mps(4, 2, 3, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = random_mps(4, 2, 3, seed=6)
    assert not np.array_equal(a[0], c[0])
