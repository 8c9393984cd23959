"""Shared helpers for the test suite."""

import numpy as np

from tnapprox.core import Tensor
from tnapprox.network import TensorNetwork
from tnapprox.ordering import CTNode


def random_constraint_tree(rng, items):
    """Random ordered/unordered tree whose leaves are ``items``."""
    nodes = [CTNode("leaf", item=x) for x in items]
    rng.shuffle(nodes)
    while len(nodes) > 1:
        k = int(rng.integers(2, min(4, len(nodes)) + 1))
        picked = [nodes.pop() for _ in range(k)]
        kind = "ordered" if rng.random() < 0.5 else "unordered"
        nodes.append(CTNode(kind, picked))
        rng.shuffle(nodes)
    return nodes[0]


def random_open_network(n_vertices, rng, size=2):
    """Connected random network with one dangling edge per vertex."""
    net = TensorNetwork()
    inds_of = {i: [f"open{i}"] for i in range(n_vertices)}
    for j in range(1, n_vertices):
        i = int(rng.integers(0, j))
        inds_of[i].append(f"e{i}_{j}")
        inds_of[j].append(f"e{i}_{j}")
    extra = int(rng.integers(0, n_vertices))
    for _ in range(extra):
        i, j = sorted(rng.choice(n_vertices, size=2, replace=False))
        label = f"x{i}_{j}"
        if label not in inds_of[i]:
            inds_of[i].append(label)
            inds_of[j].append(label)
    for i in range(n_vertices):
        net.add(
            i, Tensor(rng.standard_normal([size] * len(inds_of[i])),
                      inds_of[i])
        )
    return net
