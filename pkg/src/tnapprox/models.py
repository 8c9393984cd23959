"""Benchmark networks: Ising partition functions on lattices and random
closed networks, plus exact reference contractions."""

from __future__ import annotations

import math

import networkx as nx
import numpy as np

from .core import Tensor, contract_network
from .network import TensorNetwork

#: brute-force summation refuses state spaces above this
BRUTE_FORCE_LIMIT = 2**24


def ising_weight_matrix(beta: float) -> np.ndarray:
    """Square root factor W of the Ising bond weight: W @ W.T = [[e^b, e^-b],
    [e^-b, e^b]]."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    c = math.sqrt(math.cosh(beta))
    s = math.sqrt(math.sinh(beta))
    return np.array([[c + s, c - s], [c - s, c + s]]) / math.sqrt(2.0)


def lattice_edges(dims):
    """Nearest-neighbor edges of an open hypercubic lattice."""
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError("lattice dims must be positive")
    verts = list(np.ndindex(*dims))
    edges = []
    for v in verts:
        for ax in range(len(dims)):
            if v[ax] + 1 < dims[ax]:
                u = list(v)
                u[ax] += 1
                lab = "e" + "_".join(map(str, v)) + "." + str(ax)
                edges.append((v, tuple(u), lab))
    return verts, edges


def _vertex_tensor_from_rows(rows_per_edge):
    """sum_i prod_e W[i, k_e] for the given per-edge weight rows."""
    out = None
    for i in range(rows_per_edge[0].shape[0]):
        term = np.array(1.0)
        for w in rows_per_edge:
            term = np.multiply.outer(term, w[i])
        out = term if out is None else out + term
    return out


def ising_network(graph, beta: float) -> TensorNetwork:
    """Ising partition-function network.

    ``graph`` is either a dims tuple for an open lattice or an iterable of
    ``(u, v)`` vertex pairs.  Contracting the network over all edges gives
    Z = sum_spins prod_edges exp(beta * s_u * s_v).
    """
    if isinstance(graph, tuple) and all(isinstance(d, int) for d in graph):
        verts, edges = lattice_edges(graph)
    else:
        pairs = list(graph)
        verts = []
        for u, v in pairs:
            for x in (u, v):
                if x not in verts:
                    verts.append(x)
        edges = [(u, v, f"e{k}") for k, (u, v) in enumerate(pairs)]
    w = ising_weight_matrix(beta)
    incident: dict = {v: [] for v in verts}
    for u, v, lab in edges:
        incident[u].append(lab)
        incident[v].append(lab)
    net = TensorNetwork()
    for v in verts:
        labs = incident[v]
        if not labs:
            raise ValueError(f"vertex {v} has no edges")
        data = _vertex_tensor_from_rows([w] * len(labs))
        net.add(v, Tensor(data, labs))
    return net


def random_regular_ising(n: int, degree: int, beta: float, seed: int = 0):
    g = nx.random_regular_graph(degree, n, seed=seed)
    return ising_network(sorted(g.edges()), beta)


def random_network(
    graph, alpha: float = -0.5, size: int = 2, seed: int = 0
) -> TensorNetwork:
    """Closed network with i.i.d. entries uniform on [alpha, 1].

    ``graph`` is a dims tuple (open lattice) or an iterable of vertex pairs;
    every edge has the given mode size.
    """
    if not -1.0 <= alpha <= 0.0:
        raise ValueError("alpha must lie in [-1, 0]")
    if isinstance(graph, tuple) and all(isinstance(d, int) for d in graph):
        verts, edges = lattice_edges(graph)
    else:
        pairs = list(graph)
        verts = []
        for u, v in pairs:
            for x in (u, v):
                if x not in verts:
                    verts.append(x)
        edges = [(u, v, f"e{k}") for k, (u, v) in enumerate(pairs)]
    rng = np.random.default_rng(seed)
    incident: dict = {v: [] for v in verts}
    for u, v, lab in edges:
        incident[u].append(lab)
        incident[v].append(lab)
    net = TensorNetwork()
    for v in verts:
        labs = incident[v]
        shape = tuple(size for _ in labs)
        net.add(v, Tensor(rng.uniform(alpha, 1.0, size=shape), labs))
    return net


def brute_force_value(g: TensorNetwork):
    """(sign, ln|value|) of a closed network by explicit summation.

    Sums over every assignment of every edge index with one unoptimized
    einsum call; per-tensor magnitudes are factored out and carried in log
    space.  Refuses state spaces larger than 2**24.
    """
    if g.dangling_labels():
        raise ValueError("brute-force value needs a closed network")
    space = 1
    for l in g.labels():
        space *= g.size(l)
        if space > BRUTE_FORCE_LIMIT:
            raise ValueError("state space exceeds the brute-force limit")
    axes = {l: i for i, l in enumerate(g.labels())}
    args = []
    log_scale = 0.0
    for t in g.tensors().values():
        m = float(np.abs(t.data).max())
        if m == 0.0:
            return 0.0, -math.inf
        log_scale += math.log(m)
        args.append(t.data / m)
        args.append([axes[l] for l in t.inds])
    val = float(np.einsum(*args, [], optimize=False))
    if val == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, val), math.log(abs(val)) + log_scale


def exact_contract_value(g: TensorNetwork, counter=None):
    """(sign, ln|value|) by exact greedy pairwise contraction."""
    if g.dangling_labels():
        raise ValueError("exact value needs a closed network")
    log_scale = 0.0
    scaled = []
    for t in g.tensors().values():
        m = float(np.abs(t.data).max())
        if m == 0.0:
            return 0.0, -math.inf
        log_scale += math.log(m)
        scaled.append(Tensor(t.data / m, t.inds))
    val = contract_network(scaled, counter).item()
    if val == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, val), math.log(abs(val)) + log_scale


def ising_lnz_spin_sum(dims, beta: float) -> float:
    """ln Z by direct summation over spin configurations (small lattices)."""
    verts, edges = lattice_edges(dims)
    n = len(verts)
    if n > 20:
        raise ValueError("spin summation limited to 20 sites")
    vi = {v: i for i, v in enumerate(verts)}
    confs = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1) * 2 - 1
    energy = np.zeros(2**n)
    for u, v, _ in edges:
        energy += confs[:, vi[u]] * confs[:, vi[v]]
    m = beta * energy.max()
    return float(m + np.log(np.exp(beta * energy - m).sum()))


def ising_lnz_transfer(dims, beta: float) -> float:
    """ln Z of a lattice Ising model by layer-to-layer transfer matrices.

    Sums spins exactly, one hyperplane (all but the last lattice axis) at a
    time, so the cost is 2^(layer sites) per layer rather than 2^(all sites).
    """
    dims = tuple(dims)
    layer = dims[:-1]
    n = int(np.prod(layer))
    if n > 20:
        raise ValueError("transfer layer limited to 20 sites")
    verts, edges = lattice_edges(layer)
    vi = {v: i for i, v in enumerate(verts)}
    spins = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1) * 2 - 1
    energy = np.zeros(2**n)
    for u, v, _ in edges:
        energy += spins[:, vi[u]] * spins[:, vi[v]]
    intra = np.exp(beta * energy)
    couple = np.array(
        [
            [math.exp(beta), math.exp(-beta)],
            [math.exp(-beta), math.exp(beta)],
        ]
    )
    vec = intra.copy()
    ln_scale = 0.0
    for _ in range(dims[-1] - 1):
        t = vec.reshape([2] * n)
        for s in range(n):
            t = np.moveaxis(
                np.tensordot(couple, np.moveaxis(t, s, 0), axes=(1, 0)), 0, s
            )
        vec = t.reshape(-1) * intra
        m = float(vec.max())
        vec /= m
        ln_scale += math.log(m)
    return float(np.log(vec.sum()) + ln_scale)


def random_mps(n: int, phys: int, rank: int, seed: int = 0, left: int = 1,
               right: int = 1):
    """Random MPS with entries uniform on [-1, 1].

    left/right set the dangling end bond sizes (1 for a closed chain).
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        dl = left if i == 0 else rank
        dr = right if i == n - 1 else rank
        out.append(rng.uniform(-1.0, 1.0, size=(dl, phys, dr)))
    return out


def random_mpo(n: int, phys: int, rank: int, seed: int = 0, left: int = 1,
               right: int = 1):
    """Random MPO with entries uniform on [-1, 1].

    left/right set the dangling end bond sizes (1 for a closed chain).
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        dl = left if i == 0 else rank
        dr = right if i == n - 1 else rank
        out.append(rng.uniform(-1.0, 1.0, size=(dl, phys, phys, dr)))
    return out
