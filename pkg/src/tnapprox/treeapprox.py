"""Binary-tree approximation of tensor networks.

Two routes to a rank-limited tree tensor network:

- :func:`truncate_tree_canonical`: gauge the tree into canonical form around
  each vertex and truncate the local matricization (works on inputs that are
  already trees);
- :func:`density_matrix_alg`: embed an arbitrary network into a binary tree
  and truncate each tree vertex against its full environment using cached
  density matrices, never forming an orthogonal gauge.

Both traverse the tree in post order and truncate against the full
environment, so on tree inputs they produce the same represented tensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import opt_einsum as oe

from .core import (
    FlopCounter,
    Tensor,
    contract,
    contract_network,
    log_weight,
    matricize,
    prime,
    qr,
    truncated_eig,
    truncated_factor,
    unmatricize,
)
from .network import TensorNetwork, tree_embedding
from .trees import EmbeddingTree


class TreeTensorNetwork:
    """A tensor network whose contraction graph is a tree.

    ``log_norm`` carries a factored-out log magnitude: the represented
    tensor is ``exp(log_norm)`` times the contraction of the network.
    Orthogonality of each tensor toward a neighbor is tracked so repeated
    gauge moves only re-factor what changed.
    """

    def __init__(self, net: TensorNetwork, root, log_norm: float = 0.0):
        if root not in net:
            raise ValueError("root is not a vertex of the network")
        self.net = net
        self.root = root
        self.log_norm = float(log_norm)
        self._ortho: dict = {}
        self.validate()

    def validate(self):
        self.net.validate()
        n = len(self.net)
        bonds = self.net.contracted_labels()
        if n > 1 and len(bonds) != n - 1:
            raise ValueError("contraction graph is not a tree")
        seen = {self.root}
        stack = [self.root]
        while stack:
            x = stack.pop()
            for y in self.net.neighbors(x):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if len(seen) != n:
            raise ValueError("tree network is not connected")

    def copy(self) -> "TreeTensorNetwork":
        out = TreeTensorNetwork.__new__(TreeTensorNetwork)
        out.net = self.net.copy()
        out.root = self.root
        out.log_norm = self.log_norm
        out._ortho = dict(self._ortho)
        return out

    # -- tree structure ----------------------------------------------------

    def parent_map(self, root=None) -> dict:
        root = self.root if root is None else root
        par = {root: None}
        stack = [root]
        while stack:
            x = stack.pop()
            for y in self.net.neighbors(x):
                if y not in par:
                    par[y] = x
                    stack.append(y)
        return par

    def postorder(self, root=None):
        root = self.root if root is None else root
        par = self.parent_map(root)
        out = []

        def walk(x):
            for y in self.net.neighbors(x):
                if par.get(y) == x:
                    walk(y)
            out.append(x)

        walk(root)
        return out

    def bond_label(self, a, b) -> str:
        shared = set(self.net.tensor(a).inds) & set(self.net.tensor(b).inds)
        if len(shared) != 1:
            raise ValueError(f"vertices {a!r},{b!r} do not share exactly one bond")
        return next(iter(shared))

    # -- evaluation --------------------------------------------------------

    def dense(self, counter: FlopCounter | None = None) -> Tensor:
        """Contract the tree to a single tensor (log_norm NOT applied)."""
        return contract_network(list(self.net.tensors().values()), counter)

    def value(self, counter: FlopCounter | None = None):
        """(sign, ln|value|) of a closed tree network."""
        x = self.dense(counter).item()
        if x == 0.0:
            return 0.0, -math.inf
        return math.copysign(1.0, x), math.log(abs(x)) + self.log_norm

    def extract_norm(self):
        t = self.net.tensor(self.root)
        nrm = t.norm()
        if nrm > 0.0:
            self.net.replace(self.root, Tensor(t.data / nrm, t.inds))
            self.log_norm += math.log(nrm)

    # -- gauge moves -------------------------------------------------------

    def _set(self, vid, tensor, ortho_toward=None):
        self.net.replace(vid, tensor)
        self._ortho[vid] = ortho_toward

    def orthogonalize_side(self, a, b, counter: FlopCounter | None = None):
        """QR-sweep the side containing ``a`` toward edge (a, b).

        Mutates the network: every vertex on a's side becomes orthogonal
        toward its next hop, and the non-orthogonal core R of the edge is
        returned as ``(r, core_label)`` where r maps the new core mode to the
        old bond mode and ``a``'s tensor now carries ``core_label``.
        Vertices already tagged orthogonal in the right direction are
        skipped.
        """
        par = self.parent_map(b)  # next hop toward b is the parent
        side_set = self._component(a, without=b)
        side = [x for x in self.postorder(b) if x in side_set]
        r_mat = None
        core_label = None
        for x in side:
            nxt = par[x]
            t = self.net.tensor(x)
            lab = self.bond_label(x, nxt)
            if self._ortho.get(x) == nxt:
                if x == a:
                    k = t.size_of(lab)
                    r_mat = np.eye(k)
                    core_label = lab
                continue
            rows = [i for i in t.inds if i != lab]
            m = matricize(t, rows)
            q, r = qr(m, counter)
            k = q.shape[1]
            self._set(
                x,
                unmatricize(q, rows, [t.size_of(i) for i in rows], [lab], [k]),
                ortho_toward=nxt,
            )
            if x == a:
                r_mat = r
                core_label = lab
            else:
                nt = self.net.tensor(nxt)
                tmp = self.net.fresh_label(f"{lab}__r")
                rt = Tensor(r, (lab, tmp))
                nt2 = contract(nt.relabeled({lab: tmp}), rt, counter)
                self._set(nxt, nt2.transposed(nt.inds), ortho_toward=None)
        return r_mat, core_label

    def _component(self, a, without):
        seen = {a}
        stack = [a]
        while stack:
            x = stack.pop()
            for y in self.net.neighbors(x):
                if y != without and y not in seen:
                    seen.add(y)
                    stack.append(y)
        return seen


def canonical_form(t: TreeTensorNetwork, u, v, counter: FlopCounter | None = None):
    """Orthogonalize all tensors on v's side toward edge (u, v).

    Returns ``(t2, r)``: the gauged network (v's tensor holds the new core
    mode in place of the bond) and the non-orthogonal core matrix, which
    maps the core mode (rows) to the original bond mode at ``u`` (columns).
    """
    if v not in t.net or u not in t.net:
        raise KeyError("canonical_form endpoints must be vertices")
    t.bond_label(u, v)  # raises if not adjacent
    t2 = t.copy()
    r, _ = t2.orthogonalize_side(v, u, counter)
    return t2, r


def truncate_tree_canonical(
    t: TreeTensorNetwork, chi=None, counter: FlopCounter | None = None
) -> TreeTensorNetwork:
    """Rank-limited truncation of a tree network by canonical-form sweeps.

    Visits non-root vertices in post order; at each vertex the rest of the
    network is orthogonalized toward it, the local tensor times the core is
    truncated to rank ``chi``, and the remainder is absorbed into the
    parent.
    """
    t = t.copy()
    par = t.parent_map()
    for v in t.postorder():
        if v == t.root:
            continue
        u = par[v]
        lab = t.bond_label(u, v)
        r_mat, _ = t.orthogonalize_side(u, v, counter)
        tv = t.net.tensor(v)
        rows = [i for i in tv.inds if i != lab]
        tmp = t.net.fresh_label(f"{lab}__core")
        prod = contract(tv, Tensor(r_mat.T, (lab, tmp)), counter)
        m = matricize(prod, rows)
        u_mat, s_mat = truncated_factor(m, chi, counter)
        k = u_mat.shape[1]
        t._set(
            v,
            unmatricize(u_mat, rows, [tv.size_of(i) for i in rows], [lab], [k]),
            ortho_toward=u,
        )
        tu = t.net.tensor(u)
        # s_mat: new bond (rows) by core mode (cols); u currently carries lab
        tu2 = contract(tu.relabeled({lab: tmp}), Tensor(s_mat, (lab, tmp)), counter)
        t._set(u, tu2.transposed(tu.inds), ortho_toward=None)
    t.extract_norm()
    return t


# -- density-matrix route -----------------------------------------------------


@dataclass
class DensityMatrixCache:
    """Memoized subtree density matrices, keyed by directed tree edge."""

    entries: dict = field(default_factory=dict)
    computes: int = 0
    hits: int = 0

    def invalidate_touching(self, nodes):
        nodes = set(nodes)
        stale = [k for k, (side, _) in self.entries.items() if side & nodes]
        for k in stale:
            del self.entries[k]


class PartitionedTree:
    """A tree whose vertices each hold a bag of tensors (the T' of the
    density-matrix algorithm)."""

    def __init__(self, adjacency: dict, groups: dict):
        self.adj = {n: set(ns) for n, ns in adjacency.items()}
        self.groups = {n: list(ts) for n, ts in groups.items()}

    @classmethod
    def from_embedding(cls, g2: TensorNetwork, t: EmbeddingTree, phi: dict):
        adjacency = {n: set(t.neighbors(n)) for n in t.nodes}
        groups: dict = {n: [] for n in t.nodes}
        for vid in g2.vertices:
            groups[phi[vid]].append(g2.tensor(vid))
        for n, g in groups.items():
            if not g:
                raise ValueError(f"tree vertex {n} has an empty preimage")
        return cls(adjacency, groups)

    def side(self, x, avoid) -> frozenset:
        seen = {x}
        stack = [x]
        while stack:
            n = stack.pop()
            for m in self.adj[n]:
                if m != avoid and m not in seen:
                    seen.add(m)
                    stack.append(m)
        return frozenset(seen)

    def _labels_of(self, nodes):
        out = []
        seen = set()
        for n in nodes:
            for t in self.groups[n]:
                for l in t.inds:
                    if l not in seen:
                        seen.add(l)
                        out.append(l)
        return out

    def crossing(self, x, y):
        """Network labels routed across tree edge (x, y)."""
        side = self.side(x, avoid=y)
        other = [n for n in self.adj if n not in side]
        la = set(self._labels_of(side))
        return [l for l in self._labels_of(other) if l in la]

    def dangling_labels(self):
        counts: dict = {}
        order = []
        for n in self.adj:
            for t in self.groups[n]:
                for l in t.inds:
                    if l not in counts:
                        order.append(l)
                    counts[l] = counts.get(l, 0) + 1
        return [l for l in order if counts[l] == 1]

    def merge(self, v, u, extra=()):
        """Fold vertex v (a leaf of the tree) into its neighbor u."""
        if self.adj[v] != {u}:
            raise ValueError("can only merge a leaf into its neighbor")
        self.groups[u].extend(self.groups[v])
        self.groups[u].extend(extra)
        del self.groups[v]
        self.adj[u].discard(v)
        del self.adj[v]


def _sandwich(bag, bra_of, env_pieces, counter):
    """Contract ket and bra copies of a bag against environment pieces.

    The pairwise order is chosen by a contraction-path optimizer; a naive
    greedy order can glue many kets before their bras and build
    exponentially large intermediates.
    """
    pieces = []
    for t in bag:
        pieces.append(t)
        pieces.append(bra_of(t))
    pieces.extend(env_pieces)
    if len(pieces) <= 2:
        return contract_network(pieces, counter)
    return _contract_optimized(pieces, counter)


def _contract_optimized(pieces, counter):
    """Contract ``pieces`` pairwise along an optimized einsum path.

    Every label appears in at most two of the pieces, so contracting a pair
    over all of its shared labels matches einsum semantics.
    """
    symbol = {}
    for p in pieces:
        for l in p.inds:
            if l not in symbol:
                symbol[l] = oe.get_symbol(len(symbol))
    counts: dict = {}
    for p in pieces:
        for l in p.inds:
            counts[l] = counts.get(l, 0) + 1
    out_syms = "".join(symbol[l] for l, k in counts.items() if k == 1)
    eq = ",".join("".join(symbol[l] for l in p.inds) for p in pieces)
    eq += "->" + out_syms
    shapes = [tuple(p.size_of(l) for l in p.inds) for p in pieces]
    optimize = "dp" if len(pieces) <= 24 else "greedy"
    path, _info = oe.contract_path(eq, *shapes, shapes=True, optimize=optimize)
    pool = list(pieces)
    for step in path:
        group = [pool[i] for i in step]
        for i in sorted(step, reverse=True):
            pool.pop(i)
        out = group[0]
        for t in group[1:]:
            out = contract(out, t, counter)
        pool.append(out)
    out = pool[0]
    for t in pool[1:]:
        out = contract(out, t, counter)
    return out


def _gram(
    ptree: PartitionedTree,
    x,
    y,
    cache: DensityMatrixCache,
    counter: FlopCounter | None,
):
    """Density matrix of x's side across tree edge (x, y).

    Returns a tensor over the crossing labels and their primed copies; all
    other open modes of the side are traced between ket and bra.
    """
    key = (x, y)
    if key in cache.entries:
        cache.hits += 1
        return cache.entries[key][1]
    cache.computes += 1
    dangling = set(ptree.dangling_labels())
    env = [
        _gram(ptree, w, x, cache, counter) for w in ptree.adj[x] if w != y
    ]
    out = _sandwich(
        ptree.groups[x],
        lambda t: t.primed(keep=[l for l in t.inds if l in dangling]),
        env,
        counter,
    )
    expected = set(ptree.crossing(x, y))
    expected |= {prime(l) for l in expected}
    if set(out.inds) != expected:
        raise RuntimeError("density matrix has unexpected open modes")
    cache.entries[key] = (ptree.side(x, avoid=y), out)
    return out


def _gram_matrix(g: Tensor, labels) -> np.ndarray:
    labels = list(labels)
    t = g.transposed(labels + [prime(l) for l in labels])
    n = int(np.prod([t.size_of(l) for l in labels], dtype=np.int64))
    return t.data.reshape(n, n)


def density_matrix(
    ptree: PartitionedTree,
    v,
    target=None,
    cache: DensityMatrixCache | None = None,
    counter: FlopCounter | None = None,
) -> Tensor:
    """Density matrix of vertex ``v`` of a partitioned tree.

    With ``target=None`` the open modes are the uncontracted labels of v's
    bag and the environment is the whole remaining tree; with a neighbor as
    target the open modes are the labels crossing edge (v, target) and only
    v's side contributes.
    """
    cache = DensityMatrixCache() if cache is None else cache
    if target is not None:
        return _gram(ptree, v, target, cache, counter)
    env = [_gram(ptree, w, v, cache, counter) for w in ptree.adj[v]]
    return _sandwich(ptree.groups[v], lambda t: t.primed(), env, counter)


def density_matrix_alg(
    g: TensorNetwork,
    t: EmbeddingTree,
    chi=None,
    counter: FlopCounter | None = None,
    seed: int = 0,
    embedding=None,
    cache_stats: dict | None = None,
) -> TreeTensorNetwork:
    """Approximate a network by a binary tree with bond ranks at most ``chi``.

    The network is embedded into the tree (one bag of tensors per tree
    vertex), then each non-root vertex is truncated in post order against
    its full environment: either by the leading eigenvectors of its density
    matrix, or — when its open modes outweigh its bond modes — by QR of the
    local matricization followed by the environment density matrix in the
    reduced basis.
    """
    if embedding is None:
        g2, phi = tree_embedding(g, t, seed=seed)
    else:
        g2, phi = embedding
    ptree = PartitionedTree.from_embedding(g2, t, phi)
    cache = DensityMatrixCache()
    out_net = TensorNetwork()
    used_labels = set(g2.labels())

    def fresh_bond(n):
        lab = f"__m{n}"
        k = 0
        while lab in used_labels:
            lab = f"__m{n}.{k}"
            k += 1
        used_labels.add(lab)
        return lab

    order = t.postorder()
    for v in order[:-1]:
        u = t.parent[v]
        dangling = set(ptree.dangling_labels())
        a_labels = [
            l
            for l in ptree._labels_of([v])
            if l in dangling
        ]
        b_labels = ptree.crossing(v, u)
        sizes = {}
        for tt in ptree.groups[v]:
            sizes.update(tt.sizes)
        bond = fresh_bond(v)
        if log_weight(sizes[l] for l in a_labels) <= log_weight(
            sizes[l] for l in b_labels
        ) + 1e-12:
            dm = density_matrix(ptree, v, None, cache, counter)
            u_mat, _ = truncated_eig(_gram_matrix(dm, a_labels), chi, counter)
        else:
            env = density_matrix(ptree, v, u, cache, counter)
            m_v = contract_network(ptree.groups[v], counter)
            mmat = matricize(m_v, a_labels)
            b_order = [l for l in m_v.inds if l not in a_labels]
            q, r = qr(mmat, counter)
            lmat = _gram_matrix(env, b_order)
            core = r @ lmat @ r.T
            if counter is not None:
                counter.add(
                    float(r.shape[0]) * r.shape[1] * lmat.shape[1]
                    + float(r.shape[0]) * lmat.shape[1] * r.shape[0],
                    "contract",
                )
            u_hat, _ = truncated_eig(core, chi, counter)
            u_mat = q @ u_hat
            if counter is not None:
                counter.add(
                    float(q.shape[0]) * q.shape[1] * u_hat.shape[1], "contract"
                )
        k = u_mat.shape[1]
        u_t = unmatricize(
            u_mat, a_labels, [sizes[l] for l in a_labels], [bond], [k]
        )
        out_net.add(v, u_t)
        # fold the finished vertex into one projected tensor so later
        # density matrices never re-contract its bag
        proj = contract_network(ptree.groups[v] + [u_t], counter)
        ptree.groups[v] = []
        ptree.merge(v, u, extra=[proj])
        cache.invalidate_touching({v, u})
    root = order[-1]
    m_r = contract_network(ptree.groups[root], counter)
    out_net.add(root, m_r)
    if cache_stats is not None:
        cache_stats["computes"] = cache.computes
        cache_stats["hits"] = cache.hits
        cache_stats["tree_vertices"] = len(order)
    out = TreeTensorNetwork(out_net, root=root)
    out.extract_norm()
    return out
