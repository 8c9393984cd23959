"""Tensor networks as labeled multigraphs, with the graph algorithms used to
place them inside binary trees: weighted min-cut, recursive-bisection linear
ordering, and tree embedding."""

from __future__ import annotations

import math

import networkx as nx
import numpy as np

from .core import Tensor, log_weight
from .trees import EmbeddingTree

#: exhaustive balanced-bisection search up to this many movable vertices
_EXACT_BISECTION_LIMIT = 16


class TensorNetwork:
    """A collection of labeled tensors.

    A label owned by two tensors is a contracted edge; a label owned by one
    tensor is an uncontracted (dangling) edge.  No label may appear more than
    twice.  Vertex and label insertion order is preserved and used for all
    tie-breaking, so behavior is invariant under relabelings that keep the
    order.
    """

    def __init__(self, tensors=None):
        self._tensors: dict = {}
        if tensors:
            items = tensors.items() if isinstance(tensors, dict) else tensors
            for vid, t in items:
                self.add(vid, t)

    # -- construction ------------------------------------------------------

    def add(self, vid, tensor: Tensor):
        if vid in self._tensors:
            raise ValueError(f"duplicate vertex id {vid!r}")
        for l in tensor.inds:
            owners = self.owners(l)
            if len(owners) >= 2:
                raise ValueError(f"label '{l}' would appear more than twice")
            if owners:
                other = self._tensors[owners[0]]
                if other.size_of(l) != tensor.size_of(l):
                    raise ValueError(
                        f"size mismatch on '{l}': "
                        f"{other.size_of(l)} vs {tensor.size_of(l)}"
                    )
        self._tensors[vid] = tensor

    def replace(self, vid, tensor: Tensor):
        """Swap the tensor at an existing vertex, keeping insertion order."""
        if vid not in self._tensors:
            raise KeyError(vid)
        counts: dict = {}
        for v, t in self._tensors.items():
            if v == vid:
                continue
            for l in t.inds:
                counts[l] = counts.get(l, 0) + 1
        for l in tensor.inds:
            if counts.get(l, 0) >= 2:
                raise ValueError(f"label '{l}' would appear more than twice")
        self._tensors[vid] = tensor

    def remove(self, vid):
        del self._tensors[vid]

    def copy(self) -> "TensorNetwork":
        out = TensorNetwork()
        out._tensors = dict(self._tensors)
        return out

    # -- queries -----------------------------------------------------------

    @property
    def vertices(self):
        return list(self._tensors)

    def tensor(self, vid) -> Tensor:
        return self._tensors[vid]

    def tensors(self):
        return dict(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def __contains__(self, vid):
        return vid in self._tensors

    def owners(self, label):
        return [v for v, t in self._tensors.items() if label in t.inds]

    def labels(self):
        out = []
        seen = set()
        for t in self._tensors.values():
            for l in t.inds:
                if l not in seen:
                    seen.add(l)
                    out.append(l)
        return out

    def size(self, label) -> int:
        for t in self._tensors.values():
            if label in t.inds:
                return t.size_of(label)
        raise KeyError(label)

    def dangling_labels(self):
        counts: dict = {}
        for t in self._tensors.values():
            for l in t.inds:
                counts[l] = counts.get(l, 0) + 1
        return [l for l, c in counts.items() if c == 1]

    def contracted_labels(self):
        counts: dict = {}
        for t in self._tensors.values():
            for l in t.inds:
                counts[l] = counts.get(l, 0) + 1
        return [l for l, c in counts.items() if c == 2]

    def neighbors(self, vid):
        mine = set(self._tensors[vid].inds)
        return [
            v
            for v, t in self._tensors.items()
            if v != vid and mine & set(t.inds)
        ]

    def subnetwork(self, vids) -> "TensorNetwork":
        vids = set(vids)
        out = TensorNetwork()
        for v, t in self._tensors.items():
            if v in vids:
                out._tensors[v] = t
        return out

    def crossing_labels(self, vids_a, vids_b):
        """Labels shared between tensors of the two vertex sets."""
        la = set()
        for v in vids_a:
            la.update(self._tensors[v].inds)
        out = []
        seen = set()
        for v in vids_b:
            for l in self._tensors[v].inds:
                if l in la and l not in seen:
                    seen.add(l)
                    out.append(l)
        return out

    def fresh_label(self, base: str) -> str:
        existing = set(self.labels())
        if base not in existing:
            return base
        k = 0
        while f"{base}.{k}" in existing:
            k += 1
        return f"{base}.{k}"

    def total_edge_weight(self) -> float:
        return log_weight(self.size(l) for l in self.labels())

    def validate(self):
        counts: dict = {}
        for t in self._tensors.values():
            for l, s in zip(t.inds, t.data.shape):
                counts.setdefault(l, []).append(s)
        for l, sizes in counts.items():
            if len(sizes) > 2:
                raise ValueError(f"label '{l}' appears {len(sizes)} times")
            if len(set(sizes)) != 1:
                raise ValueError(f"size mismatch on '{l}'")


# -- weighted minimum cut ---------------------------------------------------


def mincut(g: TensorNetwork, e1_labels, e2_labels):
    """Minimum-weight vertex bipartition separating two edge groups.

    Edge weights are log mode sizes.  Terminal vertices are attached to the
    owners of ``e1_labels`` / ``e2_labels`` with capacity exceeding the total
    network weight, and the cut is found by max-flow.  Returns
    ``(value, (side1, side2))`` where ``value`` counts real edges only and
    ``side1`` holds the e1 attachments.
    """
    if set(e1_labels) & set(e2_labels):
        raise ValueError("edge groups must be disjoint")
    verts = g.vertices
    att1, att2 = set(), set()
    for l in e1_labels:
        att1.update(g.owners(l))
    for l in e2_labels:
        att2.update(g.owners(l))
    if not att1:
        return 0.0, ((), tuple(verts))
    if not att2:
        return 0.0, (tuple(verts), ())

    inf = g.total_edge_weight() + 1.0
    h = nx.Graph()
    h.add_nodes_from(("__a",) + tuple(verts) + ("__b",))
    for l in g.contracted_labels():
        u, v = g.owners(l)
        w = math.log(g.size(l))
        if h.has_edge(u, v):
            h[u][v]["capacity"] += w
        else:
            h.add_edge(u, v, capacity=w)
    for v in att1:
        h.add_edge("__a", v, capacity=inf)
    for v in att2:
        if h.has_edge("__a", v):
            pass
        h.add_edge(v, "__b", capacity=inf)
    _, (reach, other) = nx.minimum_cut(h, "__a", "__b")
    side1 = tuple(v for v in verts if v in reach)
    side2 = tuple(v for v in verts if v in other)
    s1 = set(side1)
    value = 0.0
    for l in g.contracted_labels():
        u, v = g.owners(l)
        if (u in s1) != (v in s1):
            value += math.log(g.size(l))
    return value, (side1, side2)


def mincut_value_brute(g: TensorNetwork, e1_labels, e2_labels) -> float:
    """Exhaustive reference for :func:`mincut` (small networks only)."""
    verts = g.vertices
    if len(verts) > 20:
        raise ValueError("brute-force min-cut limited to 20 vertices")
    att1, att2 = set(), set()
    for l in e1_labels:
        att1.update(g.owners(l))
    for l in e2_labels:
        att2.update(g.owners(l))
    if not att1 or not att2:
        return 0.0
    fixed1 = att1 - att2
    fixed2 = att2 - att1
    free = [v for v in verts if v not in fixed1 and v not in fixed2]
    edges = [(g.owners(l), math.log(g.size(l))) for l in g.contracted_labels()]
    best = math.inf
    for mask in range(1 << len(free)):
        s1 = set(fixed1)
        for i, v in enumerate(free):
            if mask >> i & 1:
                s1.add(v)
        val = sum(w for (u, v), w in edges if (u in s1) != (v in s1))
        best = min(best, val)
    return best


# -- linear ordering by recursive bisection ----------------------------------


def _induced_edges(g: TensorNetwork, vs):
    vset = set(vs)
    pos = {v: i for i, v in enumerate(vs)}
    out = []
    for l in g.contracted_labels():
        owners = g.owners(l)
        if len(owners) == 2 and owners[0] in vset and owners[1] in vset:
            out.append((pos[owners[0]], pos[owners[1]], math.log(g.size(l))))
    return out


def _cut_weight(edges, mask):
    return sum(w for i, j, w in edges if ((mask >> i) & 1) != ((mask >> j) & 1))


def _balanced_split(g: TensorNetwork, vs, rng):
    """Split ``vs`` into two 1/3-balanced halves of minimum cut weight."""
    n = len(vs)
    lo = max(1, math.ceil(n / 3))
    edges = _induced_edges(g, vs)
    if n <= _EXACT_BISECTION_LIMIT:
        best = None
        for mask in range(1 << (n - 1)):  # vs[n-1] pinned to side B
            size_a = bin(mask).count("1")
            if size_a < lo or n - size_a < lo:
                continue
            cut = _cut_weight(edges, mask)
            key = (cut, size_a, mask)
            if best is None or key < best:
                best = key
        mask = best[2]
        side_a = [v for i, v in enumerate(vs) if mask >> i & 1]
        side_b = [v for i, v in enumerate(vs) if not mask >> i & 1]
        return side_a, side_b
    # greedy: random balanced seed, then first-improvement single moves
    idx = list(range(n))
    rng.shuffle(idx)
    half = n // 2
    in_a = [False] * n
    for i in idx[:half]:
        in_a[i] = True
    size_a = half

    def cut_of():
        return sum(w for i, j, w in edges if in_a[i] != in_a[j])

    cur = cut_of()
    improved = True
    rounds = 0
    while improved and rounds < 50:
        improved = False
        rounds += 1
        for i in range(n):
            new_size = size_a + (-1 if in_a[i] else 1)
            if new_size < lo or n - new_size < lo:
                continue
            delta = 0.0
            for a, b, w in edges:
                if a != i and b != i:
                    continue
                j = b if a == i else a
                delta += -w if in_a[i] != in_a[j] else w
            if delta < -1e-12:
                in_a[i] = not in_a[i]
                size_a = new_size
                cur += delta
                improved = True
    side_a = [v for i, v in enumerate(vs) if in_a[i]]
    side_b = [v for i, v in enumerate(vs) if not in_a[i]]
    if not side_a:
        side_a, side_b = side_b[:1], side_b[1:]
    return side_a, side_b


def _bisect_order(g: TensorNetwork, vs, rng):
    """Order ``vs`` along the Fiedler vector of the induced weighted graph.

    Spectral sweeps keep geometrically close vertices close in the order,
    which recursive bisection with greedy refinement does not reliably do;
    connected components are ordered separately, each oriented so its first
    input vertex falls in its left half.
    """
    n = len(vs)
    if n <= 1:
        return list(vs)
    edges = _induced_edges(g, vs)
    adj = {i: [] for i in range(n)}
    for i, j, _w in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp = [s]
        seen[s] = True
        k = 0
        while k < len(comp):
            for j in adj[comp[k]]:
                if not seen[j]:
                    seen[j] = True
                    comp.append(j)
            k += 1
        comps.append(sorted(comp))
    out = []
    for comp in comps:
        if len(comp) <= 2:
            out.extend(comp)
            continue
        pos = {i: k for k, i in enumerate(comp)}
        m = len(comp)
        lap = np.zeros((m, m))
        for i, j, w in edges:
            if i in pos and j in pos:
                a, b = pos[i], pos[j]
                lap[a, a] += w
                lap[a, b] -= w
                lap[b, a] -= w
                lap[b, b] += w
        _vals, vecs = np.linalg.eigh(lap)
        fiedler = vecs[:, 1]
        order = sorted(range(m), key=lambda k: (fiedler[k], comp[k]))
        if order.index(0) > (m - 1) / 2:
            order.reverse()
        out.extend(comp[k] for k in order)
    return [vs[i] for i in out]


def linear_ordering(items, g: TensorNetwork, seed: int = 0):
    """Order vertices (or edge-label subsets) by recursive graph bisection.

    Edge subsets are placed at the minimum rank of their attachment vertices
    under the vertex ordering; ties keep input order.
    """
    items = list(items)
    if not items:
        return []
    rng = np.random.default_rng(seed)
    if isinstance(items[0], (set, frozenset)):
        vorder = _bisect_order(g, g.vertices, rng)
        rank = {v: i for i, v in enumerate(vorder)}
        def key(subset):
            owners = set()
            for l in subset:
                owners.update(g.owners(l))
            if not owners:
                return len(rank)
            return min(rank[v] for v in owners)
        return sorted(items, key=key)
    if not all(v in g for v in items):
        raise ValueError("ordering items must be vertices of the network")
    return _bisect_order(g, items, rng)


# -- tree embedding -----------------------------------------------------------


def tree_embedding(g: TensorNetwork, t: EmbeddingTree, seed: int = 0):
    """Map every network vertex to a vertex of the embedding tree.

    Leaves of ``t`` must biject with the dangling labels of ``g``.  Returns
    ``(g2, phi)``: the network possibly augmented with identity matrices so
    that every tree vertex has a nonempty preimage, and the assignment map.
    """
    t.validate()
    dang = set(g.dangling_labels())
    leaf_labels = {t.leaf_label[n] for n in t.leaves()}
    if leaf_labels != dang:
        raise ValueError(
            f"tree leaves {sorted(leaf_labels)} do not match "
            f"dangling labels {sorted(dang)}"
        )
    g2 = g.copy()
    phi: dict = {}
    _embed(g2, t, t.root, list(g2.vertices), phi, np.random.default_rng(seed))
    _refine_embedding(g2, t, phi)
    _insert_identities(g2, t, phi)
    return g2, phi


def _present_labels(g2: TensorNetwork, labels, vs):
    vset = set(vs)
    out = []
    for l in labels:
        if any(o in vset for o in g2.owners(l)):
            out.append(l)
    return out


def _split_anchored(g, vs, e_a, e_b, frac, rng, up_a=(), up_b=()):
    """Bipartition ``vs`` minimizing cut weight with anchored sides.

    Owners of ``e_a`` are pinned to side A, owners of ``e_b`` to side B
    (vertices owning both stay free), and |A| is kept near ``frac * |vs|``.
    ``up_a``/``up_b`` list labels whose owners are softly attracted to a
    side: their weight enters the potentials and the cut, but the owners
    are not pinned, so a whole chain tied elsewhere peels off gradually
    instead of being dumped on one side at once.
    Max-flow min cuts are degenerate on uniform chains (they peel single
    terminal vertices and strand every interior vertex on one side), so the
    split is chosen by a sweep over harmonic potentials: anchors are held
    at 0 and 1, interior vertices take the weighted average of their
    neighbors, and the cut with smallest weight inside the balance window
    wins.  Potentials grade monotonically along chains and ladders, so
    interior structure is split where it belongs.
    """
    n = len(vs)
    vset = set(vs)
    a_anch = {v for l in e_a for v in g.owners(l) if v in vset}
    b_anch = {v for l in e_b for v in g.owners(l) if v in vset}
    both = a_anch & b_anch
    a_anch -= both
    b_anch -= both
    pos = {v: i for i, v in enumerate(vs)}
    spring_a = np.zeros(n)
    spring_b = np.zeros(n)
    for labels, spring in ((up_a, spring_a), (up_b, spring_b)):
        for l in labels:
            for v in g.owners(l):
                if v in vset:
                    spring[pos[v]] += math.log(max(g.tensor(v).size_of(l), 2))
    if not a_anch and not spring_a.any():
        return [], list(vs)
    if not b_anch and not spring_b.any():
        return list(vs), []
    target = frac * n
    slack = max(1.0, n / 6.0)
    lo = max(len(a_anch), int(math.floor(target - slack)))
    hi = min(n - len(b_anch), int(math.ceil(target + slack)))
    if lo > hi:
        lo = hi = min(max(len(a_anch), int(round(target))), n - len(b_anch))
    edges = _induced_edges(g, vs)

    # harmonic potentials: 0 at A anchors, 1 at B anchors, springs to both
    x = np.full(n, 0.5)
    for v in a_anch:
        x[pos[v]] = 0.0
    for v in b_anch:
        x[pos[v]] = 1.0
    free = [i for i, v in enumerate(vs) if v not in a_anch and v not in b_anch]
    if free:
        lap = np.zeros((n, n))
        for i, j, w in edges:
            lap[i, i] += w
            lap[i, j] -= w
            lap[j, i] -= w
            lap[j, j] += w
        for i in range(n):
            lap[i, i] += spring_a[i] + spring_b[i]
        fixed = [i for i in range(n) if i not in set(free)]
        lff = lap[np.ix_(free, free)]
        rhs = -lap[np.ix_(free, fixed)] @ x[fixed] + spring_b[free]
        # isolated free vertices make lff singular; lstsq keeps them put
        sol, *_ = np.linalg.lstsq(lff, rhs, rcond=None)
        x[free] = sol
        for i in free:
            if not np.isfinite(x[i]):
                x[i] = 0.5

    # sweep cut: order by potential (anchors pinned to the extremes)
    order = sorted(
        range(n),
        key=lambda i: (
            -1.0 if vs[i] in a_anch else 2.0 if vs[i] in b_anch else x[i],
            i,
        ),
    )
    in_a = [False] * n

    def cut_now():
        cut = sum(w for i2, j2, w in edges if in_a[i2] != in_a[j2])
        cut += sum(spring_b[i2] for i2 in range(n) if in_a[i2])
        cut += sum(spring_a[i2] for i2 in range(n) if not in_a[i2])
        return cut

    best = None
    if lo == 0:
        best = (cut_now(), 0, list(in_a))
    for k, i in enumerate(order):
        in_a[i] = True
        size_a = k + 1
        if not lo <= size_a <= hi:
            continue
        key = (cut_now(), size_a)
        if best is None or key < best[0:2]:
            best = (key[0], size_a, list(in_a))
    if best is None:
        size_a = min(max(lo, len(a_anch)), n - len(b_anch))
        chosen = set(order[:size_a])
        in_a = [i in chosen for i in range(n)]
    else:
        in_a = best[2]
    side_a = [v for k, v in enumerate(vs) if in_a[k]]
    side_b = [v for k, v in enumerate(vs) if not in_a[k]]
    return side_a, side_b


def _embed(g2, t, node, vs, phi, rng):
    if not vs:
        return
    if t.is_leaf(node):
        for v in vs:
            phi[v] = node
        return
    left, right = t.children[node]
    e_l = _present_labels(g2, t.leaf_labels_under(left), vs)
    e_r = _present_labels(g2, t.leaf_labels_under(right), vs)
    # labels exiting this subtree: edges to already-placed vertices and
    # dangling edges whose leaf lies elsewhere.  Their owners must stay
    # shallow (peeled side or this very node), otherwise each one keeps
    # crossing every deeper tree edge and the environments blow up.
    vset = set(vs)
    sub_leaves = set(t.leaf_labels_under(node))
    up = []
    for v in vs:
        for l in g2.tensor(v).inds:
            own = g2.owners(l)
            if len(own) == 2:
                other = own[0] if own[1] == v else own[1]
                if other not in vset:
                    up.append(l)
            elif l not in sub_leaves:
                up.append(l)
    if not e_l:
        s_l, s_r = [], list(vs)
    elif not e_r:
        s_l, s_r = list(vs), []
    else:
        nl = len(t.leaf_labels_under(left))
        nr = len(t.leaf_labels_under(right))
        s_l, s_r = _split_anchored(
            g2.subnetwork(vs), list(vs), e_l, e_r,
            nl / (nl + nr), rng, up_b=up,
        )
    _embed(g2, t, left, list(s_l), phi, rng)
    if not s_r:
        return
    cut = list(g2.crossing_labels(s_l, s_r)) if s_l else []
    sub_r = g2.subnetwork(s_r)
    e_r2 = _present_labels(g2, e_r, s_r)
    rset = set(s_r)
    up_r = [l for l in up if any(o in rset for o in g2.owners(l))]
    if (cut or up_r) and e_r2:
        nr = len(t.leaf_labels_under(right))
        mid, rest = _split_anchored(
            sub_r, list(s_r), cut, e_r2, 1.0 / (2 * nr), rng, up_a=up_r
        )
    else:
        mid, rest = [], list(s_r)
    for v in mid:
        phi[v] = node
    _embed(g2, t, right, list(rest), phi, rng)


def _tree_distances(t: EmbeddingTree):
    dist = {}
    for s in t.nodes:
        d = {s: 0}
        stack = [s]
        while stack:
            x = stack.pop()
            for y in t.neighbors(x):
                if y not in d:
                    d[y] = d[x] + 1
                    stack.append(y)
        dist[s] = d
    return dist


def _refine_embedding(g2: TensorNetwork, t: EmbeddingTree, phi, rounds=None):
    """Reduce routing congestion by coordinate descent on vertex placement.

    The recursive bisection can strand interior vertices (ones with no
    dangling edge) in a single bag far from their neighbors, routing many
    edges through the same tree edges.  Each vertex is moved to the tree
    vertex minimizing the total weighted tree distance to its neighbors'
    positions (dangling edges pin toward their leaf); ties fall back to the
    farthest weighted distance so chains of interior vertices unroll along
    the tree instead of sticking together.
    """
    dist = _tree_distances(t)
    leaf_of = {t.leaf_label[n]: n for n in t.leaves()}
    if rounds is None:
        rounds = 2 * len(t.nodes) + 4
    for _ in range(rounds):
        changed = False
        for v in g2.vertices:
            targets = []
            for l in g2.tensor(v).inds:
                owners = g2.owners(l)
                w = math.log(max(g2.size(l), 2))
                if len(owners) == 2:
                    u = owners[0] if owners[1] == v else owners[1]
                    targets.append((phi[u], w))
                else:
                    targets.append((leaf_of[l], w))
            if not targets:
                continue

            def cost(n):
                ds = [w * dist[n][p] for p, w in targets]
                return (sum(ds), max(ds))

            cur = cost(phi[v])
            best = min(t.nodes, key=cost)
            bc = cost(best)
            if bc[0] < cur[0] - 1e-12 or (
                bc[0] < cur[0] + 1e-12 and bc[1] < cur[1] - 1e-12
            ):
                phi[v] = best
                changed = True
        if not changed:
            break


def _insert_identities(g2: TensorNetwork, t: EmbeddingTree, phi):
    leaf_of = {t.leaf_label[n]: n for n in t.leaves()}
    counter = 0
    for node in t.postorder():
        if node in phi.values():
            continue
        found = None
        for l in g2.labels():
            owners = g2.owners(l)
            if len(owners) == 2:
                path = t.path(phi[owners[0]], phi[owners[1]])
                if node in path[1:-1]:
                    found = (l, owners)
                    break
            else:
                path = t.path(phi[owners[0]], leaf_of[l])
                if node in path[1:]:
                    found = (l, owners)
                    break
        if found is None:
            raise RuntimeError(
                f"no network edge is routed through empty tree vertex {node}"
            )
        l, owners = found
        size = g2.size(l)
        l2 = g2.fresh_label(f"{l}__id")
        vid = f"__id{counter}"
        while vid in g2:
            counter += 1
            vid = f"__id{counter}"
        counter += 1
        if len(owners) == 2:
            # split u --l-- v into u --l-- I --l2-- v
            v = owners[1]
            g2.replace(v, g2.tensor(v).relabeled({l: l2}))
            g2.add(vid, Tensor(np.eye(size), (l, l2)))
        else:
            # re-hang the dangling label on the identity
            u = owners[0]
            g2.replace(u, g2.tensor(u).relabeled({l: l2}))
            g2.add(vid, Tensor(np.eye(size), (l, l2)))
        phi[vid] = node
