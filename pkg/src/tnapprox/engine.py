"""Approximate contraction driver.

``partitioned_contract`` contracts a partitioned tensor network along a
contraction plan, replacing every intermediate by a binary-tree tensor
network with bounded bond rank.  Also hosts the three MPO-MPS truncation
routines used to pin the algorithm's cost scaling, and the adjacent-site
swap primitive.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    FlopCounter,
    Tensor,
    contract,
    contract_network,
    matricize,
    truncated_eig,
    truncated_factor,
    unmatricize,
)
from .network import TensorNetwork, linear_ordering
from .ordering import (
    build_constraint_tree,
    build_embedding_tree,
    kendall_tau,
    ordering_under_constraint,
)
from .treeapprox import TreeTensorNetwork, _gram_matrix, density_matrix_alg, truncate_tree_canonical


# -- MPS/MPO conventions ------------------------------------------------------
#
# An MPS is a list of arrays shaped (left bond, physical, right bond); an MPO
# is a list of arrays shaped (left bond, input, output, right bond).  End
# bonds have size 1.


def _check_mpo_mps(mpo, mps):
    if len(mpo) != len(mps) or not mps:
        raise ValueError("MPO and MPS must have equal, nonzero length")
    for i, (o, s) in enumerate(zip(mpo, mps)):
        if s.ndim != 3 or o.ndim != 4:
            raise ValueError("sites must be rank-3 (MPS) and rank-4 (MPO)")
        if o.shape[1] != s.shape[1]:
            raise ValueError(f"physical size mismatch at site {i}")
        if i + 1 < len(mps) and s.shape[2] != mps[i + 1].shape[0]:
            raise ValueError(f"MPS bond mismatch at site {i}")
        if i + 1 < len(mpo) and o.shape[3] != mpo[i + 1].shape[0]:
            raise ValueError(f"MPO bond mismatch at site {i}")


def mps_dense(mps, counter: FlopCounter | None = None) -> Tensor:
    """Contract a small MPS to one tensor with modes p0..p{n-1}."""
    ts = [
        Tensor(a, (f"s{i}", f"p{i}", f"s{i+1}"))
        for i, a in enumerate(mps)
    ]
    out = contract_network(ts, counter)
    squeeze = [l for l in out.inds if l.startswith("s")]
    phys = sorted(
        (l for l in out.inds if not l.startswith("s")), key=lambda l: int(l[1:])
    )
    data = out.transposed(squeeze + phys).data.reshape(
        [out.size_of(l) for l in phys]
    )
    return Tensor(data, tuple(phys))


def mpo_mps_dense(mpo, mps, counter: FlopCounter | None = None) -> Tensor:
    """Exact dense MPO @ MPS (reference for small systems)."""
    _check_mpo_mps(mpo, mps)
    ts = []
    for i, a in enumerate(mps):
        ts.append(Tensor(a, (f"s{i}", f"p{i}", f"s{i+1}")))
    for i, a in enumerate(mpo):
        ts.append(Tensor(a, (f"o{i}", f"p{i}", f"q{i}", f"o{i+1}")))
    out = contract_network(ts, counter)
    keep = [l for l in out.inds if l.startswith("q")]
    keep.sort(key=lambda l: int(l[1:]))
    drop = [l for l in out.inds if not l.startswith("q")]
    data = out.transposed(drop + keep).data.reshape(
        [out.size_of(l) for l in keep]
    )
    return Tensor(data, tuple(keep))


def mpo_mps_zipup(mpo, mps, chi=None, counter: FlopCounter | None = None):
    """MPO-MPS product truncated left to right against the left prefix only.

    End bonds larger than 1 are allowed and carried through as open modes;
    the output MPS merges the (mps, mpo) end bonds row-major.
    """
    _check_mpo_mps(mpo, mps)
    n = len(mps)
    dl = mps[0].shape[0] * mpo[0].shape[0]
    carry = Tensor(
        np.eye(dl).reshape(dl, mps[0].shape[0], mpo[0].shape[0]),
        ("m", "sb", "ob"),
    )
    out = []
    for i in range(n):
        s = Tensor(mps[i], ("sb", "p", "sb2"))
        o = Tensor(mpo[i], ("ob", "p", "q", "ob2"))
        t = contract(contract(carry, s, counter), o, counter)
        mdim = t.size_of("m")
        qdim = t.size_of("q")
        if i == n - 1:
            arr = t.transposed(("m", "q", "sb2", "ob2")).data
            out.append(arr.reshape(mdim, qdim, -1))
            break
        mmat = matricize(t, ["m", "q"])
        u, sv = truncated_factor(mmat, chi, counter)
        k = u.shape[1]
        out.append(u.reshape(mdim, qdim, k))
        cols = [l for l in t.inds if l not in ("m", "q")]
        carry = unmatricize(
            sv, ["m"], [k], cols, [t.size_of(l) for l in cols]
        ).relabeled({"sb2": "sb", "ob2": "ob"})
    return out


def mpo_mps_fullenv(mpo, mps, chi=None, counter: FlopCounter | None = None):
    """Exact MPO-MPS product followed by canonical-form tree truncation.

    End bonds larger than 1 are allowed; they stay open (merged row-major)
    and are never truncated.
    """
    _check_mpo_mps(mpo, mps)
    n = len(mps)
    net = TensorNetwork()
    for i in range(n):
        s = Tensor(mps[i], (f"s{i}", f"p{i}", f"s{i+1}"))
        o = Tensor(mpo[i], (f"o{i}", f"p{i}", f"q{i}", f"o{i+1}"))
        t = contract(s, o, counter)
        order = [f"s{i}", f"o{i}", f"q{i}", f"s{i+1}", f"o{i+1}"]
        arr = t.transposed(order).data
        dl = arr.shape[0] * arr.shape[1]
        dr = arr.shape[3] * arr.shape[4]
        arr = arr.reshape(dl, arr.shape[2], dr)
        net.add(i, Tensor(arr, (f"b{i}", f"q{i}", f"b{i+1}")))
    ttn = TreeTensorNetwork(net, root=n - 1)
    ttn = truncate_tree_canonical(ttn, chi, counter)
    out = []
    for i in range(n):
        t = ttn.net.tensor(i)
        arr = t.transposed((f"b{i}", f"q{i}", f"b{i+1}")).data
        if i == n - 1:
            arr = arr * math.exp(ttn.log_norm)
        out.append(arr)
    return out


def mpo_mps_dm(mpo, mps, chi=None, counter: FlopCounter | None = None):
    """MPO-MPS product truncated against its full environment via cached
    density matrices, without forming the exact product or a canonical
    gauge."""
    _check_mpo_mps(mpo, mps)
    n = len(mps)

    def ket(i):
        return (
            Tensor(mps[i], (f"s{i}", f"p{i}", f"s{i+1}")),
            Tensor(mpo[i], (f"o{i}", f"p{i}", f"q{i}", f"o{i+1}")),
        )

    # left environments with the output modes traced between ket and bra;
    # an end bond larger than 1 is open, so its environment is the identity
    ds0, do0 = mps[0].shape[0], mpo[0].shape[0]
    lenv = [
        Tensor(
            np.einsum("ac,bd->abcd", np.eye(ds0), np.eye(do0)),
            ("s0", "o0", "s0'", "o0'"),
        )
    ]
    for i in range(n - 1):
        s, o = ket(i)
        sb = s.primed(keep=())
        ob = o.relabeled(
            {f"o{i}": f"o{i}'", f"p{i}": f"p{i}'", f"o{i+1}": f"o{i+1}'"}
        )  # output mode q stays shared: traced
        l = contract(lenv[-1], s, counter)
        l = contract(l, o, counter)
        l = contract(l, ob, counter)
        l = contract(l, sb, counter)
        lenv.append(l)

    out = [None] * n
    drs, dro = mps[-1].shape[2], mpo[-1].shape[3]
    w = Tensor(
        np.eye(drs * dro).reshape(drs, dro, drs * dro),
        (f"s{n}", f"o{n}", f"m{n}"),
    )
    for j in range(n - 1, 0, -1):
        s, o = ket(j)
        kw = contract(contract(s, w, counter), o, counter)
        rho = contract(lenv[j], kw, counter)
        rho = contract(rho, kw.primed(), counter)
        u_mat, _ = truncated_eig(
            _gram_matrix(rho, [f"q{j}", f"m{j+1}"]), chi, counter
        )
        k = u_mat.shape[1]
        u_t = unmatricize(
            u_mat,
            [f"q{j}", f"m{j+1}"],
            [kw.size_of(f"q{j}"), kw.size_of(f"m{j+1}")],
            [f"m{j}"],
            [k],
        )
        out[j] = u_t.transposed((f"m{j}", f"q{j}", f"m{j+1}")).data
        w = contract(kw, u_t, counter)
    s, o = ket(0)
    m1 = contract(contract(s, w, counter), o, counter)
    q_dim = m1.size_of("q0")
    arr = m1.transposed(("s0", "o0", "q0", "m1")).data
    out[0] = arr.reshape(ds0 * do0, q_dim, -1)
    return out


def swap_adjacent(mps, i, gamma=None, counter: FlopCounter | None = None):
    """Swap the physical modes of sites i and i+1 of an MPS.

    The two sites are contracted and re-split with the physical modes
    exchanged; the new internal bond is rank-limited by ``gamma`` (and by
    the exact rank of the pair).
    """
    if not 0 <= i < len(mps) - 1:
        raise ValueError("swap site out of range")
    a = Tensor(mps[i], ("l", "x", "c"))
    b = Tensor(mps[i + 1], ("c", "y", "r"))
    t = contract(a, b, counter)
    m = matricize(t.transposed(("l", "y", "x", "r")), ["l", "y"])
    u, sv = truncated_factor(m, gamma, counter)
    k = u.shape[1]
    dl, dy = t.size_of("l"), t.size_of("y")
    dx, dr = t.size_of("x"), t.size_of("r")
    out = list(mps)
    out[i] = u.reshape(dl, dy, k)
    out[i + 1] = sv.reshape(k, dx, dr)
    return out


# -- multi-pass approximation of one intermediate -----------------------------


def interval_orderings(tau, sigma, r):
    """Waypoints of a bubble-sort walk from tau to sigma, one every r swaps.

    Returns the list of orderings to use as successive embedding-tree
    targets; the last entry is always sigma, and tau == sigma yields a
    single pass.
    """
    if r < 1:
        raise ValueError("swap batch must be at least 1")
    tau, sigma = list(tau), list(sigma)
    rank = {x: i for i, x in enumerate(sigma)}
    cur = list(tau)
    states = []
    swaps = 0
    changed = True
    while changed:
        changed = False
        for k in range(len(cur) - 1):
            if rank[cur[k]] > rank[cur[k + 1]]:
                cur[k], cur[k + 1] = cur[k + 1], cur[k]
                swaps += 1
                changed = True
                if swaps % r == 0:
                    states.append(list(cur))
    if not states or states[-1] != sigma:
        states.append(list(sigma))
    return states


def approx_tensor_network(
    g: TensorNetwork,
    sigma_sets,
    sigma_edges,
    chi=None,
    r: int = 32,
    ansatz: str = "mps",
    counter: FlopCounter | None = None,
    seed: int = 0,
) -> TreeTensorNetwork:
    """Approximate a network as a tree whose leaves follow ``sigma_sets``.

    When the reference ordering of the edge subsets is far (in Kendall-tau
    distance) from the target ordering, the move is split into several
    passes of at most ``r`` adjacent transpositions each, re-approximating
    after every pass.
    """
    subsets = [frozenset(s) for s in sigma_sets]
    tau = linear_ordering(subsets, g, seed=seed)
    d = kendall_tau(tau, subsets)
    states = interval_orderings(tau, subsets, r)
    assert len(states) == max(1, math.ceil(d / r))
    log_norm = 0.0
    cur = g
    ttn = None
    for st in states:
        tree = build_embedding_tree(st, sigma_edges, ansatz)
        ttn = density_matrix_alg(cur, tree, chi, counter, seed=seed)
        log_norm += ttn.log_norm
        cur = ttn.net
    ttn.log_norm = log_norm
    return ttn


# -- top-level driver ---------------------------------------------------------


@dataclass
class ContractJob:
    """One approximate contraction of a partitioned network."""

    network: TensorNetwork
    partition: dict  # vertex id -> partition key
    plan: object  # nested pairs of partition keys
    chi: int | None = None
    ansatz: str = "mps"
    swap_batch: int = 32
    seed: int = 0

    def validate(self):
        keys = set(self.partition.values())
        verts = set(self.network.vertices)
        if set(self.partition) != verts:
            raise ValueError("partition must cover exactly the vertices")
        leaves = _plan_leaves(self.plan)
        if len(leaves) != len(set(leaves)):
            raise ValueError("plan uses a partition more than once")
        if set(leaves) != keys:
            raise ValueError("plan leaves must match partition keys")
        if self.swap_batch < 1:
            raise ValueError("swap_batch must be at least 1")
        if self.chi is not None and self.chi < 1:
            raise ValueError("chi must be at least 1")
        if self.ansatz not in ("mps", "comb"):
            raise ValueError(f"unknown ansatz {self.ansatz!r}")


@dataclass
class ContractResult:
    sign: float
    ln_abs: float
    tree: TreeTensorNetwork | None = None
    flops: float = 0.0
    stats: dict = field(default_factory=dict)


def _plan_leaves(plan):
    if isinstance(plan, tuple) and len(plan) == 2:
        return _plan_leaves(plan[0]) + _plan_leaves(plan[1])
    return [plan]


def _plan_nodes(plan, out=None):
    """Internal plan nodes in contraction (post) order."""
    if out is None:
        out = []
    if isinstance(plan, tuple) and len(plan) == 2:
        _plan_nodes(plan[0], out)
        _plan_nodes(plan[1], out)
        out.append(plan)
    return out


def _first_index(seq, members):
    """Index of the first element of ``seq`` in ``members`` (len if none)."""
    for i, x in enumerate(seq):
        if x in members:
            return i
    return len(seq)


def _ancestor_siblings(plan, node):
    """Vertex-set sequence absorbed after ``node``, in contraction order."""
    spine = []

    def walk(cur, trail):
        if cur == node:
            spine.extend(trail)
            return True
        if isinstance(cur, tuple) and len(cur) == 2:
            for child, other in ((cur[0], cur[1]), (cur[1], cur[0])):
                if walk(child, [other] + trail):
                    return True
        return False

    walk(plan, [])
    return spine[::-1]  # nearest ancestor's sibling first


def partitioned_contract(job: ContractJob) -> ContractResult:
    """Contract a partitioned network approximately along its plan.

    Every intermediate is approximated by a binary-tree network with bond
    rank at most ``job.chi``; tree shapes follow the chosen ansatz and the
    constrained orderings implied by future contractions.  Returns the sign
    and log magnitude for a closed network, or the final tree otherwise.
    """
    job.validate()
    g = job.network
    g.validate()
    counter = FlopCounter()
    t_analysis = time.perf_counter()
    parts: dict = {}
    for vid, key in job.partition.items():
        parts.setdefault(key, []).append(vid)

    # edge subsets between partitions, plus singletons for global dangling
    subset_of_pair: dict = {}
    keys = list(parts)
    for a_i in range(len(keys)):
        for b_i in range(a_i + 1, len(keys)):
            ka, kb = keys[a_i], keys[b_i]
            cross = g.crossing_labels(parts[ka], parts[kb])
            if cross:
                subset_of_pair[(ka, kb)] = frozenset(cross)
    dangling_subsets = [frozenset([l]) for l in g.dangling_labels()]
    all_subsets = list(subset_of_pair.values()) + dangling_subsets

    # per-subset edge orderings, fixed once
    vorder = linear_ordering(g.vertices, g, seed=job.seed)
    vrank = {v: i for i, v in enumerate(vorder)}
    sigma_edges = {}
    for sub in all_subsets:
        def ekey(l):
            return tuple(sorted(vrank[v] for v in g.owners(l)))
        sigma_edges[sub] = sorted(sub, key=ekey)

    def subsets_of(keys_under):
        under = set(keys_under)
        out = []
        for (ka, kb), sub in subset_of_pair.items():
            if (ka in under) != (kb in under):
                out.append(sub)
        for sub in dangling_subsets:
            owner = g.owners(next(iter(sub)))[0]
            if job.partition[owner] in under:
                out.append(sub)
        return out

    # constrained orderings per contraction, fixed up front.  Orders are
    # resolved bottom-up: a merge node's reference keeps the left child's
    # resolved order and splices the right child's surviving subsets into
    # the slot where the contracted-away subsets sat, junction end first.
    # Independent references would fix each order only up to reflection,
    # and a flipped block forces the previous tree to fold back on itself
    # when it is embedded into the next one.
    sigma_for: dict = {}

    def ordered_subs(node, reference):
        keys_under = _plan_leaves(node)
        subs = subsets_of(keys_under)
        if len(subs) < 2:
            return subs
        sibs = _ancestor_siblings(job.plan, node)
        path = [
            set(v for k in _plan_leaves(sib) for v in parts[k]) for sib in sibs
        ]
        ct = build_constraint_tree(subs, path, g)
        return ordering_under_constraint(
            subs, ct, g, reference=reference, seed=job.seed
        )

    def resolve(node):
        if not (isinstance(node, tuple) and len(node) == 2):
            return ordered_subs(node, None)
        oa = resolve(node[0])
        ob = resolve(node[1])
        internal = set(oa) & set(ob)
        surv_a = [s for s in oa if s not in internal]
        surv_b = [s for s in ob if s not in internal]
        cut_at = _first_index(oa, internal)
        hole = len([s for s in oa[:cut_at] if s not in internal])
        jpos = [i for i, s in enumerate(ob) if s in internal]
        if jpos and surv_b and sum(jpos) / len(jpos) > (len(ob) - 1) / 2:
            surv_b = surv_b[::-1]
        reference = surv_a[:hole] + surv_b + surv_a[hole:]
        order = ordered_subs(node, reference if reference else None)
        sigma_for[node] = order
        return order

    resolve(job.plan)
    analysis_seconds = time.perf_counter() - t_analysis

    # contraction loop
    tag = [0]

    def rekey(ttn: TreeTensorNetwork) -> TensorNetwork:
        tag[0] += 1
        bonds = ttn.net.contracted_labels()
        ren = {l: f"__b{tag[0]}.{i}" for i, l in enumerate(bonds)}
        out = TensorNetwork()
        for v in ttn.net.vertices:
            out.add((tag[0], v), ttn.net.tensor(v).relabeled(ren))
        return out

    def eval_node(node):
        """Returns (TensorNetwork, log_norm) for the intermediate."""
        if not (isinstance(node, tuple) and len(node) == 2):
            return g.subnetwork(parts[node]), 0.0
        (na, la) = eval_node(node[0])
        (nb, lb) = eval_node(node[1])
        combined = TensorNetwork()
        for v in na.vertices:
            combined.add(("a", v), na.tensor(v))
        for v in nb.vertices:
            combined.add(("b", v), nb.tensor(v))
        log_norm = la + lb
        subs = sigma_for[node]
        if not combined.dangling_labels():
            val = contract_network(
                list(combined.tensors().values()), counter
            ).item()
            net = TensorNetwork()
            net.add("scalar", Tensor(np.array(val), ()))
            return net, log_norm
        if len(subs) < 1:
            raise RuntimeError("open intermediate without edge subsets")
        ttn = approx_tensor_network(
            combined,
            subs,
            sigma_edges,
            chi=job.chi,
            r=job.swap_batch,
            ansatz=job.ansatz,
            counter=counter,
            seed=job.seed,
        )
        return rekey(ttn), log_norm + ttn.log_norm

    net, log_norm = eval_node(job.plan)
    stats = {"analysis_seconds": analysis_seconds}
    if not net.dangling_labels():
        val = contract_network(list(net.tensors().values()), counter).item()
        if val == 0.0:
            return ContractResult(
                0.0, -math.inf, flops=counter.total, stats=stats
            )
        return ContractResult(
            math.copysign(1.0, val),
            math.log(abs(val)) + log_norm,
            flops=counter.total,
            stats=stats,
        )
    ttn = TreeTensorNetwork(net, root=net.vertices[-1], log_norm=log_norm)
    return ContractResult(
        1.0, math.nan, tree=ttn, flops=counter.total, stats=stats
    )
