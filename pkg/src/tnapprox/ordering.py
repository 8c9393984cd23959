"""Orderings of uncontracted-edge groups under adjacency constraints.

A constraint tree records which groups of edge subsets must stay contiguous
in a linear ordering: leaves are edge subsets, ``unordered`` nodes allow any
arrangement of their children's blocks, ``ordered`` nodes fix the block
sequence up to reversal.  The main entry points compute the constraint tree
implied by a sequence of future contractions, and the admissible ordering
closest (in Kendall-tau distance) to an unconstrained reference ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product

from .network import TensorNetwork, linear_ordering
from .trees import EmbeddingTree, comb_tree, mps_tree

#: exact permutation search at unordered nodes up to this many children
_PERMUTATION_LIMIT = 8

LEAF = "leaf"
ORDERED = "ordered"
UNORDERED = "unordered"


def kendall_tau(a, b) -> int:
    """Number of discordant pairs between two orderings of the same items."""
    a, b = list(a), list(b)
    if len(a) != len(set(a)) or set(a) != set(b) or len(a) != len(b):
        raise ValueError("orderings must be permutations of the same items")
    pos = {x: i for i, x in enumerate(b)}
    ranks = [pos[x] for x in a]
    return sum(
        1
        for i in range(len(ranks))
        for j in range(i + 1, len(ranks))
        if ranks[i] > ranks[j]
    )


@dataclass
class CTNode:
    """A constraint-tree node; ``item`` is set on leaves only."""

    kind: str
    children: list = field(default_factory=list)
    item: object = None

    def leafset(self) -> frozenset:
        if self.kind == LEAF:
            return frozenset([self.item])
        out = frozenset()
        for c in self.children:
            out |= c.leafset()
        return out

    def leaf_items(self):
        if self.kind == LEAF:
            return [self.item]
        out = []
        for c in self.children:
            out.extend(c.leaf_items())
        return out

    def find(self, target: frozenset):
        """A descendant whose leafset equals ``target``, if any."""
        if self.leafset() == target:
            return self
        for c in self.children:
            hit = c.find(target)
            if hit is not None:
                return hit
        return None


def _wrap(nodes):
    return nodes[0] if len(nodes) == 1 else CTNode(UNORDERED, list(nodes))


def _reorder_for_prefix(node: CTNode, rem: frozenset):
    """Restructure ``node`` so the leaves in ``rem`` sit at one end.

    Children fully inside ``rem`` are pulled to the front, at most one
    partially covered child is recursively reordered behind them, and the
    node is marked ordered.  Returns None when more than one child is
    partially covered (the pattern the prefix rule cannot express).
    """
    if node.kind == LEAF:
        return node if node.leafset() == rem else None
    full, part, rest = [], [], []
    for c in node.children:
        ls = c.leafset()
        if ls <= rem:
            full.append(c)
        elif ls & rem:
            part.append(c)
        else:
            rest.append(c)
    if len(part) > 1:
        return None
    if node.kind == ORDERED:
        # rem must already occupy a prefix or suffix of the child sequence
        for seq in (node.children, node.children[::-1]):
            ok = True
            state = "full"
            out = []
            for c in seq:
                ls = c.leafset()
                if state == "full" and ls <= rem:
                    out.append(c)
                    continue
                if state == "full" and ls & rem:
                    sub = _reorder_for_prefix(c, ls & rem)
                    if sub is None:
                        ok = False
                        break
                    out.append(sub)
                    state = "rest"
                    continue
                if ls & rem:
                    ok = False
                    break
                out.append(c)
                state = "rest"
            if ok:
                return CTNode(ORDERED, out)
        return None
    new_children = []
    if full:
        new_children.append(_wrap(full))
    if part:
        sub = _reorder_for_prefix(part[0], part[0].leafset() & rem)
        if sub is None:
            return None
        new_children.append(sub)
    if rest:
        new_children.append(_wrap(rest))
    if len(new_children) == 1:
        return new_children[0]
    return CTNode(ORDERED, new_children)


def build_constraint_tree(subsets, path, g: TensorNetwork) -> CTNode:
    """Constraint tree over ``subsets`` implied by future contractions.

    ``subsets`` are the uncontracted-edge groups of the current intermediate;
    ``path`` lists, in contraction order, the vertex sets that will be
    absorbed next.  Groups touched together by an upcoming contraction (or
    bridged by earlier ones between mutually adjacent absorbed sets) are
    constrained to stay contiguous.
    """
    subsets = [frozenset(s) for s in subsets]
    if len(set(subsets)) != len(subsets):
        raise ValueError("duplicate edge subsets")
    components = [CTNode(LEAF, item=s) for s in subsets]

    def owners_of(subset):
        out = set()
        for l in subset:
            out.update(g.owners(l))
        return out

    path = [set(u) for u in path]
    touched: list[frozenset] = []
    for i, u_i in enumerate(path):
        incident = frozenset(
            s for s in subsets if owners_of(s) & u_i
        )
        merged = set(incident)
        for j in range(i):
            if g.crossing_labels(path[j], u_i):
                merged |= touched[j]
        target = frozenset(merged)
        touched.append(target)
        if len(target) < 2:
            continue
        components = _apply_target(components, target)
    if len(components) > 1:
        components = [CTNode(UNORDERED, components)]
    return components[0]


def _apply_target(components, target: frozenset):
    comps = [c for c in components if c.leafset() & target]
    rest = [c for c in components if not (c.leafset() & target)]
    covered = frozenset()
    for c in comps:
        covered |= c.leafset()
    if len(comps) == 1 and comps[0].find(target) is not None:
        return components  # rule 1: already grouped
    if target == covered:
        return rest + [_wrap(comps)]  # rule 2: union of whole components
    # rule 3: strict subset spanning the involved components
    full = [c for c in comps if c.leafset() <= target]
    part = [c for c in comps if not c.leafset() <= target]
    if len(part) == 1:
        sub = _reorder_for_prefix(part[0], part[0].leafset() & target)
        if sub is not None:
            if full:
                return rest + [CTNode(ORDERED, [_wrap(full), sub])]
            return rest + [sub]
    return rest + [_wrap(comps)]


def enumerate_constrained_orderings(node: CTNode):
    """All orderings admitted by a constraint tree (reference enumerator)."""
    if node.kind == LEAF:
        return {(node.item,)}
    child_sets = [enumerate_constrained_orderings(c) for c in node.children]
    out = set()
    if node.kind == ORDERED:
        for combo in product(*child_sets):
            flat = tuple(x for b in combo for x in b)
            out.add(flat)
            out.add(tuple(x for b in combo[::-1] for x in b))
    else:
        for perm in permutations(range(len(child_sets))):
            for combo in product(*[child_sets[i] for i in perm]):
                out.add(tuple(x for b in combo for x in b))
    return out


def _greedy_arrangement(blocks, tau_v):
    """Insert blocks one at a time at the position of least KT distance."""
    placed: list = []
    for block in blocks:
        best = None
        for gap in range(len(placed) + 1):
            cand = [x for b in placed[:gap] for x in b]
            cand += list(block)
            cand += [x for b in placed[gap:] for x in b]
            ref = [x for x in tau_v if x in set(cand)]
            d = kendall_tau(cand, ref)
            if best is None or d < best[0]:
                best = (d, gap)
        placed.insert(best[1], list(block))
    return [x for b in placed for x in b]


def ordering_under_constraint(
    subsets,
    ct: CTNode,
    g: TensorNetwork,
    reference=None,
    seed: int = 0,
):
    """Admissible ordering of ``subsets`` closest to the reference ordering.

    The reference defaults to :func:`linear_ordering` on the network; the
    result minimizes Kendall-tau distance to it among orderings admitted by
    the constraint tree.
    """
    subsets = [frozenset(s) for s in subsets]
    if set(ct.leaf_items()) != set(subsets):
        raise ValueError("constraint-tree leaves must match the subsets")
    tau = (
        list(reference)
        if reference is not None
        else linear_ordering(subsets, g, seed=seed)
    )
    if set(tau) != set(subsets):
        raise ValueError("reference must order the same subsets")

    def best(node):
        if node.kind == LEAF:
            return [node.item]
        blocks = [best(c) for c in node.children]
        members = set(node.leafset())
        tau_v = [x for x in tau if x in members]
        if node.kind == ORDERED:
            fwd = [x for b in blocks for x in b]
            bwd = [x for b in blocks[::-1] for x in b]
            cands = [fwd, bwd]
        elif len(blocks) <= _PERMUTATION_LIMIT:
            cands = [
                [x for b in perm for x in b] for perm in permutations(blocks)
            ]
        else:
            cands = [_greedy_arrangement(blocks, tau_v)]
        return min(cands, key=lambda s: kendall_tau(s, tau_v))

    return best(ct)


def build_embedding_tree(sigma_sets, sigma_edges, ansatz: str) -> EmbeddingTree:
    """Embedding tree over the uncontracted edges of an intermediate.

    ``sigma_sets`` orders the edge subsets; ``sigma_edges`` maps each subset
    to its internal edge ordering.  ``mps`` builds one caterpillar over the
    concatenated orderings; ``comb`` builds one caterpillar per subset and
    chains their roots.
    """
    groups = []
    for s in sigma_sets:
        key = frozenset(s)
        edges = list(sigma_edges[key])
        if set(edges) != key:
            raise ValueError("per-subset ordering does not cover the subset")
        groups.append(edges)
    if not groups:
        raise ValueError("no edge subsets to embed")
    if ansatz == "mps":
        return mps_tree([e for grp in groups for e in grp])
    if ansatz == "comb":
        return comb_tree(groups)
    raise ValueError(f"unknown ansatz {ansatz!r}")
