"""Rooted binary trees whose leaves are uncontracted edge labels."""

from __future__ import annotations


class EmbeddingTree:
    """Full binary tree; each leaf names one uncontracted edge of a network.

    Nodes are integer ids.  Internal nodes have exactly two children, except
    in the degenerate single-leaf tree, where the root is the leaf.
    """

    def __init__(self):
        self.children: dict[int, tuple[int, ...]] = {}
        self.parent: dict[int, int | None] = {}
        self.leaf_label: dict[int, str] = {}
        self.root: int | None = None
        self._next = 0

    def add_leaf(self, label: str) -> int:
        nid = self._next
        self._next += 1
        self.children[nid] = ()
        self.parent[nid] = None
        self.leaf_label[nid] = label
        return nid

    def add_node(self, left: int, right: int) -> int:
        nid = self._next
        self._next += 1
        self.children[nid] = (left, right)
        self.parent[left] = nid
        self.parent[right] = nid
        self.parent[nid] = None
        return nid

    # -- queries ---------------------------------------------------------

    @property
    def nodes(self):
        return list(self.children)

    def is_leaf(self, nid: int) -> bool:
        return not self.children[nid]

    def leaves(self):
        return [n for n in self.children if not self.children[n]]

    def neighbors(self, nid: int):
        out = list(self.children[nid])
        p = self.parent[nid]
        if p is not None:
            out.append(p)
        return out

    def postorder(self):
        """Nodes with every child before its parent; root last."""
        out = []

        def walk(n):
            for c in self.children[n]:
                walk(c)
            out.append(n)

        walk(self.root)
        return out

    def leaf_labels_under(self, nid: int):
        """Leaf labels of the subtree rooted at ``nid``, left to right."""
        out = []

        def walk(n):
            if not self.children[n]:
                out.append(self.leaf_label[n])
            for c in self.children[n]:
                walk(c)

        walk(nid)
        return out

    def path(self, a: int, b: int):
        """Vertices on the tree path from a to b, inclusive."""
        anc_a = [a]
        while self.parent[anc_a[-1]] is not None:
            anc_a.append(self.parent[anc_a[-1]])
        pos = {n: i for i, n in enumerate(anc_a)}
        tail = [b]
        while tail[-1] not in pos:
            tail.append(self.parent[tail[-1]])
        meet = tail.pop()
        return anc_a[: pos[meet] + 1] + tail[::-1]

    def validate(self):
        if self.root is None:
            raise ValueError("tree has no root")
        seen = set()
        stack = [self.root]
        while stack:
            n = stack.pop()
            if n in seen:
                raise ValueError("cycle in tree")
            seen.add(n)
            kids = self.children[n]
            if kids and len(kids) != 2:
                raise ValueError("internal node without exactly two children")
            stack.extend(kids)
        if seen != set(self.children):
            raise ValueError("unreachable nodes in tree")
        labels = [self.leaf_label[n] for n in self.leaves()]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate leaf labels")


def mps_tree(labels) -> EmbeddingTree:
    """Caterpillar tree over the given leaf labels, left to right."""
    t = EmbeddingTree()
    labels = list(labels)
    if not labels:
        raise ValueError("mps_tree needs at least one leaf")
    cur = t.add_leaf(labels[0])
    for lab in labels[1:]:
        cur = t.add_node(cur, t.add_leaf(lab))
    t.root = cur
    t.validate()
    return t


def comb_tree(groups) -> EmbeddingTree:
    """Comb tree: a caterpillar spine whose teeth are per-group caterpillars."""
    groups = [list(g) for g in groups if g]
    if not groups:
        raise ValueError("comb_tree needs at least one nonempty group")
    t = EmbeddingTree()

    def branch(labels):
        cur = t.add_leaf(labels[0])
        for lab in labels[1:]:
            cur = t.add_node(cur, t.add_leaf(lab))
        return cur

    cur = branch(groups[0])
    for g in groups[1:]:
        cur = t.add_node(cur, branch(g))
    t.root = cur
    t.validate()
    return t
