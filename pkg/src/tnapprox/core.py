"""Dense tensors with labeled modes, and the factored linear algebra they need.

Every operation that costs floating point work takes an optional
``FlopCounter`` and charges it according to a fixed cost model:

- pairwise contraction: product of all distinct mode sizes of the two
  operands (shared modes counted once),
- QR of an m x n matrix: m * n * min(m, n),
- rank-r truncated factorization of an m x n matrix: m * n * r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: relative cutoff below which singular/eigen values count as zero
ZERO_CUTOFF = 1e-15

PRIME = "'"


def prime(label: str) -> str:
    return label + PRIME


def unprime(label: str) -> str:
    return label[:-1] if label.endswith(PRIME) else label


@dataclass
class FlopCounter:
    """Accumulates multiply-add charges for one contraction job."""

    total: float = 0.0
    by_kind: dict = field(default_factory=dict)

    def add(self, n: float, kind: str = "other") -> None:
        self.total += n
        self.by_kind[kind] = self.by_kind.get(kind, 0.0) + n


class Tensor:
    """A dense array whose modes carry string labels.

    Labels are unique within a tensor; two tensors sharing a label share an
    edge, and contraction sums over it.
    """

    __slots__ = ("data", "inds")

    def __init__(self, data, inds):
        data = np.asarray(data, dtype=np.float64)
        inds = tuple(inds)
        if data.ndim != len(inds):
            raise ValueError(
                f"tensor has {data.ndim} modes but {len(inds)} labels given"
            )
        if len(set(inds)) != len(inds):
            raise ValueError(f"duplicate mode labels in {inds}")
        self.data = data
        self.inds = inds

    @property
    def sizes(self):
        return dict(zip(self.inds, self.data.shape))

    def size_of(self, label):
        return self.data.shape[self.inds.index(label)]

    def relabeled(self, mapping) -> "Tensor":
        return Tensor(self.data, tuple(mapping.get(i, i) for i in self.inds))

    def primed(self, keep=()) -> "Tensor":
        """Copy with every label primed except those in ``keep``."""
        return self.relabeled({i: prime(i) for i in self.inds if i not in keep})

    def transposed(self, inds) -> "Tensor":
        inds = tuple(inds)
        if set(inds) != set(self.inds):
            raise ValueError("transpose labels must be a permutation")
        perm = [self.inds.index(i) for i in inds]
        return Tensor(self.data.transpose(perm), inds)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def item(self) -> float:
        if self.inds:
            raise ValueError("item() on a non-scalar tensor")
        return float(self.data)

    def __repr__(self):
        shape = dict(zip(self.inds, self.data.shape))
        return f"Tensor({shape})"


def contract(a: Tensor, b: Tensor, counter: FlopCounter | None = None) -> Tensor:
    """Contract two tensors over all shared labels."""
    shared = [i for i in a.inds if i in b.inds]
    for l in shared:
        if a.size_of(l) != b.size_of(l):
            raise ValueError(
                f"size mismatch on '{l}': {a.size_of(l)} vs {b.size_of(l)}"
            )
    if counter is not None:
        cost = float(np.prod(a.data.shape, dtype=float))
        cost *= float(np.prod(b.data.shape, dtype=float))
        for l in shared:
            cost /= a.size_of(l)
        counter.add(cost, "contract")
    ax_a = [a.inds.index(l) for l in shared]
    ax_b = [b.inds.index(l) for l in shared]
    out = np.tensordot(a.data, b.data, axes=(ax_a, ax_b))
    inds = tuple(i for i in a.inds if i not in shared) + tuple(
        i for i in b.inds if i not in shared
    )
    return Tensor(out, inds)


def contract_network(tensors, counter: FlopCounter | None = None) -> Tensor:
    """Contract a list of tensors down to one, greedily.

    Labels appearing in two tensors are summed; labels appearing once stay
    open.  At each step the pair of connected tensors whose result is
    smallest is contracted; disconnected pieces are joined by outer products
    at the end.
    """
    pool = [t if isinstance(t, Tensor) else Tensor(*t) for t in tensors]
    if not pool:
        raise ValueError("empty tensor list")
    while len(pool) > 1:
        best = None
        for i in range(len(pool)):
            for j in range(i + 1, len(pool)):
                shared = set(pool[i].inds) & set(pool[j].inds)
                if not shared:
                    continue
                out_size = 1.0
                for t in (pool[i], pool[j]):
                    for l, s in zip(t.inds, t.data.shape):
                        if l not in shared:
                            out_size *= s
                if best is None or out_size < best[0]:
                    best = (out_size, i, j)
        if best is None:
            # no shared labels anywhere: outer products, smallest first
            pool.sort(key=lambda t: t.data.size)
            i, j = 0, 1
        else:
            _, i, j = best
        tj = pool.pop(j)
        ti = pool.pop(i)
        pool.append(contract(ti, tj, counter))
    return pool[0]


def matricize(t: Tensor, row_inds) -> np.ndarray:
    """Reshape ``t`` to a matrix with ``row_inds`` (in order) as rows.

    Column modes keep the tensor's own label order.  ``unmatricize`` with the
    same label lists is a bitwise round trip.
    """
    row_inds = list(row_inds)
    col_inds = [i for i in t.inds if i not in row_inds]
    tt = t.transposed(row_inds + col_inds)
    m = int(np.prod([t.size_of(i) for i in row_inds], dtype=np.int64)) if row_inds else 1
    n = tt.data.size // m
    return tt.data.reshape(m, n)


def unmatricize(m: np.ndarray, row_inds, row_shape, col_inds, col_shape) -> Tensor:
    data = np.asarray(m).reshape(tuple(row_shape) + tuple(col_shape))
    return Tensor(data, tuple(row_inds) + tuple(col_inds))


def qr(m: np.ndarray, counter: FlopCounter | None = None):
    """Reduced QR factorization of a matrix."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("qr expects a matrix")
    if counter is not None:
        counter.add(float(a.shape[0]) * a.shape[1] * min(a.shape), "qr")
    return np.linalg.qr(a, mode="reduced")


def _kept_rank(vals: np.ndarray, chi, cutoff: float) -> int:
    """How many of the descending nonnegative values survive truncation."""
    if vals.size == 0:
        return 0
    top = vals[0]
    if top <= 0.0:
        return 1  # keep one direction even for an exactly-zero matrix
    k = int(np.count_nonzero(vals > cutoff * top))
    k = max(k, 1)
    if chi is not None:
        k = min(k, int(chi))
    return k


def truncated_eig(
    mat: np.ndarray,
    chi=None,
    counter: FlopCounter | None = None,
    cutoff: float = ZERO_CUTOFF,
):
    """Leading eigenpairs of a symmetric positive semidefinite matrix.

    Returns (U, vals) with eigenvalues descending; ties keep ascending
    original index.  Raises if the matrix is not symmetric PSD up to
    roundoff.
    """
    a = np.asarray(mat, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("truncated_eig expects a square matrix")
    scale = np.abs(a).max() if a.size else 0.0
    if scale and np.abs(a - a.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(a)
    if vals.size and vals[0] < -1e-10 * max(scale, 1e-300):
        raise ValueError("matrix is not positive semidefinite")
    # eigh returns ascending; stable sort on negated values keeps ascending
    # original index among ties
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    vals = np.clip(vals, 0.0, None)
    k = _kept_rank(vals, chi, cutoff)
    if counter is not None:
        counter.add(float(a.shape[0]) * a.shape[1] * k, "eig")
    return vecs[:, :k], vals[:k]


def truncated_factor(
    mat: np.ndarray,
    chi=None,
    counter: FlopCounter | None = None,
    cutoff: float = ZERO_CUTOFF,
):
    """Rank-limited factorization M ~= U @ S with U orthonormal columns."""
    a = np.asarray(mat, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("truncated_factor expects a matrix")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    k = _kept_rank(s, chi, cutoff)
    if counter is not None:
        counter.add(float(a.shape[0]) * a.shape[1] * k, "factor")
    return u[:, :k], s[:k, None] * vt[:k]


def log_weight(sizes) -> float:
    """Sum of log mode sizes: w(E) = sum_e log(size(e))."""
    return float(sum(math.log(s) for s in sizes))
