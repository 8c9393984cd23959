"""Approximate contraction of arbitrary tensor networks with binary-tree
intermediates."""

from .core import (
    FlopCounter,
    Tensor,
    contract,
    contract_network,
    matricize,
    qr,
    truncated_eig,
    truncated_factor,
    unmatricize,
)
from .engine import (
    ContractJob,
    ContractResult,
    approx_tensor_network,
    interval_orderings,
    mpo_mps_dm,
    mpo_mps_fullenv,
    mpo_mps_zipup,
    partitioned_contract,
    swap_adjacent,
)
from .network import TensorNetwork, linear_ordering, mincut, tree_embedding
from .ordering import (
    CTNode,
    build_constraint_tree,
    build_embedding_tree,
    enumerate_constrained_orderings,
    kendall_tau,
    ordering_under_constraint,
)
from .treeapprox import (
    DensityMatrixCache,
    PartitionedTree,
    TreeTensorNetwork,
    canonical_form,
    density_matrix,
    density_matrix_alg,
    truncate_tree_canonical,
)
from .trees import EmbeddingTree, comb_tree, mps_tree

__all__ = [name for name in dir() if not name.startswith("_")]
