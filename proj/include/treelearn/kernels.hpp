#pragma once

#include <cstddef>
#include <vector>

#include "treelearn/tree_network.hpp"

// Batch kernels over samples. Each has a serial reference and an OpenMP
// variant; both process the same fixed row blocks, so results are bitwise equal.
namespace treelearn::kernels {

enum class Exec { serial, parallel };

inline constexpr std::size_t block_rows = 256;

// n x (p+1) matrix of phi_i(xs(k, dim)).
RowMatrix basis_matrix(const FeatureBasis& b, const Matrix& xs, std::size_t dim, Exec exec);

// Row k is the Kronecker product of the k-th rows of the factors, first factor
// most significant.
RowMatrix rowwise_kron(const std::vector<const RowMatrix*>& factors, Exec exec);

// k x c product computed in fixed row blocks.
RowMatrix block_product(const RowMatrix& k, const Matrix& c, Exec exec);

// Values u^a_k(x) for every node (n x r_a), leaves to root.
std::vector<RowMatrix> upward_values(const TreeTensorNetwork& net, const std::vector<RowMatrix>& basis,
                                     Exec exec);
std::vector<RowMatrix> basis_matrices(const TreeTensorNetwork& net, const Matrix& xs, Exec exec);

// w^beta values for a child given the parent's w values and its children's u values.
RowMatrix child_down_values(const TreeTensorNetwork& net, NodeId beta, const std::vector<RowMatrix>& up,
                            const RowMatrix& parent_down, Exec exec);

struct NodeFunctionValues {
    std::vector<RowMatrix> up;    // u^a values, n x r_a
    std::vector<RowMatrix> down;  // w^a values, n x r_a (root: column of ones)
};
NodeFunctionValues node_function_values(const TreeTensorNetwork& net, const Matrix& xs, Exec exec);

Vector evaluate_batch(const TreeTensorNetwork& net, const Matrix& xs, Exec exec);
// Contracts the tree separately for every point.
Vector evaluate_pointwise(const TreeTensorNetwork& net, const Matrix& xs, Exec exec);

}  // namespace treelearn::kernels
