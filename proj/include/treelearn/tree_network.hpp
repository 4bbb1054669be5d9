#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "treelearn/dimension_tree.hpp"
#include "treelearn/feature_basis.hpp"
#include "treelearn/random.hpp"
#include "treelearn/tensor.hpp"

namespace treelearn {

enum class OrthState { none, all, node };

std::string orth_state_name(OrthState s);

// Leaf cores have shape (N, r); interior cores (r_child1, ..., r_childs, r) with
// children in the tree's stored order. The root rank is 1.
class TreeTensorNetwork {
public:
    TreeTensorNetwork() = default;
    // bases are indexed by dimension, cores by tree slot.
    TreeTensorNetwork(DimensionTree tree, std::vector<FeatureBasis> bases, std::vector<FullTensor> cores);

    static TreeTensorNetwork random(const DimensionTree& tree, const std::vector<FeatureBasis>& bases,
                                    const RankMap& ranks, Rng& rng);
    static TreeTensorNetwork zeros(const DimensionTree& tree, const std::vector<FeatureBasis>& bases,
                                   const RankMap& ranks);
    // Rank-one network equal to the constant function `value`.
    static TreeTensorNetwork constant(const DimensionTree& tree, const std::vector<FeatureBasis>& bases,
                                      double value);

    const DimensionTree& tree() const { return tree_; }
    const std::vector<FeatureBasis>& bases() const { return bases_; }
    const FullTensor& core(NodeId a) const { return cores_.at(a); }
    const std::vector<FullTensor>& cores() const { return cores_; }

    // Replacing a core drops the orthogonality bookkeeping touching it.
    void set_core(NodeId a, FullTensor c);
    // Replaces tree and cores together; ranks may change.
    void reset(DimensionTree tree, std::vector<FullTensor> cores);

    std::size_t rank(NodeId a) const { return cores_.at(a).shape().back(); }
    RankMap ranks() const;
    std::vector<std::size_t> leaf_dims() const;
    std::size_t complexity() const;

    OrthState orth_state() const { return state_; }
    NodeId orth_node() const { return center_; }
    void set_orth_state(OrthState s, NodeId center = no_node);
    // Per-node flag: the node's functions u^a are known to be orthonormal.
    bool orthonormal(NodeId a) const { return orthonormal_.at(a) != 0; }
    void mark_orthonormal(NodeId a, bool value) { orthonormal_.at(a) = value ? 1 : 0; }

    // Throws std::logic_error when core shapes disagree with the tree.
    void check() const;

    std::string serialize() const;
    static TreeTensorNetwork parse(const std::string& text);

private:
    DimensionTree tree_;
    std::vector<FeatureBasis> bases_;
    std::vector<FullTensor> cores_;
    std::vector<char> orthonormal_;
    OrthState state_ = OrthState::none;
    NodeId center_ = no_node;
};

class InfeasibleMove : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// xs holds one point per row.
Vector evaluate(const TreeTensorNetwork& net, const Matrix& xs);

FullTensor assemble_full(const TreeTensorNetwork& net, std::size_t max_entries = 10'000'000);

void orthogonalize_in_place(TreeTensorNetwork& net);
TreeTensorNetwork orthogonalize(TreeTensorNetwork net);

// Returns true when the Gram matrix had to be regularized.
bool alpha_orthogonalize_in_place(TreeTensorNetwork& net, NodeId alpha);
TreeTensorNetwork alpha_orthogonalize(TreeTensorNetwork net, NodeId alpha);

// Factor L with G = L L^T for the Gram matrix of the functions w^a, for every
// node, on an all-orthogonal network. Singular values of L are the a-singular values.
struct NodeFactor {
    Matrix basis;          // r x r orthogonal
    Vector singular_values;  // length r, nonincreasing
};
std::vector<NodeFactor> node_factors(const TreeTensorNetwork& orthogonal_net);

// Entry a is the a-singular value vector (length r_a); the root holds the norm.
using SingularSpectrum = std::vector<Vector>;
SingularSpectrum singular_spectrum(const TreeTensorNetwork& net);

TreeTensorNetwork truncate(const TreeTensorNetwork& net, double epsilon);
TreeTensorNetwork truncate(const TreeTensorNetwork& net, const RankMap& target);

TreeTensorNetwork add(const TreeTensorNetwork& a, const TreeTensorNetwork& b);
TreeTensorNetwork scale(TreeTensorNetwork net, double c);
double norm(const TreeTensorNetwork& net);

// Moves to the permuted tree, splitting the merged tensor with per-split
// tolerance epsilon / sqrt(#affected). Throws InfeasibleMove when the merged
// tensor would exceed max_entries.
void permute_representation_in_place(TreeTensorNetwork& net, PermutationMove move, double epsilon,
                                     std::size_t max_entries = 10'000'000);
TreeTensorNetwork permute_representation(TreeTensorNetwork net, PermutationMove move, double epsilon,
                                         std::size_t max_entries = 10'000'000);

}  // namespace treelearn
